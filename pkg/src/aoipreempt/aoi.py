"""Stationary AoI transform assembled from the embedded Markov-renewal cycle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dist import ModelParams
from .kernels import (
    SERVICE_ONLY,
    ConditionalTransforms,
    PolicyConstants,
    build_kernels,
    compute_constants,
    conditional_transforms,
)

# the series patch covers |s| E C < TAYLOR_RADIUS
TAYLOR_RADIUS = 1e-4
# refined derivative step, as a fraction of 1 / E C
MOMENT_STEP = 0.03


class MomentError(ArithmeticError):
    """Numerical derivatives at the origin did not settle to a finite value."""


def richardson_derivatives(f: Callable, h: float, levels: int = 3) -> tuple[float, float]:
    """First and second derivatives of ``f`` at 0.

    Central differences at ``h, h/2, h/4, ...`` followed by Richardson
    extrapolation in ``h**2``.
    """
    f0 = float(np.real(f(0.0)))
    d1 = np.zeros((levels, levels))
    d2 = np.zeros((levels, levels))
    for i in range(levels):
        step = h / 2**i
        fp = float(np.real(f(step)))
        fm = float(np.real(f(-step)))
        d1[i, 0] = (fp - fm) / (2.0 * step)
        d2[i, 0] = (fp - 2.0 * f0 + fm) / step**2
        for j in range(1, i + 1):
            factor = 4.0**j
            d1[i, j] = (factor * d1[i, j - 1] - d1[i - 1, j - 1]) / (factor - 1.0)
            d2[i, j] = (factor * d2[i, j - 1] - d2[i - 1, j - 1]) / (factor - 1.0)
    first, second = float(d1[-1, -1]), float(d2[-1, -1])
    if not (math.isfinite(first) and math.isfinite(second)):
        raise MomentError("derivative estimate is not finite")
    # the last two extrapolants must agree; a divergent moment blows this up
    for table in (d1, d2):
        best, prev = table[-1, -1], table[-1, -2]
        if abs(best - prev) > 1e-4 * max(1.0, abs(best)):
            raise MomentError("derivative extrapolation did not converge")
    return first, second


@dataclass(frozen=True)
class CycleMoments:
    age_mean: float
    cycle_mean: float
    cycle_second: float


@dataclass(frozen=True)
class AoiTransform:
    """E exp(-s alpha) for the stationary age, plus the pieces it is built from.

    ``cond_age_by_K0[i]`` is the age-at-departure transform given K = i and
    ``cond_cycle_by_Kprev[i]`` the following cycle's transform given the same
    occupancy. Branches with zero probability are ``None``.
    """

    params: ModelParams
    constants: PolicyConstants
    cond_age_by_K0: tuple[Optional[Callable], Optional[Callable]]
    cond_cycle_by_Kprev: tuple[Optional[Callable], Optional[Callable]]
    moments: tuple[Optional[CycleMoments], Optional[CycleMoments]]
    mean_cycle: float

    def _weights(self):
        c = self.constants
        for i, p in enumerate((c.p0, c.p1)):
            if p > 0.0 and self.moments[i] is not None:
                yield i, p

    def residual_cycle(self, i: int, s):
        """(1 - E[exp(-s C) | K = i]) / s with the removable point patched."""
        s = np.asarray(s, dtype=complex) if np.iscomplexobj(s) else np.asarray(s, dtype=float)
        mom = self.moments[i]
        small = np.abs(s) < self.patch_radius(i)
        safe = np.where(small, 1.0, s)
        direct = (1.0 - self.cond_cycle_by_Kprev[i](safe)) / safe
        series = mom.cycle_mean - 0.5 * s * mom.cycle_second
        out = np.where(small, series, direct)
        return out[()] if out.ndim == 0 else out

    def patch_radius(self, i: int) -> float:
        return TAYLOR_RADIUS / self.moments[i].cycle_mean

    @property
    def time_scale(self) -> float:
        """Largest of the model's natural times; derivative steps go as its inverse."""
        m = self.params
        return max(1.0 / m.lam + m.service.mean, self.mean_cycle, 1.0 / _pole_distance(m))

    @property
    def age_floor(self) -> float:
        """Almost-sure lower bound of the age: the smallest possible service time."""
        d = self.params.service
        if d.exp_components:
            return 0.0
        return min(a for a, _ in d.atoms)

    def phi(self, s, shift: float = 0.0):
        """E exp(-s alpha); with ``shift`` the transform of alpha - shift."""
        s = np.asarray(s, dtype=complex) if np.iscomplexobj(s) else np.asarray(s, dtype=float)
        acc = 0.0 * s
        for i, p in self._weights():
            acc = acc + p * self.cond_age_by_K0[i](s, shift) * self.residual_cycle(i, s)
        out = acc / self.mean_cycle
        return out[()] if out.ndim == 0 else out

    __call__ = phi

    def numerator_terms(self, s):
        """Sum over K of age transform times (1 - cycle transform) times p."""
        acc = 0.0
        for i, p in self._weights():
            acc = acc + p * self.cond_age_by_K0[i](s) * (1.0 - self.cond_cycle_by_Kprev[i](s))
        return acc


def _mix(pa: float, fa, pb: float, fb):
    if pb == 0.0 or fb is None:
        return fa
    if pa == 0.0 or fa is None:
        return fb
    return lambda s, *shift: pa * fa(s, *shift) + pb * fb(s, *shift)


def _pole_distance(m: ModelParams) -> float:
    """Distance from 0 to the nearest fixed pole of the kernel transforms."""
    return min([m.lam] + [r for r, _ in m.service.exp_components])


def _coarse_mean(f, scale: float, attempts: int = 6) -> float:
    """-f'(0), shrinking the step until it resolves the transform's own scale."""
    h = 1e-3 / scale
    for _ in range(attempts):
        try:
            return -richardson_derivatives(f, h)[0]
        except MomentError:
            h /= 10.0
    raise MomentError("no step size resolves the mean")


def assemble(
    ct: ConditionalTransforms, c: PolicyConstants, m: ModelParams
) -> AoiTransform:
    p0, p1 = c.p0, c.p1
    ages = tuple(_mix(p0, ct.age[0][j], p1, ct.age[1][j]) for j in (0, 1))
    cycles = tuple(_mix(p0, ct.cycle[i][0], p1, ct.cycle[i][1]) for i in (0, 1))

    # time scale for the derivative steps, never shorter than a pole allows
    scale = max(1.0 / m.lam + m.service.mean, 1.0 / _pole_distance(m))
    moments = []
    for i, p in enumerate((p0, p1)):
        if p == 0.0 or ages[i] is None or cycles[i] is None:
            moments.append(None)
            continue
        # first pass fixes the time scale, second pass uses it for the step
        m1 = _coarse_mean(cycles[i], scale)
        h = MOMENT_STEP / max(m1, scale)
        c1, c2 = richardson_derivatives(cycles[i], h)
        a1, _ = richardson_derivatives(ages[i], 1e-3 / max(scale, _coarse_mean(ages[i], scale)))
        moments.append(CycleMoments(age_mean=-a1, cycle_mean=-c1, cycle_second=c2))
    mean_cycle = sum(p * mom.cycle_mean for p, mom in zip((p0, p1), moments) if mom is not None)
    if not mean_cycle > 0.0:
        raise MomentError(f"mean cycle length {mean_cycle} is not positive")
    return AoiTransform(
        params=m,
        constants=c,
        cond_age_by_K0=ages,
        cond_cycle_by_Kprev=cycles,
        moments=tuple(moments),
        mean_cycle=mean_cycle,
    )


def aoi_transform(m: ModelParams, queued_branch: str = SERVICE_ONLY) -> AoiTransform:
    """Convenience pipeline: constants, kernels, conditional transforms, assembly."""
    c = compute_constants(m)
    k = build_kernels(m, c)
    ct = conditional_transforms(k, c, m, queued_branch=queued_branch)
    return assemble(ct, c, m)


def mean_aoi(a: AoiTransform) -> float:
    """Stationary mean age from cycle moments.

    E alpha = sum_i p_i (E[age | i] E[C | i] + E[C^2 | i] / 2) / E C.
    """
    total = 0.0
    for i, p in a._weights():
        mom = a.moments[i]
        total += p * (mom.age_mean * mom.cycle_mean + 0.5 * mom.cycle_second)
    value = float(total / a.mean_cycle)
    if not math.isfinite(value):
        raise MomentError("mean age is not finite")
    return value


def mean_aoi_from_phi(a: AoiTransform, h: float | None = None) -> float:
    """-phi'(0) by Richardson extrapolation of one-sided slopes of phi.

    Kept as a cross-check on :func:`mean_aoi`; it stays away from the
    patched neighbourhood of the origin.
    """
    levels = 5
    if h is None:
        h = 1e-2 / a.time_scale
        # the smallest step must clear the series patch
        radius = max(a.patch_radius(i) for i, _ in a._weights())
        h = max(h, 2.0 ** levels * radius)
    steps = [h / 2**k for k in range(levels)]
    table = [[(1.0 - float(np.real(a.phi(x)))) / x] for x in steps]
    # slope(h) = E alpha - h E alpha^2 / 2 + ..., errors in powers of h
    for i in range(1, len(steps)):
        for j in range(1, i + 1):
            factor = 2.0**j
            table[i].append((factor * table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0))
    return table[-1][-1]


def variance_aoi(a: AoiTransform) -> float:
    """Variance from a numerical second derivative of phi; no accuracy guarantee."""
    mean = mean_aoi(a)
    h = 1e-2 / a.time_scale
    _, second = richardson_derivatives(lambda s: a.phi(s), h)
    return second - mean * mean
