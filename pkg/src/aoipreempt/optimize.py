"""Mean-AoI sweeps over the preemption threshold and a golden-section polish."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .aoi import MomentError, aoi_transform, mean_aoi
from .dist import INF, ModelParams, ServiceDistribution

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class BracketInvalid(ValueError):
    pass


@dataclass
class SweepResult:
    grid: list[tuple[float, float]]
    best_theta: float
    best_mean: float
    endpoints: dict[str, float]
    failures: dict[float, str] = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["theta,mean_aoi"]
        for theta, value in self.grid:
            th = "inf" if theta == INF else repr(float(theta))
            lines.append(f"{th},{value!r}")
        return "\n".join(lines) + "\n"

    def value_at(self, theta: float) -> float:
        for th, value in self.grid:
            if th == theta:
                return value
        raise KeyError(theta)


def default_thetas(service: ServiceDistribution) -> list[float]:
    scale = service.mean
    return [round(0.1 * k, 10) * scale for k in range(51)] + [INF]


def mean_at(lam: float, service: ServiceDistribution, theta: float) -> float:
    return mean_aoi(aoi_transform(ModelParams(lam, theta, service)))


def sweep(lam: float, service: ServiceDistribution, thetas: Optional[Iterable[float]] = None) -> SweepResult:
    """Analytic mean AoI at each threshold; 0 and inf are always included."""
    grid_thetas = set(default_thetas(service) if thetas is None else thetas)
    if not grid_thetas and thetas is not None:
        raise ValueError("empty theta list")
    grid_thetas |= {0.0, INF}
    grid, failures = [], {}
    for theta in sorted(grid_thetas):
        try:
            value = mean_at(lam, service, theta)
        except (MomentError, ValueError, ZeroDivisionError) as exc:
            failures[theta] = str(exc)
            value = math.nan
        grid.append((theta, value))
    finite = [(v, th) for th, v in grid if math.isfinite(v)]
    if not finite:
        raise MomentError("mean AoI failed at every threshold")
    best_mean, best_theta = min(finite)
    endpoints = {"0": grid[0][1], "inf": grid[-1][1]}
    return SweepResult(grid, best_theta, best_mean, endpoints, failures)


def interior_brackets(result: SweepResult) -> list[tuple[float, float, float]]:
    """(left, centre, right) triples where the centre beats both neighbours."""
    pts = [(th, v) for th, v in result.grid if math.isfinite(v)]
    out = []
    for (a, fa), (c, fc), (b, fb) in zip(pts, pts[1:], pts[2:]):
        if fc < fa and fc < fb and b != INF:
            out.append((a, c, b))
    return out


def refine(
    lam: float,
    service: ServiceDistribution,
    bracket: tuple[float, float],
    centre: Optional[float] = None,
    tol: Optional[float] = None,
) -> tuple[float, float]:
    """Golden-section search for a local minimiser of the mean AoI in ``bracket``.

    The centre (midpoint by default) must beat both ends. Nothing is assumed
    about unimodality beyond the bracket, so the answer is local.
    """
    a, b = map(float, bracket)
    if a > b:
        a, b = b, a
    if b == INF:
        raise BracketInvalid("bracket must be finite")

    def f(x):
        return mean_at(lam, service, x)

    if a == b:
        return a, f(a)
    tol = 1e-4 * service.mean if tol is None else tol
    c = 0.5 * (a + b) if centre is None else float(centre)
    fa, fb, fc = f(a), f(b), f(c)
    if not (a < c < b and fc < fa and fc < fb):
        raise BracketInvalid(f"no interior minimum certified in [{a}, {b}]")

    best_x, best_f = c, fc
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        for x, fx in ((x1, f1), (x2, f2)):
            if fx < best_f:
                best_x, best_f = x, fx
    return best_x, best_f


def thetas_from_text(text: str) -> list[float]:
    """Parse ``0,0.5,1,inf`` or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    if text.count(":") == 2:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [float(x) for x in np.round(start + step * np.arange(n), 12)]
    return [float(x) for x in text.split(",") if x.strip()]
