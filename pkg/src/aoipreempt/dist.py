"""Service-time laws made of atoms and exponential pieces.

Every Stieltjes integral needed downstream reduces to elementary functions
for this family, so everything here is closed form and accepts complex
Laplace arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf
WEIGHT_TOL = 1e-12


class DegenerateKernel(ValueError):
    """Raised when the service law puts no mass above the threshold."""


def _expint(c, length):
    """Return int_0^length exp(-c y) dy for Re(c) > 0, length in [0, inf]."""
    if length == INF:
        return 1.0 / c
    if length <= 0.0:
        return 0.0 * c
    return -np.expm1(-c * length) / c


@dataclass(frozen=True)
class ServiceDistribution:
    """Mixture of point masses and exponential densities.

    ``atoms`` holds ``(location, weight)`` pairs and ``exp_components`` holds
    ``(rate, weight)`` pairs. Weights must sum to one.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    exp_components: tuple[tuple[float, float], ...] = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        atoms = tuple((float(a), float(w)) for a, w in self.atoms if w != 0.0)
        comps = tuple((float(r), float(w)) for r, w in self.exp_components if w != 0.0)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "exp_components", comps)
        if not atoms and not comps:
            raise ValueError("service distribution has no mass")
        for a, w in atoms:
            if not (a > 0.0 and math.isfinite(a)):
                raise ValueError(f"atom location must be finite and positive, got {a}")
            if w < 0.0:
                raise ValueError(f"negative weight {w}")
        for r, w in comps:
            if not (r > 0.0 and math.isfinite(r)):
                raise ValueError(f"exponential rate must be finite and positive, got {r}")
            if w < 0.0:
                raise ValueError(f"negative weight {w}")
        total = sum(w for _, w in atoms) + sum(w for _, w in comps)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")

    @property
    def mean(self) -> float:
        return sum(w * a for a, w in self.atoms) + sum(w / r for r, w in self.exp_components)

    @property
    def second_moment(self) -> float:
        return sum(w * a * a for a, w in self.atoms) + sum(
            2.0 * w / (r * r) for r, w in self.exp_components
        )

    def cdf(self, x: float) -> float:
        """P(sigma <= x)."""
        if x == INF:
            return 1.0
        mass = sum(w for a, w in self.atoms if a <= x)
        if x > 0.0:
            mass += sum(-w * math.expm1(-r * x) for r, w in self.exp_components)
        return mass

    def survival(self, x: float) -> float:
        """P(sigma > x)."""
        if x == INF:
            return 0.0
        tail = sum(w for a, w in self.atoms if a > x)
        tail += sum(w * math.exp(-r * max(x, 0.0)) for r, w in self.exp_components)
        return tail

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. service times."""
        kinds = [("atom", a, w) for a, w in self.atoms]
        kinds += [("exp", r, w) for r, w in self.exp_components]
        if len(kinds) == 1:
            kind, par, _ = kinds[0]
            if kind == "atom":
                return np.full(size, par)
            return rng.exponential(1.0 / par, size)
        probs = np.array([w for _, _, w in kinds])
        which = rng.choice(len(kinds), size=size, p=probs / probs.sum())
        out = np.empty(size)
        for idx, (kind, par, _) in enumerate(kinds):
            mask = which == idx
            n = int(mask.sum())
            if kind == "atom":
                out[mask] = par
            else:
                out[mask] = rng.exponential(1.0 / par, n)
        return out

    def to_literal(self) -> str:
        """Inverse of :func:`parse_distribution` for the three named families."""
        if self.label:
            return self.label
        return repr(self)


def deterministic(d: float) -> ServiceDistribution:
    return ServiceDistribution(atoms=((d, 1.0),), label=f"det:{_fmt(d)}")


def exponential(mu: float) -> ServiceDistribution:
    return ServiceDistribution(exp_components=((mu, 1.0),), label=f"exp:{_fmt(mu)}")


def mixture_det_exp(w: float, d: float, mu: float) -> ServiceDistribution:
    """Point mass at ``d`` with probability ``w``, Exponential(``mu``) otherwise."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"mixture weight must lie in [0, 1], got {w}")
    return ServiceDistribution(
        atoms=((d, w),),
        exp_components=((mu, 1.0 - w),),
        label=f"mix:{_fmt(w)},det={_fmt(d)},exp={_fmt(mu)}",
    )


def _fmt(x: float) -> str:
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def parse_distribution(text: str) -> ServiceDistribution:
    """Parse ``exp:MU``, ``det:D`` or ``mix:W,det=D,exp=MU``."""
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise ValueError(f"malformed distribution literal {text!r}")
    kind = kind.lower()
    try:
        if kind == "exp":
            return exponential(float(body))
        if kind == "det":
            return deterministic(float(body))
        if kind == "mix":
            parts = [p.strip() for p in body.split(",")]
            if len(parts) != 3:
                raise ValueError("mix needs W,det=D,exp=MU")
            w = float(parts[0])
            kv = dict(p.split("=", 1) for p in parts[1:])
            return mixture_det_exp(w, float(kv["det"]), float(kv["exp"]))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed distribution literal {text!r}: {exc}") from None
    raise ValueError(f"unknown distribution family {kind!r} in {text!r}")


@dataclass(frozen=True)
class ModelParams:
    """Arrival rate, preemption threshold (``math.inf`` allowed) and service law."""

    lam: float
    theta: float
    service: ServiceDistribution

    def __post_init__(self):
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"arrival rate must be positive and finite, got {self.lam}")
        if math.isnan(self.theta) or self.theta < 0.0:
            raise ValueError(f"threshold must lie in [0, inf], got {self.theta}")

    @property
    def rho(self) -> float:
        return self.lam * self.service.mean

    def with_theta(self, theta: float) -> "ModelParams":
        return ModelParams(self.lam, theta, self.service)


def laplace_G(d: ServiceDistribution, s):
    """E exp(-s sigma); works elementwise on complex arrays."""
    s = np.asarray(s, dtype=complex) if np.iscomplexobj(s) else np.asarray(s, dtype=float)
    out = 0.0 * s
    for a, w in d.atoms:
        out = out + w * np.exp(-s * a)
    for r, w in d.exp_components:
        out = out + w * r / (r + s)
    return out[()] if out.ndim == 0 else out


def partial_exp_integral(d: ServiceDistribution, lam: float, theta: float) -> tuple[float, float]:
    """Split E exp(-lam (theta ^ sigma)) into its two pieces.

    Returns ``(int_[0,theta] exp(-lam s) dG(s), (1 - G(theta)) exp(-lam theta))``.
    An atom sitting exactly at ``theta`` belongs to the first piece.
    """
    if theta == INF:
        return float(laplace_G(d, lam)), 0.0
    head = sum(w * math.exp(-lam * a) for a, w in d.atoms if a <= theta)
    head += sum(w * r * float(_expint(lam + r, theta)) for r, w in d.exp_components)
    return head, d.survival(theta) * math.exp(-lam * theta)


def tail_weighted_integrals(d: ServiceDistribution, lam: float, theta: float) -> tuple[float, float]:
    """Return ``(int_(theta,inf) (e^{-lam theta} - e^{-lam z}) dG(z),
    int_(theta,inf) (1 - e^{-lam (z - theta)}) dG(z))``.

    The second is ``exp(lam theta)`` times the first. Raises
    :class:`DegenerateKernel` when either vanishes, i.e. G(theta) = 1.
    """
    if theta == INF:
        raise DegenerateKernel("tail integrals undefined at theta = inf")
    scaled = sum(-w * math.expm1(-lam * (a - theta)) for a, w in d.atoms if a > theta)
    scaled += sum(w * math.exp(-r * theta) * lam / (lam + r) for r, w in d.exp_components)
    first = math.exp(-lam * theta) * scaled
    if scaled <= 0.0 or first <= 0.0:
        raise DegenerateKernel(f"no service mass above theta={theta}")
    return first, scaled
