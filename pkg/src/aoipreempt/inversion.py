"""Tail probabilities of the stationary age by Euler-summation Laplace inversion."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import comb

from .aoi import AoiTransform, mean_aoi

EULER_A = 18.4
EULER_N = 39
EULER_M = 11
ACCURACY_LIMIT = 1e-6
# term counts tried in turn where the error estimate is still too large
EULER_N_RETRIES = (80, 160, 320, 640, 1280)


class InversionAccuracyWarning(UserWarning):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class TailQuery:
    nu: float
    epsilon_target: Optional[float] = None

    def __post_init__(self):
        if not self.nu > 0.0:
            raise ValueError("nu must be positive")
        if self.epsilon_target is not None and not 0.0 < self.epsilon_target < 1.0:
            raise ValueError("epsilon_target must lie in (0, 1)")


def euler_inversion(fhat, t, a=EULER_A, n=EULER_N, m=EULER_M):
    """Invert the Laplace transform ``fhat`` at positive times ``t``.

    Abate-Whitt Euler algorithm: trapezoidal Bromwich sum of n + m + 1
    alternating terms with binomial averaging of the last m + 1 partial
    sums. Returns ``(values, error_estimates)``.

    The error estimate is the largest change in the Euler average when the
    term count moves to n - 1, n + 1 or n // 2. Near a kink convergence is
    only about 1/n, and then the half-count comparison is the one that
    sees the actual error.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(n + m + 2)
    s = (a + 2j * math.pi * k[:, None]) / (2.0 * t[None, :])
    terms = np.real(fhat(s))
    terms[0] *= 0.5
    terms *= np.where(k % 2 == 0, 1.0, -1.0)[:, None]
    partial = np.cumsum(terms, axis=0) * (math.exp(a / 2.0) / t)[None, :]
    weights = comb(m, np.arange(m + 1)) / 2.0**m

    def average(j):
        return weights @ partial[j : j + m + 1]

    current = average(n)
    err = np.zeros_like(current)
    for j in (n - 1, n + 1, n // 2):
        err = np.maximum(err, np.abs(average(j) - current))
    return current, err


def ccdf(a: AoiTransform, nu, warn: bool = True):
    """P(alpha > nu) for scalar or array ``nu``."""
    nu_arr = np.atleast_1d(np.asarray(nu, dtype=float))
    if np.any(nu_arr <= 0.0):
        raise ValueError("nu must be positive")
    # Inverting alpha - floor moves the kink at the floor to the origin.
    floor = a.age_floor

    def tail_transform(s):
        return (1.0 - a.phi(s, floor)) / s

    values = np.ones_like(nu_arr)
    err = np.zeros_like(nu_arr)
    above = nu_arr > floor
    if np.any(above):
        values[above], err[above] = euler_inversion(tail_transform, nu_arr[above] - floor)
    # kinks past the floor (multiples of an atom, say) slow convergence
    for n in EULER_N_RETRIES:
        bad = err > ACCURACY_LIMIT
        if not np.any(bad):
            break
        values[bad], err[bad] = euler_inversion(tail_transform, nu_arr[bad] - floor, n=n)
    if warn and np.any(err > ACCURACY_LIMIT):
        worst = float(np.max(err))
        warnings.warn(
            f"Euler inversion error estimate {worst:.2e} exceeds {ACCURACY_LIMIT:g}",
            InversionAccuracyWarning,
            stacklevel=2,
        )
    values = np.clip(values, 0.0, 1.0)
    return float(values[0]) if np.ndim(nu) == 0 else values


def find_threshold(a: AoiTransform, epsilon: float, mean: Optional[float] = None) -> float:
    """Smallest nu with P(alpha > nu) <= epsilon, by bisection."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    mean = mean_aoi(a) if mean is None else mean
    tol = 1e-6 * mean
    limit = 1e4 * mean

    def tail(x):
        return ccdf(a, x, warn=False)

    lo, hi = 0.0, mean
    while tail(hi) > epsilon:
        lo, hi = hi, 2.0 * hi
        if hi > limit:
            if tail(limit) > epsilon:
                raise BracketError(f"tail never drops below {epsilon} up to nu={limit:g}")
            hi = limit
            break
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid > 0.0 and tail(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return hi
