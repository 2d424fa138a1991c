"""Embedded-chain constants and conditional transforms for the dynamic policy.

Notation follows the code, not any particular text:

* ``q``  probability that a service attempt is preempted,
* ``p0`` / ``p1`` law of the queue occupancy right after a successful departure,
* ``J``  law of a preempted attempt's duration,
* ``F0`` law of a successful service that saw no arrival,
* ``F1`` law of a successful service during which a message got queued,
* ``H``  law of the backward time from a departure to the queued message's arrival.

All transforms are closed form for :class:`~aoipreempt.dist.ServiceDistribution`
and accept complex arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dist import (
    INF,
    DegenerateKernel,
    ModelParams,
    _expint,
    laplace_G,
    partial_exp_integral,
    tail_weighted_integrals,
)

Transform = Callable[[complex], complex]

# How the no-preemption branch after a queued start is weighted when the
# queued message itself is delivered.
SERVICE_ONLY = "service_only"
FULL_CYCLE = "full_cycle"
QUEUED_BRANCH_FORMS = (SERVICE_ONLY, FULL_CYCLE)


@dataclass(frozen=True)
class PolicyConstants:
    q: float
    p0: float
    p1: float


@dataclass(frozen=True)
class KernelTransforms:
    J_hat: Transform
    F0_hat: Transform
    F1_hat: Optional[Transform]
    H_hat: Optional[Transform]
    f1_defined: bool


@dataclass(frozen=True)
class ConditionalTransforms:
    """``cycle[i][j]`` and ``age[i][j]`` condition on K_prev = i, K = j.

    Entries are ``None`` where the conditioning event has probability zero
    and the underlying kernel is undefined.
    """

    cycle: tuple[tuple[Optional[Transform], Optional[Transform]], ...]
    age: tuple[tuple[Optional[Transform], Optional[Transform]], ...]
    queued_branch: str = SERVICE_ONLY


def _as_s(s):
    return np.asarray(s, dtype=complex) if np.iscomplexobj(s) else np.asarray(s, dtype=float)


def _scalar(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def _preempt_integral(m: ModelParams, s):
    """lam * int_0^theta exp(-(lam + s) y) P(sigma > y) dy."""
    d, lam, theta = m.service, m.lam, m.theta
    s = _as_s(s)
    acc = 0.0 * s
    for a, w in d.atoms:
        acc = acc + w * _expint(lam + s, min(a, theta))
    for r, w in d.exp_components:
        acc = acc + w * _expint(lam + s + r, theta)
    return lam * acc


def compute_constants(m: ModelParams) -> PolicyConstants:
    """Preemption probability and the Bernoulli law of the embedded chain."""
    if m.theta == 0.0:
        q = 0.0
    else:
        q = float(_preempt_integral(m, 0.0))
    g_lam = float(laplace_G(m.service, m.lam))
    success = 1.0 - q
    if m.theta == INF:
        return PolicyConstants(q=q, p0=1.0, p1=0.0)
    try:
        first, _ = tail_weighted_integrals(m.service, m.lam, m.theta)
    except DegenerateKernel:
        return PolicyConstants(q=q, p0=1.0, p1=0.0)
    # p0 and p1 are evaluated separately so the tiny one keeps its digits.
    p0 = g_lam / success
    p1 = first / success
    total = p0 + p1
    return PolicyConstants(q=q, p0=p0 / total, p1=p1 / total)


def success_probability(m: ModelParams) -> float:
    """1 - q through the two-piece split, an independent route to ``q``."""
    head, tail = partial_exp_integral(m.service, m.lam, m.theta)
    return head + tail


def build_kernels(m: ModelParams, c: PolicyConstants) -> KernelTransforms:
    d, lam, theta = m.service, m.lam, m.theta
    g_lam = float(laplace_G(d, lam))

    def J_hat(s):
        s = _as_s(s)
        if c.q == 0.0:
            return _scalar(np.ones_like(s))
        return _scalar(_preempt_integral(m, s) / c.q)

    def F0_hat(s, shift=0.0):
        # shift > 0 gives the transform of (X - shift); callers keep it below
        # the smallest atom so no term grows.
        s = _as_s(s)
        acc = 0.0 * s
        for a, w in d.atoms:
            acc = acc + w * np.exp(-(s + lam) * a + s * shift)
        for r, w in d.exp_components:
            acc = acc + w * r / (r + s + lam) * np.exp(s * shift)
        return _scalar(acc / g_lam)

    f1_defined = theta != INF
    scaled = 0.0
    if f1_defined:
        try:
            _, scaled = tail_weighted_integrals(d, lam, theta)
        except DegenerateKernel:
            f1_defined = False

    if not f1_defined:
        return KernelTransforms(J_hat, F0_hat, None, None, False)

    atoms_above = [(a, w) for a, w in d.atoms if a > theta]

    def F1_hat(s, shift=0.0):
        s = _as_s(s)
        acc = 0.0 * s
        for a, w in atoms_above:
            acc = acc - w * np.exp(-s * (a - shift)) * math.expm1(-lam * (a - theta))
        for r, w in d.exp_components:
            acc = acc + w * r * lam * np.exp(-(s + r) * theta + s * shift) / (
                (s + r) * (lam + s + r)
            )
        return _scalar(acc / scaled)

    def H_hat(s):
        s = _as_s(s)
        acc = 0.0 * s
        for a, w in atoms_above:
            acc = acc + w * _expint(lam + s, a - theta)
        for r, w in d.exp_components:
            acc = acc + w * math.exp(-r * theta) / (lam + s + r)
        return _scalar(lam * acc / scaled)

    return KernelTransforms(J_hat, F0_hat, F1_hat, H_hat, True)


def conditional_transforms(
    k: KernelTransforms,
    c: PolicyConstants,
    m: ModelParams,
    queued_branch: str = SERVICE_ONLY,
) -> ConditionalTransforms:
    """Cycle-length and age-at-departure transforms per (K_prev, K) pair.

    When K_prev = 1 the queued message starts service at once. If it is not
    preempted (probability ``1 - q``) its age at delivery is the backward
    time ``V`` plus its own service. With ``queued_branch="service_only"``
    that service is drawn from F0/F1; ``"full_cycle"`` multiplies ``H`` by the
    whole K_prev = 1 cycle transform instead, which overcounts the preempted
    attempts and disagrees with simulation whenever ``0 < q``.
    """
    if queued_branch not in QUEUED_BRANCH_FORMS:
        raise ValueError(f"queued_branch must be one of {QUEUED_BRANCH_FORMS}")
    lam, q = m.lam, c.q

    def geometric(s):
        if q == 0.0:
            return 1.0 + 0.0 * _as_s(s)
        return (1.0 - q) / (1.0 - q * k.J_hat(s))

    def fresh(s):
        s = _as_s(s)
        return lam / (lam + s)

    service = (k.F0_hat, k.F1_hat)

    def make_cycle(i, j):
        f = service[j]
        if f is None:
            return None
        if i == 0:
            return lambda s: _scalar(fresh(s) * geometric(s) * f(s))
        return lambda s: _scalar(geometric(s) * f(s))

    cycle = tuple(tuple(make_cycle(i, j) for j in (0, 1)) for i in (0, 1))

    # Age transforms take an optional ``shift`` and then describe age - shift.
    def make_age(i, j):
        f = service[j]
        if f is None:
            return None
        if i == 0:
            return f
        if k.H_hat is None:
            return None
        if queued_branch == SERVICE_ONLY:

            def age(s, shift=0.0):
                fs = f(s, shift)
                return _scalar(q * fs + (1.0 - q) * k.H_hat(s) * fs)

            return age

        def age_full(s, shift=0.0):
            fs = f(s, shift)
            return _scalar(q * fs + (1.0 - q) * k.H_hat(s) * geometric(s) * fs)

        return age_full

    age = tuple(tuple(make_age(i, j) for j in (0, 1)) for i in (0, 1))
    return ConditionalTransforms(cycle=cycle, age=age, queued_branch=queued_branch)
