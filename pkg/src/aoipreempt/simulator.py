"""Event-driven simulation of two-cell AoI systems.

The core loop is compiled with numba. Each replication draws one stream of
Poisson arrivals and one stream of service times; the n-th service *start*
consumes the n-th service draw, so two policies fed the same seed share
common random numbers.
"""
from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from scipy import stats

from .dist import ModelParams

P2THETA = "P2theta"
P2THETA_VARIANT = "P2theta_variant"
B1 = "B1"
B2 = "B2"
POLICIES = {P2THETA: 0, P2THETA_VARIANT: 1, B1: 2, B2: 3}

CI_Z = 1.959963984540054
MIN_KERNEL_SAMPLES = 1000


class InsufficientSamplesWarning(UserWarning):
    pass


@numba.njit(cache=True, nogil=True)
def _run_policy(policy, theta, arrivals, services):
    n = arrivals.size
    dep_time = np.empty(n)
    dep_arr = np.empty(n)
    dep_k = np.empty(n, dtype=np.int8)
    nd = 0
    busy = False
    c1_arr = 0.0
    c1_start = 0.0
    c1_end = np.inf
    c2 = False
    c2_arr = 0.0
    nsvc = 0
    preemptions = 0
    max_preempt_u = -1.0
    queued = 0
    for k in range(n):
        t = arrivals[k]
        while busy and c1_end <= t:
            dep_time[nd] = c1_end
            dep_arr[nd] = c1_arr
            if c2:
                dep_k[nd] = 1
                c1_arr = c2_arr
                c1_start = c1_end
                c1_end = c1_start + services[nsvc]
                nsvc += 1
                c2 = False
            else:
                dep_k[nd] = 0
                busy = False
            nd += 1
        if not busy:
            busy = True
            c1_arr = t
            c1_start = t
            c1_end = t + services[nsvc]
            nsvc += 1
            continue
        u = t - c1_start
        if policy == 0:
            preempt = u <= theta
        elif policy == 1:
            preempt = not (0.0 < u < theta)
        else:
            preempt = False
        if preempt:
            preemptions += 1
            if u > max_preempt_u:
                max_preempt_u = u
            c1_arr = t
            c1_start = t
            c1_end = t + services[nsvc]
            nsvc += 1
            # a stale waiting message can never lower the age
            c2 = False
        elif policy == 2:
            pass
        elif policy == 3:
            if not c2:
                c2 = True
                c2_arr = t
                queued += 1
        else:
            c2 = True
            c2_arr = t
            queued += 1
    return dep_time[:nd], dep_arr[:nd], dep_k[:nd], preemptions, max_preempt_u, queued


@dataclass
class Trace:
    """Deliveries of one replication over ``[start, end]``.

    ``dep_time`` and ``dep_arr`` are delivery instants and the arrival times
    of the delivered messages; ``dep_k`` the occupancy left behind.
    """

    dep_time: np.ndarray
    dep_arr: np.ndarray
    dep_k: np.ndarray
    start: float
    end: float
    preemptions: int
    max_preempt_u: float
    queued: int

    def latest_arrival(self) -> np.ndarray:
        return np.maximum.accumulate(self.dep_arr)

    def age_at(self, t) -> np.ndarray:
        """Right-continuous age t - A(t); requires t at or after the first delivery."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.dep_time, t, side="right") - 1
        if np.any(idx < 0):
            raise ValueError("age undefined before the first delivery")
        return t - self.latest_arrival()[idx]

    def segments(self):
        """Linear pieces of the age sawtooth clipped to the window.

        Returns ``(duration, age_at_left, age_at_right)`` arrays.
        """
        times = self.dep_time
        latest = self.latest_arrival()
        lo = max(self.start, times[0])
        first = np.searchsorted(times, lo, side="right") - 1
        inside = np.flatnonzero((times > lo) & (times < self.end))
        left = np.concatenate(([lo], times[inside]))
        right = np.concatenate((times[inside], [self.end]))
        anchor = np.concatenate(([latest[first]], latest[inside]))
        return right - left, left - anchor, right - anchor

    def mean_age(self) -> float:
        dur, a0, a1 = self.segments()
        return float(np.sum(0.5 * (a0 + a1) * dur) / np.sum(dur))

    def ccdf(self, nu: Sequence[float]) -> np.ndarray:
        """Fraction of time with age strictly above each ``nu``."""
        dur, a0, a1 = self.segments()
        order = np.argsort(a1)
        a0, a1 = a0[order], a1[order]
        total = float(np.sum(dur))
        out = []
        for v in np.atleast_1d(np.asarray(nu, dtype=float)):
            j = np.searchsorted(a1, v, side="right")
            out.append(np.sum(a1[j:] - np.maximum(a0[j:], v)) / total)
        return np.array(out)

    def window_departures(self) -> np.ndarray:
        return (self.dep_time >= self.start) & (self.dep_time <= self.end)


@dataclass
class SimConfig:
    model: ModelParams
    policy: str = P2THETA
    horizon_events: int = 1_000_000
    warmup_fraction: float = 0.1
    replications: int = 10
    seed: int = 0
    nu_grid: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; pick one of {sorted(POLICIES)}")
        if self.horizon_events < 10_000:
            raise ValueError("horizon_events must be at least 1e4")
        if not 0.0 <= self.warmup_fraction < 0.5:
            raise ValueError("warmup_fraction must lie in [0, 0.5)")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")

    def default_nu_grid(self) -> np.ndarray:
        scale = 1.0 / self.model.lam + self.model.service.mean
        return np.linspace(0.0, 10.0 * scale, 51)

    def streams(self) -> list[np.random.SeedSequence]:
        return np.random.SeedSequence(self.seed).spawn(self.replications)


def draw_inputs(model: ModelParams, n: int, seed_seq: np.random.SeedSequence):
    """Arrival epochs and service draws for one replication."""
    arr_ss, svc_ss = seed_seq.spawn(2)
    arrivals = np.cumsum(np.random.default_rng(arr_ss).exponential(1.0 / model.lam, n))
    services = model.service.sample(np.random.default_rng(svc_ss), n)
    return arrivals, services


def run_trace(
    model: ModelParams,
    policy: str,
    arrivals: np.ndarray,
    services: np.ndarray,
    warmup_fraction: float = 0.0,
) -> Trace:
    theta = model.theta
    out = _run_policy(POLICIES[policy], float(theta), arrivals, services)
    dep_time, dep_arr, dep_k, pre, max_u, queued = out
    if dep_time.size == 0:
        raise RuntimeError("no deliveries within the horizon")
    warm = int(warmup_fraction * arrivals.size)
    start = float(arrivals[warm]) if warm > 0 else float(dep_time[0])
    return Trace(dep_time, dep_arr, dep_k, start, float(arrivals[-1]), pre, max_u, queued)


def replicate(cfg: SimConfig, index: int, seed_seq=None) -> Trace:
    seed_seq = seed_seq if seed_seq is not None else cfg.streams()[index]
    arrivals, services = draw_inputs(cfg.model, cfg.horizon_events, seed_seq)
    return run_trace(cfg.model, cfg.policy, arrivals, services, cfg.warmup_fraction)


@dataclass
class SimResult:
    mean_aoi: float
    mean_aoi_ci_halfwidth: float
    ccdf_samples: list[tuple[float, float]]
    p0_empirical: float
    mean_cycle_empirical: float
    p0_stderr: float = 0.0
    replication_means: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def ccdf_csv(self) -> str:
        lines = ["nu,prob"]
        lines += [f"{nu!r},{prob!r}" for nu, prob in self.ccdf_samples]
        return "\n".join(lines) + "\n"


def _batch_means(trace: Trace, batches: int = 20) -> np.ndarray:
    dur, a0, a1 = trace.segments()
    area = 0.5 * (a0 + a1) * dur
    parts = np.array_split(np.arange(dur.size), batches)
    return np.array([area[p].sum() / dur[p].sum() for p in parts if p.size])


def _halfwidth(values: np.ndarray) -> float:
    if values.size < 2:
        return math.nan
    return float(CI_Z * np.std(values, ddof=1) / math.sqrt(values.size))


def run_replications(cfg: SimConfig, threads: int = 1) -> list[Trace]:
    seeds = cfg.streams()
    if threads <= 1 or cfg.replications == 1:
        return [replicate(cfg, i, seeds[i]) for i in range(cfg.replications)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: replicate(cfg, i, seeds[i]), range(cfg.replications)))


def simulate(cfg: SimConfig, threads: int = 1) -> SimResult:
    """Time-average AoI, empirical tail and embedded-chain statistics."""
    traces = run_replications(cfg, threads)
    nu = np.asarray(cfg.nu_grid if cfg.nu_grid is not None else cfg.default_nu_grid(), float)
    means = np.array([t.mean_age() for t in traces])
    if means.size > 1:
        halfwidth = _halfwidth(means)
    else:
        halfwidth = _halfwidth(_batch_means(traces[0]))
    durations = [t.end - t.start for t in traces]
    ccdf = sum(t.ccdf(nu) * w for t, w in zip(traces, durations)) / sum(durations)
    ccdf = np.minimum.accumulate(ccdf)
    ks, gaps = [], []
    for t in traces:
        mask = t.window_departures()
        ks.append(t.dep_k[mask])
        gaps.append(np.diff(t.dep_time[mask]))
    ks = np.concatenate(ks)
    p0 = float(np.mean(ks == 0))
    return SimResult(
        mean_aoi=float(means.mean()),
        mean_aoi_ci_halfwidth=halfwidth,
        ccdf_samples=[(float(v), float(p)) for v, p in zip(nu, ccdf)],
        p0_empirical=p0,
        mean_cycle_empirical=float(np.concatenate(gaps).mean()),
        p0_stderr=math.sqrt(p0 * (1.0 - p0) / ks.size),
        replication_means=[float(x) for x in means],
    )


@dataclass
class KernelEstimate:
    """Empirical transforms for one (K_prev, K) cell at the requested ``s``."""

    count: int
    cycle_mean: np.ndarray
    cycle_se: np.ndarray
    age_mean: np.ndarray
    age_se: np.ndarray


def departure_records(cfg: SimConfig, threads: int = 1) -> np.ndarray:
    """Rows ``(K_prev, K, cycle length, age at departure)`` for every window departure."""
    if cfg.policy != P2THETA:
        raise ValueError("embedded-chain records are defined for the P2theta policy")
    rows = []
    for t in run_replications(cfg, threads):
        mask = t.window_departures()
        time, arr, k = t.dep_time[mask], t.dep_arr[mask], t.dep_k[mask]
        rows.append(np.column_stack((k[:-1], k[1:], np.diff(time), (time - arr)[1:])))
    return np.concatenate(rows)


def empirical_kernels(
    cfg: SimConfig, s_values: Sequence[float], records: np.ndarray | None = None
) -> dict[tuple[int, int], KernelEstimate]:
    """Sample means of exp(-s cycle) and exp(-s age) per (K_prev, K) cell."""
    if records is None:
        records = departure_records(cfg)
    s = np.asarray(s_values, dtype=float)
    out = {}
    for i in (0, 1):
        for j in (0, 1):
            sel = records[(records[:, 0] == i) & (records[:, 1] == j)]
            n = sel.shape[0]
            if n < MIN_KERNEL_SAMPLES:
                warnings.warn(
                    f"only {n} departures in cell ({i},{j})", InsufficientSamplesWarning, stacklevel=2
                )
            if n == 0:
                nan = np.full(s.size, np.nan)
                out[(i, j)] = KernelEstimate(0, nan, nan, nan, nan)
                continue
            ec = np.exp(-np.outer(sel[:, 2], s))
            ea = np.exp(-np.outer(sel[:, 3], s))
            out[(i, j)] = KernelEstimate(
                count=n,
                cycle_mean=ec.mean(axis=0),
                cycle_se=ec.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(s.size),
                age_mean=ea.mean(axis=0),
                age_se=ea.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(s.size),
            )
    return out


def k_independence_test(records: np.ndarray) -> tuple[float, float]:
    """Chi-square test of independence between consecutive occupancies.

    Returns ``(statistic, p_value)``.
    """
    table = np.zeros((2, 2))
    for i in (0, 1):
        for j in (0, 1):
            table[i, j] = np.sum((records[:, 0] == i) & (records[:, 1] == j))
    if np.any(table.sum(axis=0) == 0) or np.any(table.sum(axis=1) == 0):
        return 0.0, 1.0
    res = stats.chi2_contingency(table, correction=False)
    return float(res.statistic), float(res.pvalue)
