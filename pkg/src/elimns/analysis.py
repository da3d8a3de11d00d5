"""Ground-truth metrics: regret, switch counts, variation, interval partition,
and the concentration diagnostic over realized rewards.

All regret here is pseudo-regret against exact means, never realized rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .auction import FiniteValueDistribution

NICE_EXACT_LIMIT = 2000


@dataclass
class RunTrace:
    """Per-round log of one run plus the ground-truth mean matrix.

    ``realized`` (optional) is the full drawn reward matrix, kept only when
    diagnostics ask for it.
    """

    arms: np.ndarray
    exploring: np.ndarray
    d_max: np.ndarray  # NaN when not exploring
    epoch: np.ndarray
    restarted: np.ndarray
    means: np.ndarray
    eliminations: list = field(default_factory=list)  # (t, g, e)
    realized: Optional[np.ndarray] = None

    def __post_init__(self):
        T = len(self.arms)
        if self.means is None:
            raise ValueError("trace needs ground-truth means")
        if self.means.shape[0] != T:
            raise ValueError(f"means cover {self.means.shape[0]} rounds, trace has {T}")
        K = self.means.shape[1]
        if T and (self.arms.min() < 1 or self.arms.max() > K):
            raise ValueError("played arm outside 1..K")

    @property
    def T(self) -> int:
        return len(self.arms)


@dataclass(frozen=True)
class PartitionResult:
    intervals: list  # [(s, e)] inclusive, 1-based
    variations: list

    @property
    def count(self) -> int:
        return len(self.intervals)


def _per_round_payloads(schedule_or_seq):
    if hasattr(schedule_or_seq, "segments"):
        return [s.payload for s in schedule_or_seq.segments]
    return list(schedule_or_seq)


def count_switchings(schedule_or_seq) -> int:
    """``1 + #{t : D_t != D_{t-1}}`` for a schedule or a per-round sequence."""
    items = _per_round_payloads(schedule_or_seq)
    if not items:
        return 0
    return 1 + sum(1 for a, b in zip(items, items[1:]) if a != b)


def tv_distance(D1: FiniteValueDistribution, D2: FiniteValueDistribution):
    """Half the L1 distance between the two probability mass functions."""
    p, q = D1.pmf(), D2.pmf()
    return sum(abs(p.get(x, 0) - q.get(x, 0)) for x in set(p) | set(q)) / 2


def variation_auction(schedule_or_seq):
    """Sum of total-variation distances between consecutive rounds."""
    items = _per_round_payloads(schedule_or_seq)
    return sum(tv_distance(a, b) for a, b in zip(items, items[1:]) if a is not b)


def round_changes(means) -> np.ndarray:
    """``max_a |mu_{a,t} - mu_{a,t-1}|`` for ``t = 2..T``."""
    m = np.asarray(means, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("means must be a (T, K) array")
    if m.shape[0] < 2:
        return np.zeros(0)
    return np.abs(np.diff(m, axis=0)).max(axis=1)


def variation_bandit(means) -> float:
    """Summed per-round maximal mean change.

    Rows may also be consecutive segment means: changes inside a segment are
    zero, so only the boundaries contribute.
    """
    return float(sum(round_changes(means).tolist()))


def interval_partition(means, C3: float = 0.5) -> PartitionResult:
    """Greedy left-to-right partition of ``[1, T]``.

    Interval ``[s, t]`` is closed when its variation is within
    ``sqrt(C3 / (t - s + 1))`` but extending it by one round would exceed
    ``sqrt(C3 / (t - s + 2))``.
    """
    if not 0 < C3 <= 0.5:
        raise ValueError("C3 must lie in (0, 1/2]")
    m = np.asarray(means, dtype=np.float64)
    T = m.shape[0]
    if T < 1:
        raise ValueError("need at least one round")
    delta = [0.0, 0.0] + round_changes(m).tolist()  # delta[u] for round u, 1-based
    intervals, variations = [], []
    s = 1
    v_cur = 0.0
    for t in range(1, T + 1):
        if t < T:
            v_next = v_cur + delta[t + 1]
            if v_cur <= math.sqrt(C3 / (t - s + 1)) and v_next > math.sqrt(C3 / (t - s + 2)):
                intervals.append((s, t))
                variations.append(v_cur)
                s = t + 1
                v_cur = 0.0
            else:
                v_cur = v_next
    if s <= T:
        intervals.append((s, T))
        variations.append(v_cur)
    return PartitionResult(intervals, variations)


def partition_bound(T: int, V: float, C3: float) -> float:
    return (2.0 * T / C3) ** (1.0 / 3.0) * V ** (2.0 / 3.0) + 1.0


def pseudo_regret(trace: RunTrace) -> tuple:
    """Per-round ``mu*_t - mu_{A_t,t}`` and its running sum."""
    m = trace.means
    idx = np.arange(trace.T)
    inst = m.max(axis=1) - m[idx, trace.arms - 1]
    return inst, np.cumsum(inst)


def nice_radius(K: int, T: int, n) -> float:
    return np.sqrt((math.log(K) + 3.0 * math.log(T)) / (2.0 * np.asarray(n, dtype=np.float64)))


def dyadic_intervals(T: int) -> list:
    """Windows of length ``2^j`` starting at multiples of ``max(1, 2^(j-1))``."""
    out = []
    j = 0
    while 2**j <= T:
        n = 2**j
        stride = max(1, n // 2)
        for lo in range(0, T - n + 1, stride):
            out.append((lo, lo + n))
        j += 1
    return out


def sampling_nice_check(realized, means, exact: Optional[bool] = None) -> list:
    """Intervals where an arm's empirical mean strays from its true average.

    Returns ``(arm, start, end)`` triples (1-based arm, inclusive rounds) for
    which ``|mean(X - mu)| >= sqrt(ln(K T^3) / (2 |I|))``. All intervals are
    scanned when ``T <= 2000`` (or ``exact=True``); otherwise a dyadic family.
    """
    x = np.asarray(realized, dtype=np.float64)
    m = np.asarray(means, dtype=np.float64)
    if x.shape != m.shape:
        raise ValueError("realized and mean matrices differ in shape")
    T, K = x.shape
    log_term = math.log(K) + 3.0 * math.log(T)
    prefix = np.zeros((T + 1, K))
    np.cumsum(x - m, axis=0, out=prefix[1:])
    if exact is None:
        exact = T <= NICE_EXACT_LIMIT
    if exact:
        hits = kernels.full_interval_scan(np.ascontiguousarray(prefix), log_term)
    else:
        hits = []
        for lo, hi in dyadic_intervals(T):
            n = hi - lo
            dev = np.abs(prefix[hi] - prefix[lo]) / n
            for a in np.flatnonzero(dev >= math.sqrt(log_term / (2.0 * n))).tolist():
                hits.append((a, lo, hi))
        hits.sort()
    return [(a + 1, lo + 1, hi) for a, lo, hi in hits]
