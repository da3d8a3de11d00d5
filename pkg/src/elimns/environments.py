"""Oblivious environment schedules with known ground truth.

A schedule is a table of segments ``(start, end_exclusive, payload)`` that
partitions rounds ``1..T``. Auction schedules carry a
:class:`~elimns.auction.FiniteValueDistribution` per segment plus a price
grid; bandit schedules carry a mean vector per segment and a reward law.
Everything random about a schedule (e.g. lower-bound signs) is fixed at
construction from an explicit generator, before any algorithm runs.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import auction
from .auction import FiniteValueDistribution, PriceGrid


@dataclass(frozen=True)
class Segment:
    start: int
    end_exclusive: int
    payload: object

    @property
    def length(self) -> int:
        return self.end_exclusive - self.start


@dataclass(frozen=True)
class BanditMeans:
    """Payload of a bandit segment: one mean per arm."""

    means: tuple

    def __post_init__(self):
        m = tuple(float(x) for x in self.means)
        if not m:
            raise ValueError("mean vector must be non-empty")
        if any(not 0.0 <= x <= 1.0 for x in m):
            raise ValueError("bandit means must lie in [0, 1]")
        object.__setattr__(self, "means", m)


def _check_segments(segments: Sequence[Segment], T: int) -> None:
    if not segments:
        raise ValueError("schedule needs at least one segment")
    expect = 1
    for s in segments:
        if s.start != expect or s.end_exclusive <= s.start:
            raise ValueError("segments must partition [1, T] in order")
        expect = s.end_exclusive
    if expect != T + 1:
        raise ValueError(f"segments cover [1, {expect - 1}], expected [1, {T}]")


@dataclass(frozen=True)
class EnvironmentSchedule:
    """Piecewise-constant auction or bandit schedule over ``T`` rounds."""

    T: int
    segments: tuple
    kind: str  # "auction" | "bandit"
    grid: Optional[PriceGrid] = None
    reward_law: str = "bernoulli"
    metadata: dict = field(default_factory=dict)
    _starts: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        _check_segments(segs, self.T)
        if self.kind == "auction":
            if self.grid is None:
                raise ValueError("auction schedules need a price grid")
            if not all(isinstance(s.payload, FiniteValueDistribution) for s in segs):
                raise ValueError("auction segments must hold value distributions")
        elif self.kind == "bandit":
            if not all(isinstance(s.payload, BanditMeans) for s in segs):
                raise ValueError("bandit segments must hold mean vectors")
            k = {len(s.payload.means) for s in segs}
            if len(k) != 1:
                raise ValueError("all bandit segments must have the same arm count")
            if self.reward_law not in ("bernoulli", "deterministic", "auction"):
                raise ValueError(f"unknown reward law {self.reward_law!r}")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "_starts", [s.start for s in segs])

    @property
    def K(self) -> int:
        if self.kind == "auction":
            return self.grid.K
        return len(self.segments[0].payload.means)

    def segment_at(self, t: int) -> Segment:
        if not 1 <= t <= self.T:
            raise ValueError(f"round {t} outside [1, {self.T}]")
        return self.segments[bisect.bisect_right(self._starts, t) - 1]

    def payload_at(self, t: int):
        return self.segment_at(t).payload

    def change_points(self) -> list:
        """Rounds where the payload differs from the previous round's."""
        return [b.start for a, b in zip(self.segments, self.segments[1:]) if a.payload != b.payload]

    def segment_means(self) -> list:
        """Exact per-segment arm means."""
        if self.kind == "bandit":
            return [list(s.payload.means) for s in self.segments]
        cache: dict = {}
        out = []
        for s in self.segments:
            key = id(s.payload)
            if key not in cache:
                cache[key] = [float(x) for x in auction.mean_vector(s.payload, self.grid)]
            out.append(cache[key])
        return out

    def mean_matrix(self) -> np.ndarray:
        """(T, K) array of exact per-round means."""
        out = np.empty((self.T, self.K))
        for s, m in zip(self.segments, self.segment_means()):
            out[s.start - 1 : s.end_exclusive - 1] = m
        return out

    def best_arms(self) -> list:
        """Per-segment ``(start, end_exclusive, best arm)``; lowest index on ties."""
        out = []
        for s, m in zip(self.segments, self.segment_means()):
            out.append((s.start, s.end_exclusive, int(np.argmax(m)) + 1))
        return out

    def to_json(self) -> dict:
        from . import analysis

        segs = []
        for s in self.segments:
            item = {"start": s.start, "end_exclusive": s.end_exclusive}
            if self.kind == "auction":
                item["distribution"] = s.payload.to_json()
            else:
                item["means"] = list(s.payload.means)
            segs.append(item)
        out = {
            "kind": self.kind,
            "T": self.T,
            "segments": segs,
            "metadata": self.metadata,
            "S": analysis.count_switchings(self),
            "best_arms": self.best_arms(),
        }
        if self.kind == "auction":
            out["grid"] = [float(p) for p in self.grid.prices]
            out["V_bar"] = analysis.variation_auction(self)
        else:
            out["reward_law"] = self.reward_law
            out["V"] = analysis.variation_bandit(self.segment_means())
        return out


def _segments_from_lengths(lengths: Sequence[int], payloads: Sequence) -> tuple:
    segs = []
    start = 1
    for n, p in zip(lengths, payloads):
        if n < 1:
            raise ValueError("segment lengths must be positive")
        segs.append(Segment(start, start + n, p))
        start += n
    return tuple(segs)


def build_switching(
    segments: Sequence[tuple],
    grid: Optional[PriceGrid] = None,
    T: Optional[int] = None,
) -> EnvironmentSchedule:
    """Piecewise-constant auction schedule from ``[(length, distribution), ...]``.

    If ``grid`` is omitted the bound-optimal grid for the total horizon is used.
    """
    lengths = [n for n, _ in segments]
    total = sum(lengths)
    if T is not None and total != T:
        raise ValueError(f"segment lengths sum to {total}, expected T={T}")
    grid = grid or auction.discretize_prices(total)
    sched = EnvironmentSchedule(total, _segments_from_lengths(lengths, [d for _, d in segments]), "auction", grid)
    from . import analysis

    sched.metadata.update({"generator": "switching", "S": analysis.count_switchings(sched)})
    return sched


def build_bandit(
    segments: Sequence[tuple],
    reward_law: str = "bernoulli",
    T: Optional[int] = None,
) -> EnvironmentSchedule:
    """Piecewise-constant bandit schedule from ``[(length, means), ...]``."""
    lengths = [n for n, _ in segments]
    total = sum(lengths)
    if T is not None and total != T:
        raise ValueError(f"segment lengths sum to {total}, expected T={T}")
    payloads = [BanditMeans(tuple(m)) for _, m in segments]
    sched = EnvironmentSchedule(total, _segments_from_lengths(lengths, payloads), "bandit", reward_law=reward_law)
    from . import analysis

    sched.metadata.update({"generator": "direct_bandit", "S": analysis.count_switchings(sched)})
    return sched


def build_drifting(
    D_start: FiniteValueDistribution,
    D_end: FiniteValueDistribution,
    T: int,
    variation_budget: float,
    grid: Optional[PriceGrid] = None,
) -> EnvironmentSchedule:
    """Linear mixture drift from ``D_start`` toward ``D_end``.

    ``D_t = (1 - w_t) D_start + w_t D_end`` with ``w_t`` rising linearly from
    0 at round 1 to 1 at round T, clamped once the accumulated total variation
    reaches ``variation_budget``. Consecutive rounds with equal weight share
    one segment.
    """
    from . import analysis

    if variation_budget < 0:
        raise ValueError("variation budget must be non-negative")
    if set(D_start.pmf()) != set(D_end.pmf()):
        raise ValueError("drift endpoints must share the same atom support")
    tv = analysis.tv_distance(D_start, D_end)
    w_cap = 1.0 if tv == 0 else min(1.0, variation_budget / tv)
    grid = grid or auction.discretize_prices(T)
    weights = []
    for t in range(1, T + 1):
        w = 0.0 if T == 1 else (t - 1) / (T - 1)
        weights.append(min(w, w_cap))
    segs = []
    start = 1
    for t in range(2, T + 2):
        if t == T + 1 or weights[t - 1] != weights[start - 1]:
            segs.append(Segment(start, t, auction.mixture(D_start, D_end, weights[start - 1])))
            start = t
    sched = EnvironmentSchedule(T, tuple(segs), "auction", grid)
    sched.metadata.update(
        {
            "generator": "drifting",
            "variation_budget": variation_budget,
            "tv_endpoints": float(tv),
            "final_weight": weights[-1],
            "V_bar": analysis.variation_auction(sched),
        }
    )
    return sched


def _lower_bound_grid(grid: Optional[PriceGrid]) -> PriceGrid:
    return grid or PriceGrid((0.5, 0.75))


def build_lower_bound_switching(
    S: int,
    T: int,
    c_eps: float = 0.25,
    rng: Optional[np.random.Generator] = None,
    grid: Optional[PriceGrid] = None,
) -> EnvironmentSchedule:
    """``S`` equal segments of two i.i.d. bidders on values {1/2, 3/4}.

    Each segment uses ``eps = c_eps / sqrt(T')`` with ``T' = floor(T / S)``
    (the last segment absorbs the remainder) and an i.i.d. random sign: ``+``
    favours reserve 1/2, ``-`` favours 3/4. Signs are drawn from ``rng``,
    not chosen adaptively.
    """
    if S < 1 or S > T:
        raise ValueError("need 1 <= S <= T")
    if c_eps <= 0:
        raise ValueError("c_eps must be positive")
    rng = rng if rng is not None else np.random.default_rng(0)
    seg_len = T // S
    eps = c_eps / math.sqrt(seg_len)
    if eps >= 0.5:
        raise ValueError(f"eps={eps:.4g} too large for the two-point instance")
    signs = [int(x) for x in rng.choice([1, -1], size=S)]
    lengths = [seg_len] * (S - 1) + [T - seg_len * (S - 1)]
    dists = {s: auction.hard_pair(eps, s) for s in (1, -1)}
    grid = _lower_bound_grid(grid)
    sched = EnvironmentSchedule(T, _segments_from_lengths(lengths, [dists[s] for s in signs]), "auction", grid)
    from . import analysis

    sched.metadata.update(
        {
            "generator": "lower_bound_switching",
            "segment_length": seg_len,
            "eps": eps,
            "c_eps": c_eps,
            "signs": signs,
            "sign_policy": "iid uniform per segment (oblivious)",
            "segment_best": [auction.best_reserve(dists[s], grid)[0] for s in signs],
            "S": analysis.count_switchings(sched),
        }
    )
    return sched


def build_lower_bound_dynamic(
    variation_budget: float,
    T: int,
    c_eps: float = 0.25,
    rng: Optional[np.random.Generator] = None,
    grid: Optional[PriceGrid] = None,
) -> EnvironmentSchedule:
    """Segments of length ``ceil((T / V)^(2/3))`` with ``eps = c_eps (V / T)^(1/3)``."""
    if variation_budget <= 0:
        raise ValueError("variation budget must be positive")
    if variation_budget < 1:
        warnings.warn("lower-bound construction assumes a variation budget >= 1", stacklevel=2)
    rng = rng if rng is not None else np.random.default_rng(0)
    delta = min(T, math.ceil((T / variation_budget) ** (2.0 / 3.0)))
    count = math.ceil(T / delta)
    eps = c_eps * (variation_budget / T) ** (1.0 / 3.0)
    if eps >= 0.5:
        raise ValueError(f"eps={eps:.4g} too large for the two-point instance")
    signs = [int(x) for x in rng.choice([1, -1], size=count)]
    lengths = [delta] * (count - 1) + [T - delta * (count - 1)]
    dists = {s: auction.hard_pair(eps, s) for s in (1, -1)}
    grid = _lower_bound_grid(grid)
    sched = EnvironmentSchedule(T, _segments_from_lengths(lengths, [dists[s] for s in signs]), "auction", grid)
    from . import analysis

    sched.metadata.update(
        {
            "generator": "lower_bound_dynamic",
            "segment_length": delta,
            "segments": count,
            "eps": eps,
            "c_eps": c_eps,
            "signs": signs,
            "sign_policy": "iid uniform per segment (oblivious)",
            "V_bar": analysis.variation_auction(sched),
        }
    )
    return sched


def sample_round(schedule: EnvironmentSchedule, t: int, rng: np.random.Generator):
    """Round-``t`` draw: a value vector (auction) or a full reward vector (bandit)."""
    payload = schedule.payload_at(t)
    if schedule.kind == "auction":
        return payload.sample(rng)
    if schedule.reward_law == "auction":
        raise ValueError("auction-derived mean schedules are sampled through their BanditView")
    mu = np.asarray(payload.means)
    if schedule.reward_law == "deterministic":
        return mu.copy()
    return (rng.random(mu.shape[0]) < mu).astype(np.float64)


@dataclass(frozen=True)
class BanditView:
    """Bandit reduction of an auction schedule.

    ``schedule`` is the bandit mean schedule (exact revenues per grid reserve);
    :meth:`draw` samples the round's value vector and :meth:`reveal` serves
    the censored suffix for the played arm.
    """

    source: EnvironmentSchedule
    schedule: EnvironmentSchedule

    def draw(self, t: int, rng: np.random.Generator) -> tuple:
        return sample_round(self.source, t, rng)

    def full_rewards(self, values: Sequence) -> np.ndarray:
        return auction.reward_vector(values, self.source.grid)

    def reveal(self, values: Sequence, arm: int) -> np.ndarray:
        return auction.observed_suffix(values, self.source.grid, arm)


def bandit_view(schedule: EnvironmentSchedule) -> BanditView:
    if schedule.kind != "auction":
        raise ValueError("bandit_view needs an auction schedule")
    means = schedule.segment_means()
    segs = tuple(Segment(s.start, s.end_exclusive, BanditMeans(tuple(m))) for s, m in zip(schedule.segments, means))
    mean_sched = EnvironmentSchedule(schedule.T, segs, "bandit", reward_law="auction")
    return BanditView(schedule, mean_sched)
