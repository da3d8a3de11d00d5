"""Elim-NS for the non-stationary one-sided full-information bandit.

Arms are numbered ``1..K`` and rounds ``1..T``. Playing arm ``A`` reveals the
rewards of arms ``A..K``. The algorithm is a deterministic state machine
driven by an injected random stream (used only for exploration-phase
insertion); each round runs, in order:

1. :func:`sample_exploration_phases`
2. :func:`choose_action`
3. :func:`record_observations`
4. :func:`elimination_step`
5. :func:`nonstationarity_check`

:func:`advance_round` composes them.

Per-arm rewards are kept as prefix sums over the rounds of the current epoch,
so any window mean is two lookups.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import kernels

REGIME_MINIMUMS = {"switching": (2048.0, 32.0), "dynamic": (8192.0, 128.0)}
FULL_LOG_THETA = 0.25
DEMO_THETA = 0.75


class InvariantViolation(AssertionError):
    """Internal defect: a property guaranteed by construction did not hold."""


@dataclass(frozen=True)
class AlgorithmConfig:
    """Parameters of one Elim-NS instance.

    ``log_term_mode="paper"`` uses ``ln(K T^3)`` as the log term and pins the
    restart factor ``theta`` to 1/4; ``"demo"`` uses ``ln T`` and defaults
    ``theta`` to 3/4. Setting ``regime`` to ``"switching"`` or ``"dynamic"``
    additionally enforces the minimum constants the regret guarantees need.

    ``nonstationary=False`` disables exploration and the restart check,
    leaving the plain stationary elimination algorithm.
    """

    T: int
    K: int
    C1: float = 4.0
    C2: float = 4.0
    theta: Optional[float] = None
    log_term_mode: str = "demo"
    sigma_scan_mode: str = "geometric"
    regime: Optional[str] = None
    nonstationary: bool = True
    check_invariants: bool = True

    def __post_init__(self):
        if self.T < 1 or self.K < 1:
            raise ValueError("T and K must be >= 1")
        if not (self.C1 > 0 and self.C2 > 0):
            raise ValueError("C1 and C2 must be positive")
        if self.log_term_mode not in ("paper", "demo"):
            raise ValueError(f"unknown log_term_mode {self.log_term_mode!r}")
        if self.sigma_scan_mode not in ("exact", "geometric"):
            raise ValueError(f"unknown sigma_scan_mode {self.sigma_scan_mode!r}")
        theta = self.theta
        if theta is None:
            theta = FULL_LOG_THETA if self.log_term_mode == "paper" else DEMO_THETA
            object.__setattr__(self, "theta", theta)
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.log_term_mode == "paper" and theta != FULL_LOG_THETA:
            raise ValueError("log_term_mode='paper' pins theta to 1/4")
        if self.regime is not None:
            if self.regime not in REGIME_MINIMUMS:
                raise ValueError(f"unknown regime {self.regime!r}")
            if self.log_term_mode != "paper":
                raise ValueError("regime constraints need log_term_mode='paper'")
            c1, c2 = REGIME_MINIMUMS[self.regime]
            if self.C1 < c1 or self.C2 < c2:
                raise ValueError(f"{self.regime} regime needs C1 >= {c1:g} and C2 >= {c2:g}")

    @property
    def log_term(self) -> float:
        if self.log_term_mode == "paper":
            return math.log(self.K) + 3.0 * math.log(self.T)
        return math.log(self.T)

    def phase_length(self, d: float) -> int:
        # at least one round, so degenerate log terms (T=1 in demo mode) stay usable
        return max(1, math.ceil(self.C2 * self.log_term / (d * d)))

    def elimination_threshold(self, n: int) -> float:
        return math.sqrt(self.C1 * self.log_term / n)

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "K": self.K,
            "C1": self.C1,
            "C2": self.C2,
            "theta": self.theta,
            "log_term_mode": self.log_term_mode,
            "sigma_scan_mode": self.sigma_scan_mode,
            "regime": self.regime,
            "nonstationary": self.nonstationary,
            "check_invariants": self.check_invariants,
        }


@dataclass(frozen=True)
class EliminationRecord:
    """Snapshot taken when arm ``e`` is eliminated.

    ``v`` holds the window means of arms ``e..K`` (``v[0]`` is arm ``e``).
    """

    g: float
    e: int
    v: tuple

    def mean(self, arm: int) -> float:
        if arm < self.e:
            raise KeyError(f"record for arm {self.e} has no mean for arm {arm}")
        return self.v[arm - self.e]


@dataclass(frozen=True)
class ExplorationPhase:
    i: int
    start: int
    end_exclusive: int

    @property
    def d(self) -> float:
        return 2.0 ** -self.i

    def covers(self, t: int) -> bool:
        return self.start <= t < self.end_exclusive


@dataclass(frozen=True)
class RoundDecision:
    arm: int
    in_exploration: bool
    d_max: Optional[float] = None


@dataclass(frozen=True)
class UpdateEvents:
    eliminations: tuple = ()
    restarted: bool = False
    new_epoch_start: Optional[int] = None


@dataclass
class EpochState:
    """Mutable Elim-NS state.

    ``t`` is the next round to be played. The prefix tables have one row per
    recorded round of the current epoch plus a leading zero row.
    """

    config: AlgorithmConfig
    epoch: int = 1
    epoch_start: int = 1
    a_min: int = 1
    records: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    t: int = 1
    sums: np.ndarray = None
    counts: np.ndarray = None
    rows: int = 0
    phases_sampled_for: int = 0
    last_arm: Optional[int] = None

    def __post_init__(self):
        if self.sums is None:
            self._alloc(64)

    def _alloc(self, cap: int) -> None:
        K = self.config.K
        self.sums = np.zeros((cap + 1, K))
        self.counts = np.zeros((cap + 1, K), dtype=np.int64)
        self.rows = 0

    def _ensure_capacity(self) -> None:
        if self.rows + 1 < self.sums.shape[0]:
            return
        cap = min(2 * (self.sums.shape[0] - 1), max(self.config.T - self.epoch_start + 1, 1))
        cap = max(cap, self.rows + 1)
        sums = np.zeros((cap + 1, self.config.K))
        counts = np.zeros((cap + 1, self.config.K), dtype=np.int64)
        sums[: self.rows + 1] = self.sums[: self.rows + 1]
        counts[: self.rows + 1] = self.counts[: self.rows + 1]
        self.sums, self.counts = sums, counts

    def min_gap(self) -> Optional[float]:
        return min(r.g for r in self.records) if self.records else None

    def to_json(self) -> dict:
        """Checkpoint snapshot; ``state_from_json`` restores it."""
        r = self.rows + 1
        return {
            "config": self.config.to_json(),
            "epoch": self.epoch,
            "epoch_start": self.epoch_start,
            "a_min": self.a_min,
            "t": self.t,
            "phases_sampled_for": self.phases_sampled_for,
            "last_arm": self.last_arm,
            "records": [{"g": rec.g, "e": rec.e, "v": list(rec.v)} for rec in self.records],
            "phases": [
                {"i": p.i, "start": p.start, "end_exclusive": p.end_exclusive} for p in self.phases
            ],
            "prefix": {"sums": self.sums[:r].tolist(), "counts": self.counts[:r].tolist()},
        }


def state_from_json(obj: dict) -> EpochState:
    config = AlgorithmConfig(**obj["config"])
    sums = np.asarray(obj["prefix"]["sums"], dtype=np.float64).reshape(-1, config.K)
    counts = np.asarray(obj["prefix"]["counts"], dtype=np.int64).reshape(-1, config.K)
    state = EpochState(
        config=config,
        epoch=obj["epoch"],
        epoch_start=obj["epoch_start"],
        a_min=obj["a_min"],
        records=[EliminationRecord(r["g"], r["e"], tuple(r["v"])) for r in obj["records"]],
        phases=[ExplorationPhase(p["i"], p["start"], p["end_exclusive"]) for p in obj["phases"]],
        t=obj["t"],
        sums=np.ascontiguousarray(sums),
        counts=np.ascontiguousarray(counts),
        rows=sums.shape[0] - 1,
        phases_sampled_for=obj["phases_sampled_for"],
        last_arm=obj["last_arm"],
    )
    return state


def dumps_state(state: EpochState) -> str:
    return json.dumps(state.to_json(), sort_keys=True)


def new_state(config: AlgorithmConfig) -> EpochState:
    return EpochState(config=config)


def reset_epoch(state: EpochState, new_start: int) -> None:
    """Start a fresh epoch at round ``new_start``: clear records, phases and tables."""
    state.epoch += 1
    state.epoch_start = new_start
    state.a_min = 1
    state.records = []
    state.phases = []
    state._alloc(min(64, max(state.config.T - new_start + 1, 1)))


def max_dyadic_index(min_gap: float) -> int:
    """Largest ``i >= 0`` with ``8 * 2**-i >= min_gap``."""
    if min_gap <= 0:
        raise ValueError("minimum gap must be positive")
    i = max(0, math.floor(math.log2(8.0 / min_gap)))
    # guard the float log against off-by-one at exact powers of two
    while 8.0 * 2.0 ** -(i + 1) >= min_gap:
        i += 1
    while i > 0 and 8.0 * 2.0 ** -i < min_gap:
        i -= 1
    return i


def insertion_probability(epoch: int, T: int, d: float) -> float:
    return min(1.0, d * math.sqrt((epoch + 1) / T))


def sample_exploration_phases(state: EpochState, t: int, rng: np.random.Generator) -> list:
    """Step 1: randomly schedule exploration phases starting at round ``t``.

    Nothing is drawn while no arm has been eliminated.
    """
    cfg = state.config
    if not state.epoch_start <= t <= cfg.T:
        raise ValueError(f"round {t} outside [{state.epoch_start}, {cfg.T}]")
    state.phases_sampled_for = t
    if not cfg.nonstationary or not state.records:
        return []
    top = max_dyadic_index(state.min_gap())
    draws = rng.random(top + 1)
    scale = math.sqrt((state.epoch + 1) / cfg.T)
    added = []
    for i in range(top + 1):
        d = 2.0 ** -i
        if draws[i] < min(1.0, d * scale):
            phase = ExplorationPhase(i, t, t + cfg.phase_length(d))
            state.phases.append(phase)
            added.append(phase)
    return added


def exploration_arm(records: Sequence[EliminationRecord], d: float) -> Optional[int]:
    """Smallest eliminated arm whose record gap is at most ``8 d``."""
    best = None
    for rec in records:
        if rec.g <= 8.0 * d and (best is None or rec.e < best):
            best = rec.e
    return best


def choose_action(state: EpochState, t: int) -> RoundDecision:
    """Step 2: the arm to play at round ``t``."""
    d_max = None
    for p in state.phases:
        if p.start <= t < p.end_exclusive:
            d = p.d
            if d_max is None or d > d_max:
                d_max = d
    if d_max is None:
        return RoundDecision(state.a_min, False, None)
    arm = exploration_arm(state.records, d_max)
    if arm is None:
        raise InvariantViolation(f"round {t}: exploring with d_max={d_max} but no record has g <= 8 d_max")
    if state.config.check_invariants:
        for p in state.phases:
            if p.covers(t):
                need = exploration_arm(state.records, p.d)
                if need is None or arm > need:
                    raise InvariantViolation(
                        f"round {t}: played arm {arm} does not observe arms >= {need} for phase {p}"
                    )
    return RoundDecision(arm, True, d_max)


def record_observations(state: EpochState, t: int, arm: int, rewards) -> None:
    """Append round ``t``'s revealed rewards for arms ``arm..K``.

    ``rewards`` is either a mapping ``arm -> reward`` over exactly those arms
    or a sequence of ``K - arm + 1`` values.
    """
    K = state.config.K
    expected = state.epoch_start + state.rows
    if t != expected:
        raise ValueError(f"round {t} out of order (expected {expected})")
    if not 1 <= arm <= K:
        raise ValueError(f"arm {arm} outside 1..{K}")
    if isinstance(rewards, Mapping):
        keys = set(rewards)
        want = set(range(arm, K + 1))
        if keys != want:
            raise ValueError(f"rewards must cover exactly arms {arm}..{K}, got {sorted(keys)}")
        x = np.array([rewards[a] for a in range(arm, K + 1)], dtype=np.float64)
    else:
        x = np.asarray(rewards, dtype=np.float64)
        if x.shape != (K - arm + 1,):
            raise ValueError(f"expected {K - arm + 1} rewards for arms {arm}..{K}, got shape {x.shape}")
    if x.size and (x.min() < 0.0 or x.max() > 1.0 or np.isnan(x).any()):
        raise ValueError("rewards must lie in [0, 1]")
    state._ensure_capacity()
    r = state.rows
    state.sums[r + 1] = state.sums[r]
    state.counts[r + 1] = state.counts[r]
    state.sums[r + 1, arm - 1:] += x
    state.counts[r + 1, arm - 1:] += 1
    state.rows = r + 1
    state.last_arm = arm


def _row(state: EpochState, t: int) -> int:
    return t - state.epoch_start


def observation_count(state: EpochState, a: int, t1: int, t2: int) -> int:
    lo, hi = _row(state, t1), _row(state, t2)
    return int(state.counts[hi, a - 1] - state.counts[lo, a - 1])


def empirical_mean(state: EpochState, a: int, t1: int, t2: int) -> float:
    """Mean reward of arm ``a`` over rounds ``[t1, t2)`` of the current epoch."""
    if not t1 < t2:
        raise ValueError(f"empty window [{t1}, {t2})")
    if t1 < state.epoch_start or t2 > state.epoch_start + state.rows:
        raise ValueError(
            f"window [{t1}, {t2}) outside recorded rounds "
            f"[{state.epoch_start}, {state.epoch_start + state.rows})"
        )
    if observation_count(state, a, t1, t2) != t2 - t1:
        raise ValueError(f"arm {a} was not observed at every round of [{t1}, {t2})")
    lo, hi = _row(state, t1), _row(state, t2)
    return float((state.sums[hi, a - 1] - state.sums[lo, a - 1]) / (t2 - t1))


def elimination_step(state: EpochState, t: int) -> list:
    """Step 3: eliminate frontier arms while some window shows a large gap.

    Windows end at ``t + 1`` and start at ``sigma >= epoch_start``; in
    geometric mode only ``sigma = t + 1 - 2^j`` and the epoch start are
    scanned. If several windows witness an elimination, the one with the
    largest gap is recorded (ties: the longest window).
    """
    cfg = state.config
    hi = _row(state, t + 1)
    if hi != state.rows:
        raise ValueError(f"observations for round {t} not recorded")
    c1l = cfg.C1 * cfg.log_term
    geometric = cfg.sigma_scan_mode == "geometric"
    created = []
    while state.a_min < cfg.K:
        lo, b, gap = kernels.scan_elimination(state.sums, hi, state.a_min - 1, c1l, geometric)
        if lo < 0:
            break
        n = hi - lo
        means = (state.sums[hi, state.a_min - 1:] - state.sums[lo, state.a_min - 1:]) / n
        rec = EliminationRecord(float(gap), state.a_min, tuple(float(m) for m in means))
        state.records.append(rec)
        created.append(rec)
        state.a_min += 1
    return created


def nonstationarity_check(state: EpochState, t: int) -> UpdateEvents:
    """Step 4: compare phases ending at ``t + 1`` against the stored records.

    Finished phases are dropped from the state. A deviation larger than
    ``theta * d`` on any checked arm starts a new epoch at ``t + 1``.
    """
    cfg = state.config
    if not state.phases:
        return UpdateEvents()
    ending = [p for p in state.phases if p.end_exclusive == t + 1]
    if not ending:
        return UpdateEvents()
    state.phases = [p for p in state.phases if p.end_exclusive != t + 1]
    violated = False
    for p in ending:
        d = p.d
        for rec in state.records:
            if rec.g > 8.0 * d:
                continue
            for a in range(rec.e, cfg.K + 1):
                if cfg.check_invariants and observation_count(state, a, p.start, t + 1) != t + 1 - p.start:
                    raise InvariantViolation(
                        f"arm {a} not observed throughout phase [{p.start}, {t + 1})"
                    )
                mu = empirical_mean(state, a, p.start, t + 1)
                if abs(mu - rec.mean(a)) > cfg.theta * d:
                    violated = True
                    break
            if violated:
                break
        if violated:
            break
    if not violated:
        return UpdateEvents()
    reset_epoch(state, t + 1)
    return UpdateEvents(restarted=True, new_epoch_start=t + 1)


def advance_round(
    state: EpochState,
    rng: np.random.Generator,
    feedback: Callable[[int, int], object],
) -> tuple:
    """Play one full round at ``state.t``.

    ``feedback(t, arm)`` must return the rewards of arms ``arm..K`` for round
    ``t`` (a sequence or a mapping, as accepted by
    :func:`record_observations`). Returns ``(RoundDecision, UpdateEvents)``.
    """
    t = state.t
    if t > state.config.T:
        raise ValueError("horizon exhausted")
    sample_exploration_phases(state, t, rng)
    decision = choose_action(state, t)
    record_observations(state, t, decision.arm, feedback(t, decision.arm))
    created = elimination_step(state, t)
    events = nonstationarity_check(state, t) if state.config.nonstationary else UpdateEvents()
    if created:
        events = UpdateEvents(tuple(created), events.restarted, events.new_epoch_start)
    state.t = t + 1
    return decision, events
