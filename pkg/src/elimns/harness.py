"""Experiment runner: config parsing, seeded runs, batches, scaling studies.

Random streams are derived from ``(base_seed, replication, purpose)`` through
:class:`numpy.random.SeedSequence` feeding the counter-based Philox
generator. The environment stream (schedule construction and reward draws)
never depends on the algorithm, so changing algorithm randomness leaves the
realized environment untouched.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analysis, auction, bandit_core, environments
from .auction import FiniteValueDistribution

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STREAM_TAGS = {"env": 0, "algo": 1}
ALGORITHMS = ("elim_ns", "baseline_no_restart", "baseline_oracle_restart", "baseline_fixed_best")
ENVIRONMENTS = ("switching", "drifting", "lower_bound_switching", "lower_bound_dynamic", "direct_bandit")
TRACE_COLUMNS = (
    "t", "arm", "exploring", "d_max", "epoch", "restarted", "inst_regret", "cum_regret", "config_digest",
)


class ConfigError(ValueError):
    pass


class OutputConflict(RuntimeError):
    """Refusing to overwrite outputs written under a different config."""


def make_rng(base_seed: int, replication: int, purpose: str) -> np.random.Generator:
    ss = np.random.SeedSequence([int(base_seed), int(replication), STREAM_TAGS[purpose]])
    return np.random.Generator(np.random.Philox(ss))


def _reject_unknown(obj: dict, allowed, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


_ENV_KEYS = {
    "direct_bandit": {"type", "segments", "reward_law"},
    "switching": {"type", "segments"},
    "drifting": {"type", "start", "end", "variation_budget"},
    "lower_bound_switching": {"type", "S", "c_eps"},
    "lower_bound_dynamic": {"type", "variation_budget", "c_eps"},
}
_ALGO_KEYS = {"type", "T", "K", "C1", "C2", "theta", "log_term_mode", "sigma_scan_mode", "regime"}


@dataclass
class ExperimentConfig:
    T: int
    environment: dict
    algorithm: dict
    grid: Optional[dict] = None
    seeds: object = field(default_factory=lambda: [0])
    output: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _reject_unknown(
            raw,
            {"schema_version", "T", "environment", "algorithm", "grid", "seeds", "output", "diagnostics"},
            "config",
        )
        if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {raw['schema_version']!r}")
        if "T" not in raw or not isinstance(raw["T"], int) or raw["T"] < 1:
            raise ConfigError("config needs an integer T >= 1")
        cfg = cls(
            T=raw["T"],
            environment=copy.deepcopy(raw.get("environment")),
            algorithm=copy.deepcopy(raw.get("algorithm")),
            grid=copy.deepcopy(raw.get("grid")),
            seeds=copy.deepcopy(raw.get("seeds", [0])),
            output=copy.deepcopy(raw.get("output", {})),
            diagnostics=copy.deepcopy(raw.get("diagnostics", {})),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def validate(self) -> None:
        env = self.environment
        if not isinstance(env, dict) or env.get("type") not in ENVIRONMENTS:
            raise ConfigError(f"environment.type must be one of {ENVIRONMENTS}")
        _reject_unknown(env, _ENV_KEYS[env["type"]], "environment")
        algo = self.algorithm
        if not isinstance(algo, dict) or algo.get("type") not in ALGORITHMS:
            raise ConfigError(f"algorithm.type must be one of {ALGORITHMS}")
        _reject_unknown(algo, _ALGO_KEYS, "algorithm")
        if "T" in algo and algo["T"] != self.T:
            raise ConfigError(f"algorithm T={algo['T']} does not match experiment T={self.T}")
        if self.grid is not None:
            _reject_unknown(self.grid, {"size", "prices"}, "grid")
            if len(self.grid) != 1:
                raise ConfigError("grid override takes exactly one of 'size' or 'prices'")
            if env["type"] == "direct_bandit":
                raise ConfigError("grid override only applies to auction environments")
        if isinstance(self.seeds, dict):
            _reject_unknown(self.seeds, {"base_seed", "replications"}, "seeds")
            if self.seeds.get("replications", 1) < 1:
                raise ConfigError("need at least one replication")
        elif not (isinstance(self.seeds, list) and self.seeds and all(isinstance(s, int) for s in self.seeds)):
            raise ConfigError("seeds must be a non-empty list of ints or {base_seed, replications}")
        _reject_unknown(self.output, {"dir"}, "output")
        _reject_unknown(self.diagnostics, {"sampling_nice", "partition_c3", "check_invariants"}, "diagnostics")
        c3 = self.diagnostics.get("partition_c3")
        if c3 is not None and not 0 < c3 <= 0.5:
            raise ConfigError("partition_c3 must lie in (0, 1/2]")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "T": self.T,
            "environment": self.environment,
            "algorithm": self.algorithm,
            "grid": self.grid,
            "seeds": self.seeds,
            "output": self.output,
            "diagnostics": self.diagnostics,
        }

    def digest(self) -> str:
        """Hash of everything that determines a run except seeds and output paths."""
        d = self.to_dict()
        d.pop("seeds")
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def seed_keys(self) -> list:
        if isinstance(self.seeds, dict):
            base = self.seeds.get("base_seed", 0)
            return [(base, i) for i in range(self.seeds.get("replications", 1))]
        return [(s, 0) for s in self.seeds]

    def with_T(self, T: int) -> "ExperimentConfig":
        raw = self.to_dict()
        raw["T"] = T
        raw["algorithm"] = dict(raw["algorithm"])
        raw["algorithm"].pop("T", None)
        return ExperimentConfig.from_dict(raw)


def _lengths(items: list, T: int) -> list:
    has_len = ["length" in it for it in items]
    if all(has_len):
        lengths = [int(it["length"]) for it in items]
        if sum(lengths) != T:
            raise ConfigError(f"segment lengths sum to {sum(lengths)}, expected T={T}")
        return lengths
    if any(has_len) or not all("weight" in it for it in items):
        raise ConfigError("segments take either all 'length' or all 'weight'")
    w = [float(it["weight"]) for it in items]
    total = sum(w)
    lengths = [int(math.floor(T * x / total)) for x in w]
    lengths[-1] += T - sum(lengths)
    if min(lengths) < 1:
        raise ConfigError("T too small for the segment weights")
    return lengths


def _grid(config: ExperimentConfig) -> Optional[auction.PriceGrid]:
    g = config.grid
    if g is None:
        return None
    if "size" in g:
        return auction.uniform_grid(int(g["size"]))
    return auction.PriceGrid(tuple(g["prices"]))


def build_schedule(config: ExperimentConfig, rng: np.random.Generator) -> environments.EnvironmentSchedule:
    env = config.environment
    T = config.T
    kind = env["type"]
    grid = _grid(config) or auction.discretize_prices(T)
    if kind == "direct_bandit":
        segs = env["segments"]
        for s in segs:
            _reject_unknown(s, {"length", "weight", "means"}, "bandit segment")
        lengths = _lengths(segs, T)
        return environments.build_bandit(
            [(n, s["means"]) for n, s in zip(lengths, segs)], env.get("reward_law", "bernoulli"), T=T
        )
    if kind == "switching":
        segs = env["segments"]
        for s in segs:
            _reject_unknown(s, {"length", "weight", "distribution"}, "auction segment")
        lengths = _lengths(segs, T)
        dists = [FiniteValueDistribution.from_json(s["distribution"]) for s in segs]
        return environments.build_switching(list(zip(lengths, dists)), grid=grid, T=T)
    if kind == "drifting":
        return environments.build_drifting(
            FiniteValueDistribution.from_json(env["start"]),
            FiniteValueDistribution.from_json(env["end"]),
            T,
            float(env["variation_budget"]),
            grid=grid,
        )
    if kind == "lower_bound_switching":
        return environments.build_lower_bound_switching(
            int(env["S"]), T, float(env.get("c_eps", 0.25)), rng=rng, grid=grid
        )
    return environments.build_lower_bound_dynamic(
        float(env["variation_budget"]), T, float(env.get("c_eps", 0.25)), rng=rng, grid=grid
    )


def algorithm_config(config: ExperimentConfig, K: int) -> bandit_core.AlgorithmConfig:
    a = config.algorithm
    if "K" in a and a["K"] != K:
        raise ConfigError(f"algorithm K={a['K']} does not match environment K={K}")
    kw = {k: a[k] for k in ("C1", "C2", "theta", "log_term_mode", "sigma_scan_mode", "regime") if k in a}
    return bandit_core.AlgorithmConfig(
        T=config.T,
        K=K,
        nonstationary=a["type"] == "elim_ns",
        check_invariants=bool(config.diagnostics.get("check_invariants", True)),
        **kw,
    )


class _Feedback:
    """Pre-drawn environment randomness for one run, served per round."""

    def __init__(self, schedule, rng):
        self.schedule = schedule
        self.T = schedule.T
        if schedule.kind == "bandit":
            K = schedule.K
            self.rewards = np.empty((self.T, K))
            for seg in schedule.segments:
                mu = np.asarray(seg.payload.means)
                rows = slice(seg.start - 1, seg.end_exclusive - 1)
                if schedule.reward_law == "deterministic":
                    self.rewards[rows] = mu
                else:
                    self.rewards[rows] = (rng.random((seg.length, K)) < mu).astype(np.float64)
            self.values = None
        else:
            self.view = environments.bandit_view(schedule)
            self.values = [None] * self.T
            for seg in schedule.segments:
                d = seg.payload
                idx = np.searchsorted(d._cum, rng.random(seg.length) * d._cum[-1], side="right")
                idx = np.minimum(idx, len(d.atoms) - 1)
                for j, i in enumerate(idx.tolist()):
                    self.values[seg.start - 1 + j] = tuple(d._values[i].tolist())
            self.rewards = None

    def __call__(self, t: int, arm: int):
        if self.rewards is not None:
            return self.rewards[t - 1, arm - 1:]
        return self.view.reveal(self.values[t - 1], arm)

    def full_matrix(self) -> np.ndarray:
        if self.rewards is not None:
            return self.rewards
        return np.array([self.view.full_rewards(v) for v in self.values])


@dataclass
class RunResult:
    seed: int
    replication: int
    final_regret: float
    restart_rounds: list
    eliminations: list
    wall_time: float
    config_digest: str
    summary: dict


def run_one(config: ExperimentConfig, seed: int, replication: int = 0) -> tuple:
    """Execute one seeded run; returns ``(RunResult, RunTrace)``."""
    started = time.perf_counter()
    env_rng = make_rng(seed, replication, "env")
    sched_rng, draw_rng = env_rng.spawn(2)
    schedule = build_schedule(config, sched_rng)
    T, K = schedule.T, schedule.K
    feedback = _Feedback(schedule, draw_rng)
    means = schedule.mean_matrix()
    algo_type = config.algorithm["type"]

    arms = np.zeros(T, dtype=np.int64)
    exploring = np.zeros(T, dtype=bool)
    d_max = np.full(T, np.nan)
    epoch = np.ones(T, dtype=np.int64)
    restarted = np.zeros(T, dtype=bool)
    restart_rounds, elim_log = [], []
    acfg = None

    if algo_type == "baseline_fixed_best":
        arms[:] = int(np.argmax(means[0])) + 1
    else:
        acfg = algorithm_config(config, K)
        state = bandit_core.new_state(acfg)
        algo_rng = make_rng(seed, replication, "algo")
        changes = set(schedule.change_points()) if algo_type == "baseline_oracle_restart" else set()
        for t in range(1, T + 1):
            if t in changes:
                bandit_core.reset_epoch(state, t)
                restarted[t - 2] = True
                restart_rounds.append(t)
            decision, events = bandit_core.advance_round(state, algo_rng, feedback)
            i = t - 1
            arms[i] = decision.arm
            exploring[i] = decision.in_exploration
            if decision.d_max is not None:
                d_max[i] = decision.d_max
            epoch[i] = state.epoch if not events.restarted else state.epoch - 1
            for rec in events.eliminations:
                elim_log.append({"t": t, "e": rec.e, "g": rec.g})
            if events.restarted:
                restarted[i] = True
                restart_rounds.append(events.new_epoch_start)

    trace = analysis.RunTrace(arms, exploring, d_max, epoch, restarted, means, elim_log)
    if config.diagnostics.get("sampling_nice"):
        trace.realized = feedback.full_matrix()
    inst, cum = analysis.pseudo_regret(trace)
    final = float(cum[-1])
    digest = config.digest()

    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": digest,
        "seed": seed,
        "replication": replication,
        "algorithm": algo_type,
        "environment": config.environment["type"],
        "T": T,
        "K": K,
        "final_regret": final,
        "restarts": len(restart_rounds),
        "restart_rounds": restart_rounds,
        "eliminations": elim_log,
        "exploration_rounds": int(exploring.sum()),
        "S": analysis.count_switchings(schedule),
        "V": analysis.variation_bandit(schedule.segment_means()),
        "mode": acfg.log_term_mode if acfg else None,
        "constants": (
            {"C1": acfg.C1, "C2": acfg.C2, "theta": acfg.theta, "log_term": acfg.log_term,
             "sigma_scan_mode": acfg.sigma_scan_mode}
            if acfg
            else None
        ),
    }
    if schedule.kind == "auction":
        summary["V_bar"] = float(analysis.variation_auction(schedule))
        summary["grid"] = [float(p) for p in schedule.grid.prices]
    c3 = config.diagnostics.get("partition_c3")
    if c3 is not None:
        summary["Gamma"] = analysis.interval_partition(means, c3).count
    if trace.realized is not None:
        summary["sampling_nice_violations"] = len(analysis.sampling_nice_check(trace.realized, means))
    result = RunResult(
        seed, replication, final, restart_rounds, elim_log, time.perf_counter() - started, digest, summary
    )
    return result, trace


def trace_csv(trace: analysis.RunTrace, digest: str) -> str:
    inst, cum = analysis.pseudo_regret(trace)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for i in range(trace.T):
        dm = trace.d_max[i]
        w.writerow(
            (
                i + 1,
                int(trace.arms[i]),
                int(trace.exploring[i]),
                "" if math.isnan(dm) else repr(float(dm)),
                int(trace.epoch[i]),
                int(trace.restarted[i]),
                repr(float(inst[i])),
                repr(float(cum[i])),
                digest,
            )
        )
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _existing_digest(path: str) -> Optional[str]:
    if not os.path.exists(path):
        return None
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh).get("config_digest")
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        row = next(r, None)
        return row.get("config_digest") if row else None


def guard_outputs(paths, digest: str, force: bool = False) -> None:
    for p in paths:
        old = _existing_digest(p)
        if old is not None and old != digest and not force:
            raise OutputConflict(f"{p} was written by config {old}, current config is {digest}; use --force")


def write_run(out_dir: str, result: RunResult, trace: analysis.RunTrace, force: bool = False) -> tuple:
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "trace.csv")
    summary_path = os.path.join(out_dir, "summary.json")
    guard_outputs([trace_path, summary_path], result.config_digest, force)
    with open(trace_path, "w", newline="") as fh:
        fh.write(trace_csv(trace, result.config_digest))
    with open(summary_path, "w") as fh:
        fh.write(_dump_json(result.summary))
    return trace_path, summary_path


def _run_worker(args):
    config_dict, seed, rep = args
    result, _ = run_one(ExperimentConfig.from_dict(config_dict), seed, rep)
    return result


def run_batch(config: ExperimentConfig, jobs: int = 1, seed_keys: Optional[list] = None) -> dict:
    """Replicate ``run_one`` over the config's seeds and aggregate final regret."""
    keys = seed_keys or config.seed_keys()
    if not keys:
        raise ConfigError("need at least one seed")
    tasks = [(config.to_dict(), s, r) for s, r in keys]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_worker, tasks))
    else:
        results = [_run_worker(t) for t in tasks]
    results.sort(key=lambda r: (r.seed, r.replication))
    regrets = [r.final_regret for r in results]
    restarts = [len(r.restart_rounds) for r in results]
    return {
        "schema_version": SCHEMA_VERSION,
        "config_digest": config.digest(),
        "runs": len(results),
        "mean_regret": statistics.fmean(regrets),
        "sd_regret": statistics.stdev(regrets) if len(results) > 1 else 0.0,
        "mean_restarts": statistics.fmean(restarts),
        "rows": [
            {
                "seed": r.seed,
                "replication": r.replication,
                "final_regret": r.final_regret,
                "restarts": len(r.restart_rounds),
                "restart_rounds": r.restart_rounds,
                "wall_time": r.wall_time,
            }
            for r in results
        ],
    }


def fit_loglog_slope(Ts, values) -> Optional[float]:
    """Least-squares slope of ``log(value)`` on ``log(T)``; None if any value <= 0."""
    v = np.asarray(values, dtype=np.float64)
    if np.any(v <= 0):
        return None
    slope, _ = np.polyfit(np.log(np.asarray(Ts, dtype=np.float64)), np.log(v), 1)
    return float(slope)


def scaling_study(config: ExperimentConfig, horizons, jobs: int = 1) -> dict:
    """Rerun the environment family at each horizon and fit the regret growth rate."""
    horizons = list(horizons)
    if len(horizons) < 3:
        raise ConfigError("scaling study needs at least 3 horizons")
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ConfigError("horizons must be strictly increasing")
    rows = []
    for T in horizons:
        agg = run_batch(config.with_T(T), jobs=jobs)
        rows.append({"T": T, "mean_regret": agg["mean_regret"], "sd_regret": agg["sd_regret"], "runs": agg["runs"]})
        log.info("T=%d mean regret %.2f", T, agg["mean_regret"])
    slope = fit_loglog_slope(horizons, [r["mean_regret"] for r in rows])
    return {
        "schema_version": SCHEMA_VERSION,
        "config_digest": config.digest(),
        "rows": rows,
        "slope": slope,
    }


def describe_environment(config: ExperimentConfig, seed: int = 0, replication: int = 0) -> dict:
    """S, variation and best-arm runs of the schedule a run would see."""
    sched_rng, _ = make_rng(seed, replication, "env").spawn(2)
    schedule = build_schedule(config, sched_rng)
    out = {
        "environment": config.environment["type"],
        "T": schedule.T,
        "K": schedule.K,
        "S": analysis.count_switchings(schedule),
        "V": analysis.variation_bandit(schedule.segment_means()),
        "best_arm_runs": [],
        "metadata": schedule.metadata,
    }
    if schedule.kind == "auction":
        out["V_bar"] = float(analysis.variation_auction(schedule))
    runs = out["best_arm_runs"]
    for start, end, arm in schedule.best_arms():
        if runs and runs[-1]["arm"] == arm:
            runs[-1]["end"] = end - 1
        else:
            runs.append({"start": start, "end": end - 1, "arm": arm})
    return out
