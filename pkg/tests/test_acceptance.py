"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) or through pytest; the
verdict lines are repeated in the pytest terminal summary.
"""

import json
import math
import statistics
import time
from fractions import Fraction as F
from functools import lru_cache

import numpy as np
import pytest

from elimns import analysis, auction, bandit_core, environments, harness

from acceptance_log import report
from reference import dyadic_rewards, random_trace_means, run_against_oracle

pytestmark = pytest.mark.acceptance

DEMO = {"type": "elim_ns", "C1": 4, "C2": 4, "theta": 0.75, "log_term_mode": "demo"}
STATIONARY_MEANS = [0.3, 0.7, 0.5, 0.4, 0.2]
JUMPED_MEANS = [0.9, 0.7, 0.5, 0.4, 0.2]
CHANGE_ROUND = 10_000
SEEDS_20 = {"base_seed": 2024, "replications": 20}


def demo_config(segments, algorithm=None, T=20_000, seeds=SEEDS_20):
    return harness.ExperimentConfig.from_dict({
        "T": T,
        "environment": {"type": "direct_bandit", "reward_law": "bernoulli", "segments": segments},
        "algorithm": algorithm or DEMO,
        "seeds": seeds,
        "diagnostics": {"check_invariants": True},
    })


def stationary_config(**kw):
    return demo_config([{"length": 20_000, "means": STATIONARY_MEANS}], **kw)


def change_config(**kw):
    return demo_config(
        [{"length": CHANGE_ROUND - 1, "means": STATIONARY_MEANS},
         {"length": 20_000 - CHANGE_ROUND + 1, "means": JUMPED_MEANS}],
        **kw,
    )


def run_seeds(config):
    """Per-seed results; invariant violations are caught and counted, not hidden."""
    out = []
    for seed, rep in config.seed_keys():
        try:
            res, _ = harness.run_one(config, seed, rep)
            out.append(res)
        except bandit_core.InvariantViolation as exc:
            out.append(exc)
    return out


@lru_cache(maxsize=None)
def stationary_runs():
    t0 = time.perf_counter()
    runs = run_seeds(stationary_config())
    return runs, time.perf_counter() - t0


@lru_cache(maxsize=None)
def change_runs():
    return run_seeds(change_config()), run_seeds(change_config(algorithm={**DEMO, "type": "baseline_no_restart"}))


def random_distribution(rng):
    n = int(rng.integers(1, 5))
    atoms = int(rng.integers(1, 9))
    w = rng.random(atoms) + 1e-3
    w = w / w.sum()
    probs = [float(x) for x in w[:-1]]
    probs.append(1.0 - sum(probs))
    return auction.FiniteValueDistribution(tuple((tuple(rng.random(n).tolist()), p) for p in probs))


def test_one_sided_lipschitz():
    rng = np.random.default_rng(1)
    grid = auction.uniform_grid(21)
    t0 = time.perf_counter()
    violations = 0
    for _ in range(200):
        rev = auction.mean_vector(random_distribution(rng), grid)
        for i in range(grid.K):
            for j in range(i, grid.K):
                r1, r2 = grid.prices[i], grid.prices[j]
                if rev[i] < rev[j] - (r2 - r1) - 1e-9:
                    violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 5
    report(1, "one-sided Lipschitz revenue", ok, f"{violations} violations over 200 distributions, {elapsed:.2f}s (< 5s)")
    assert ok


def test_censoring_soundness():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        v = tuple(rng.random(int(rng.integers(1, 6))).tolist())
        grid = auction.uniform_grid(int(rng.integers(1, 30)))
        arm = int(rng.integers(1, grid.K + 1))
        full = auction.reward_vector(v, grid)
        if auction.observed_suffix(v, grid, arm).tolist() != full[arm - 1:].tolist():
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 1
    report(2, "censoring soundness", ok, f"{mismatches} mismatches over 1000 triples, {elapsed:.2f}s (< 1s)")
    assert ok


def test_exact_scan_matches_brute_force():
    t0 = time.perf_counter()
    bad = elims = restarts = 0
    for i in range(50):
        rng = np.random.default_rng([31, i])
        K, T = int(rng.integers(2, 6)), int(rng.integers(128, 513))
        x = dyadic_rewards(rng, random_trace_means(rng, K, T), T)
        cfg = bandit_core.AlgorithmConfig(
            T=T, K=K, C1=float(rng.choice([0.25, 0.5, 1.0])), C2=0.5,
            sigma_scan_mode="exact", nonstationary=bool(i % 2 == 0),
        )
        problems, e, r = run_against_oracle(cfg, x, i)
        bad += bool(problems)
        elims += e
        restarts += r
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 30 and elims > 0
    report(3, "exact scan vs brute force", ok,
           f"{bad}/50 traces differ ({elims} eliminations, {restarts} restarts checked), {elapsed:.1f}s (< 30s)")
    assert ok


def test_exploration_observation_invariant():
    runs, _ = change_runs()
    violations = sum(isinstance(r, Exception) for r in runs)
    stationary, _ = stationary_runs()
    violations_extra = sum(isinstance(r, Exception) for r in stationary)
    explored = sum(r.summary["exploration_rounds"] for r in runs if not isinstance(r, Exception))
    ok = violations == 0 and violations_extra == 0 and len(runs) == 20
    report(4, "exploration-observation invariant", ok,
           f"{violations} violations over 20 change-point runs ({explored} exploring rounds asserted), "
           f"{violations_extra} over 20 stationary runs")
    assert ok


def test_stationary_false_restarts():
    runs, elapsed = stationary_runs()
    clean = sum(1 for r in runs if not isinstance(r, Exception) and not r.restart_rounds)
    ok = clean >= 18 and elapsed < 120
    report(5, "stationary false-restart control", ok,
           f"{clean}/20 seeds restart-free (need >= 18), {elapsed:.1f}s (< 120s)")
    assert ok


def _delays(runs):
    out = []
    for r in runs:
        after = [t for t in r.restart_rounds if t > CHANGE_ROUND]
        out.append(after[0] - CHANGE_ROUND if after else math.inf)
    return out


def test_change_detection_delay():
    runs, _ = change_runs()
    delays = _delays(runs)
    median = statistics.median(delays)
    ok = median <= 3000
    report("6a", "change detection delay", ok, f"median delay {median} rounds (need <= 3000)")
    assert ok


def test_change_detection_beats_no_restart():
    runs, base = change_runs()
    wins = sum(1 for a, b in zip(runs, base) if a.final_regret < b.final_regret)
    mean_a = statistics.fmean(r.final_regret for r in runs)
    mean_b = statistics.fmean(r.final_regret for r in base)
    ok = wins >= 16
    report("6b", "regret vs no-restart baseline", ok,
           f"Elim-NS wins {wins}/20 seeds (need >= 16); mean regret {mean_a:.0f} vs {mean_b:.0f}")
    assert ok


# Scaling family: demo mode with larger records constants and a large-gap S=3 instance.
SCALING_ALGO = {"type": "elim_ns", "C1": 32, "C2": 0.5, "theta": 0.75, "log_term_mode": "demo"}
SCALING_SEGMENTS = [
    {"weight": 1, "means": [0.1, 0.9, 0.5, 0.3, 0.2]},
    {"weight": 1, "means": [0.9, 0.1, 0.5, 0.3, 0.2]},
    {"weight": 1, "means": [0.1, 0.9, 0.5, 0.3, 0.2]},
]
HORIZONS = [8000, 16000, 32000, 64000]


def test_sublinear_scaling():
    t0 = time.perf_counter()
    seeds = {"base_seed": 77, "replications": 10}
    elim = harness.scaling_study(demo_config(SCALING_SEGMENTS, SCALING_ALGO, T=8000, seeds=seeds), HORIZONS)
    fixed = harness.scaling_study(
        demo_config(SCALING_SEGMENTS, {"type": "baseline_fixed_best"}, T=8000, seeds=seeds), HORIZONS
    )
    elapsed = time.perf_counter() - t0
    s1, s2 = elim["slope"], fixed["slope"]
    ok = s1 is not None and 0.4 <= s1 <= 0.9 and s2 is not None and s2 >= 0.9 and elapsed < 900
    means = ", ".join(f"{r['mean_regret']:.0f}" for r in elim["rows"])
    report(7, "sub-linear regret scaling", ok,
           f"Elim-NS slope {s1:.3f} (need [0.4, 0.9]; mean regret {means}), "
           f"fixed-best slope {s2:.3f} (need >= 0.9), {elapsed:.0f}s (< 900s)")
    assert ok


def test_interval_partition_lemma():
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(100):
        T, K = int(rng.integers(1, 5001)), int(rng.integers(1, 6))
        c3 = float(rng.uniform(0.01, 0.5))
        step = float(rng.choice([1e-4, 1e-3, 1e-2, 0.05]))
        m = np.clip(rng.random(K) + np.cumsum(rng.normal(0, step, (T, K)), axis=0), 0, 1)
        res = analysis.interval_partition(m, c3)
        delta = [0.0, 0.0] + analysis.round_changes(m).tolist()
        for s, e in res.intervals:
            v = 0.0
            for u in range(s + 1, e + 1):
                v += delta[u]
            if not v <= math.sqrt(c3 / (e - s + 1)):
                bad += 1
        if not res.count <= analysis.partition_bound(T, analysis.variation_bandit(m), c3):
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10
    report(8, "interval partition bounds", ok, f"{bad} violations over 100 drift sequences, {elapsed:.2f}s (< 10s)")
    assert ok


def test_lower_bound_revenue_facts():
    grid = auction.PriceGrid((F(1, 2), F(3, 4)))
    plus, minus = auction.hard_pair(F(1, 10), +1), auction.hard_pair(F(1, 10), -1)
    rev_plus = tuple(auction.mean_vector(plus, grid))
    rev_minus = tuple(auction.mean_vector(minus, grid))
    sched = environments.build_switching([(10, plus), (10, minus)], grid=grid)
    flips = [arm for _, _, arm in sched.best_arms()] == [1, 2]
    ok = rev_plus == (F(54, 100), F(48, 100)) and rev_minus == (F(59, 100), F(63, 100)) and flips
    report(9, "lower-bound revenue facts", ok,
           f"revenues {tuple(map(str, rev_plus))} and {tuple(map(str, rev_minus))}, best reserve flips: {flips}")
    assert ok


def test_sampling_nice_frequency():
    t0 = time.perf_counter()
    cfg = harness.ExperimentConfig.from_dict({
        "T": 1000,
        "environment": {"type": "direct_bandit", "reward_law": "bernoulli",
                        "segments": [{"length": 1000, "means": STATIONARY_MEANS}]},
        "algorithm": DEMO,
        "diagnostics": {"sampling_nice": True},
    })
    clean = 0
    for seed in range(100):
        res, _ = harness.run_one(cfg, 5000 + seed)
        clean += res.summary["sampling_nice_violations"] == 0
    elapsed = time.perf_counter() - t0
    ok = clean >= 95 and elapsed < 120
    report(10, "sampling-nice frequency", ok, f"{clean}/100 seeds violation-free (need >= 95), {elapsed:.1f}s (< 120s)")
    assert ok


def test_determinism(tmp_path):
    configs = {
        "bandit": change_config(T=20_000),
        "auction": harness.ExperimentConfig.from_dict({
            "T": 3000,
            "environment": {"type": "lower_bound_switching", "S": 3, "c_eps": 0.25},
            "algorithm": {**DEMO, "C1": 1, "C2": 1},
            "diagnostics": {"partition_c3": 0.5, "sampling_nice": True},
        }),
    }
    same = []
    for name, cfg in configs.items():
        blobs = []
        for attempt in ("first", "second"):
            out = tmp_path / name / attempt
            res, tr = harness.run_one(cfg, 13)
            harness.write_run(str(out), res, tr)
            blobs.append(((out / "trace.csv").read_bytes(), (out / "summary.json").read_bytes()))
        same.append(blobs[0] == blobs[1])
    ok = all(same)
    report(11, "determinism", ok, f"byte-identical trace.csv and summary.json for {sum(same)}/{len(same)} configs")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
