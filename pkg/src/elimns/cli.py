"""Command line entry point: ``elimns {run,batch,scaling,partition,validate-env}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import BACKEND, analysis, harness


def _out_dir(args, config) -> str:
    return args.out or config.output.get("dir") or "."


def _write_json(path: str, obj, digest: str, force: bool) -> None:
    harness.guard_outputs([path], digest, force)
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def cmd_run(args) -> int:
    config = harness.ExperimentConfig.load(args.config)
    seed, rep = config.seed_keys()[0]
    if args.seed is not None:
        seed, rep = args.seed, 0
    result, trace = harness.run_one(config, seed, rep)
    paths = harness.write_run(_out_dir(args, config), result, trace, force=args.force)
    print(f"final regret {result.final_regret:.4f}, restarts {len(result.restart_rounds)}")
    for p in paths:
        print(p)
    return 0


def cmd_batch(args) -> int:
    config = harness.ExperimentConfig.load(args.config)
    keys = None
    if args.seeds is not None:
        base = config.seed_keys()[0][0]
        keys = [(base, i) for i in range(args.seeds)]
    agg = harness.run_batch(config, jobs=args.jobs, seed_keys=keys)
    out = _out_dir(args, config)
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "batch.json"), agg, agg["config_digest"], args.force)
    print(f"{agg['runs']} runs: mean regret {agg['mean_regret']:.4f} (sd {agg['sd_regret']:.4f})")
    return 0


def cmd_scaling(args) -> int:
    config = harness.ExperimentConfig.load(args.config)
    study = harness.scaling_study(config, args.horizons, jobs=args.jobs)
    out = _out_dir(args, config)
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "scaling.json"), study, study["config_digest"], args.force)
    for row in study["rows"]:
        print(f"T={row['T']}: mean regret {row['mean_regret']:.4f}")
    slope = study["slope"]
    print("slope: undefined (non-positive regret)" if slope is None else f"slope: {slope:.4f}")
    return 0


def cmd_partition(args) -> int:
    with open(args.means, newline="") as fh:
        rows = [[float(x) for x in r] for r in csv.reader(fh) if r]
    means = np.asarray(rows)
    res = analysis.interval_partition(means, args.c3)
    V = analysis.variation_bandit(means)
    bound = analysis.partition_bound(means.shape[0], V, args.c3)
    print(json.dumps({"count": res.count, "intervals": res.intervals, "V": V, "bound": bound}))
    return 0


def cmd_validate_env(args) -> int:
    config = harness.ExperimentConfig.load(args.config)
    seed = args.seed if args.seed is not None else config.seed_keys()[0][0]
    info = harness.describe_environment(config, seed)
    print(json.dumps(info, sort_keys=True, indent=2, default=float))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elimns", description=f"Elim-NS experiments (kernel backend: {BACKEND})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one seeded run; writes trace.csv and summary.json")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--force", action="store_true", help="overwrite outputs from a different config")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="replicated runs; writes batch.json")
    b.add_argument("--config", required=True)
    b.add_argument("--seeds", type=int, help="number of replications of the config's base seed")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out")
    b.add_argument("--force", action="store_true")
    b.set_defaults(func=cmd_batch)

    s = sub.add_parser("scaling", help="regret growth across horizons; writes scaling.json")
    s.add_argument("--config", required=True)
    s.add_argument("--horizons", type=int, nargs="+", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_scaling)

    pt = sub.add_parser("partition", help="greedy low-variation partition of a (T, K) means CSV")
    pt.add_argument("--means", required=True)
    pt.add_argument("--c3", type=float, default=0.5)
    pt.set_defaults(func=cmd_partition)

    v = sub.add_parser("validate-env", help="print S, variation and best-arm runs of a config's environment")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_validate_env)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, harness.OutputConflict, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
