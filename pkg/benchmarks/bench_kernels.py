"""Time the compiled scan kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--rows 20000] [--arms 5] [--repeat 5]

Also times a full Elim-NS run under each backend.
"""

import argparse
import importlib
import time

import numpy as np

from elimns import _kernels_py


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def scan_workload(mod, prefix, calls, geometric):
    rows = prefix.shape[0] - 1
    # a threshold nothing clears, so every call walks its full window set
    def go():
        for hi in range(rows - calls + 1, rows + 1):
            mod.scan_elimination(prefix, hi, 0, 1e9, geometric)
    return go


def run_workload(T, backend_mod):
    from elimns import bandit_core, kernels

    def go():
        saved = kernels.scan_elimination
        bandit_core.kernels.scan_elimination = backend_mod.scan_elimination
        try:
            rng = np.random.default_rng(0)
            mu = np.array([0.3, 0.7, 0.5, 0.4, 0.2])
            x = (rng.random((T, 5)) < mu).astype(np.float64)
            s = bandit_core.new_state(bandit_core.AlgorithmConfig(T=T, K=5))
            for _ in range(T):
                bandit_core.advance_round(s, rng, lambda t, a: x[t - 1, a - 1:])
        finally:
            bandit_core.kernels.scan_elimination = saved
    return go


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--arms", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--nice-T", type=int, default=1000)
    args = ap.parse_args()

    backends = {"python": _kernels_py}
    try:
        backends["cython"] = importlib.import_module("elimns._kernels")
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    rng = np.random.default_rng(1)
    x = rng.random((args.rows, args.arms))
    prefix = np.zeros((args.rows + 1, args.arms))
    np.cumsum(x, axis=0, out=prefix[1:])
    dev = np.zeros((args.nice_T + 1, args.arms))
    np.cumsum(rng.random((args.nice_T, args.arms)) - 0.5, axis=0, out=dev[1:])

    cases = [
        ("geometric scan x2000", lambda m: scan_workload(m, prefix, 2000, True)),
        ("exact scan x200", lambda m: scan_workload(m, prefix, 200, False)),
        (f"interval scan T={args.nice_T}", lambda m: (lambda: m.full_interval_scan(dev, 2 * np.log(args.nice_T)))),
        ("Elim-NS run T=20000", lambda m: run_workload(20000, m)),
    ]
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    for name, make in cases:
        t = {b: best_of(make(m), args.repeat if "run" not in name else 1) for b, m in backends.items()}
        line = f"{name:<28}" + "".join(f"{t[b]:>11.4f}s" for b in backends)
        if "cython" in t:
            line += f"  {t['python'] / t['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
