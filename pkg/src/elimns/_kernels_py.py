"""Pure-Python/numpy versions of the hot kernels.

These are the reference implementations; ``_kernels.pyx`` mirrors them
operation for operation so both backends return bit-identical results.
"""

import numpy as np


def scan_elimination(prefix, hi, a_min, c1l, geometric):
    """Find the elimination witness for the current frontier arm.

    ``prefix`` is a (rows, K) array of per-arm cumulative reward sums where
    row ``r`` holds the sum over the first ``r`` rounds of the epoch. The
    candidate windows are ``[lo, hi)`` in row coordinates; ``a_min`` is
    0-based.

    Among windows where some arm beats ``a_min`` by more than
    ``sqrt(c1l / n)``, returns the one with the largest gap (ties: smallest
    ``lo``) as ``(lo, b, gap)``. Returns ``(-1, -1, 0.0)`` when no window
    witnesses an elimination.
    """
    K = prefix.shape[1]
    if a_min >= K - 1 or hi <= 0:
        return -1, -1, 0.0
    if geometric:
        los = []
        step = 1
        while hi - step > 0:
            los.append(hi - step)
            step *= 2
        los.append(0)
        los = np.array(los, dtype=np.int64)
    else:
        los = np.arange(hi - 1, -1, -1, dtype=np.int64)
    n = (hi - los).astype(np.float64)
    top = prefix[hi, a_min:]
    sums = top[None, :] - prefix[los, a_min:]
    diffs = (sums[:, 1:] - sums[:, :1]) / n[:, None]
    rel_b = np.argmax(diffs, axis=1)
    gaps = diffs[np.arange(len(los)), rel_b]
    thr = np.sqrt(c1l / n)
    hit = gaps > thr
    if not hit.any():
        return -1, -1, 0.0
    idx = np.flatnonzero(hit)
    best = idx[0]
    for i in idx[1:]:
        g = gaps[i]
        if g > gaps[best] or (g == gaps[best] and los[i] < los[best]):
            best = i
    return int(los[best]), int(rel_b[best]) + a_min + 1, float(gaps[best])


def full_interval_scan(dev_prefix, log_term):
    """All (arm, lo, hi) with ``|sum of deviations| / n >= sqrt(log_term / (2 n))``.

    ``dev_prefix`` is a (T+1, K) prefix-sum table of realized reward minus
    mean. Windows are ``[lo, hi)`` in 0-based round coordinates.
    """
    T = dev_prefix.shape[0] - 1
    out = []
    for lo in range(T):
        seg = dev_prefix[lo + 1:] - dev_prefix[lo]
        n = np.arange(1, T - lo + 1, dtype=np.float64)
        lhs = np.abs(seg) / n[:, None]
        rhs = np.sqrt(log_term / (2.0 * n))
        rows, arms = np.nonzero(lhs >= rhs[:, None])
        for r, a in zip(rows.tolist(), arms.tolist()):
            out.append((a, lo, lo + r + 1))
    out.sort(key=lambda x: (x[0], x[1], x[2]))
    return out
