# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_kernels_py`` for semantics."""

from libc.math cimport sqrt, fabs


def scan_elimination(const double[:, ::1] prefix, Py_ssize_t hi, Py_ssize_t a_min,
                     double c1l, bint geometric):
    cdef Py_ssize_t K = prefix.shape[1]
    cdef Py_ssize_t lo, step, b, best_lo = -1, best_b = -1, arg
    cdef double n, sm, d, g, thr, best_gap = 0.0
    cdef bint last = False
    if a_min >= K - 1 or hi <= 0:
        return -1, -1, 0.0
    step = 1
    lo = hi - 1
    while True:
        if geometric:
            if hi - step > 0:
                lo = hi - step
                step *= 2
            elif not last:
                lo = 0
                last = True
            else:
                break
        else:
            if lo < 0:
                break
        n = <double>(hi - lo)
        sm = prefix[hi, a_min] - prefix[lo, a_min]
        arg = a_min + 1
        g = ((prefix[hi, arg] - prefix[lo, arg]) - sm) / n
        for b in range(a_min + 2, K):
            d = ((prefix[hi, b] - prefix[lo, b]) - sm) / n
            if d > g:
                g = d
                arg = b
        thr = sqrt(c1l / n)
        if g > thr:
            if best_lo < 0 or g > best_gap or (g == best_gap and lo < best_lo):
                best_lo = lo
                best_b = arg
                best_gap = g
        if not geometric:
            lo -= 1
    if best_lo < 0:
        return -1, -1, 0.0
    return best_lo, best_b, best_gap


def full_interval_scan(const double[:, ::1] dev_prefix, double log_term):
    cdef Py_ssize_t T = dev_prefix.shape[0] - 1
    cdef Py_ssize_t K = dev_prefix.shape[1]
    cdef Py_ssize_t lo, hi, a
    cdef double n, s
    out = []
    for lo in range(T):
        for hi in range(lo + 1, T + 1):
            n = <double>(hi - lo)
            for a in range(K):
                s = dev_prefix[hi, a] - dev_prefix[lo, a]
                if fabs(s) / n >= sqrt(log_term / (2.0 * n)):
                    out.append((a, lo, hi))
    out.sort()
    return out
