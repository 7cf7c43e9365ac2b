"""numba @njit block kernels for the pairwise comparison engine.

Same contracts as _kernels_numpy; see engine.py for the arithmetic
convention that keeps the two backends bit-identical.  All kernels release
the GIL so blocks can run on a thread pool.
"""

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True, nogil=True)
def hist_nn_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                  same_set, mated, alpha, beta, grid):
    nt = grid.shape[0]
    hist = np.zeros(nt + 1, dtype=np.int64)
    bp = i1 - i0
    bg = j1 - j0
    nn_p = np.full(bp, -np.inf)
    cnt_p = np.zeros(bp, dtype=np.int64)
    nn_g = np.full(bg, -np.inf)
    cnt_g = np.zeros(bg, dtype=np.int64)
    d = rows_p.shape[1]
    for i in range(i0, i1):
        ci = codes_p[i]
        jlo = j0
        if same_set and jlo <= i:
            jlo = i + 1
        for j in range(jlo, j1):
            if mated:
                if codes_g[j] != ci:
                    continue
            else:
                if codes_g[j] == ci:
                    continue
            s = 0.0
            for k in range(d):
                s += rows_p[i, k] * rows_g[j, k]
            s = alpha * s + beta
            # rank = number of grid values <= s
            lo = 0
            hi = nt
            while lo < hi:
                mid = (lo + hi) >> 1
                if grid[mid] <= s:
                    lo = mid + 1
                else:
                    hi = mid
            hist[lo] += 1
            if not mated:
                ii = i - i0
                if s > nn_p[ii]:
                    nn_p[ii] = s
                cnt_p[ii] += 1
                if same_set:
                    jj = j - j0
                    if s > nn_g[jj]:
                        nn_g[jj] = s
                    cnt_g[jj] += 1
    return hist, nn_p, cnt_p, nn_g, cnt_g


@njit(cache=True, nogil=True)
def minmax_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                 same_set, mated, alpha, beta):
    lo = np.inf
    hi = -np.inf
    n = 0
    d = rows_p.shape[1]
    for i in range(i0, i1):
        ci = codes_p[i]
        jlo = j0
        if same_set and jlo <= i:
            jlo = i + 1
        for j in range(jlo, j1):
            if mated:
                if codes_g[j] != ci:
                    continue
            else:
                if codes_g[j] == ci:
                    continue
            s = 0.0
            for k in range(d):
                s += rows_p[i, k] * rows_g[j, k]
            s = alpha * s + beta
            if s < lo:
                lo = s
            if s > hi:
                hi = s
            n += 1
    return lo, hi, n


@njit(cache=True, nogil=True)
def collect_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                  same_set, mated, alpha, beta, a, b, buf):
    # collects scores s with a <= s < b into buf; returns count found
    found = 0
    cap = buf.shape[0]
    d = rows_p.shape[1]
    for i in range(i0, i1):
        ci = codes_p[i]
        jlo = j0
        if same_set and jlo <= i:
            jlo = i + 1
        for j in range(jlo, j1):
            if mated:
                if codes_g[j] != ci:
                    continue
            else:
                if codes_g[j] == ci:
                    continue
            s = 0.0
            for k in range(d):
                s += rows_p[i, k] * rows_g[j, k]
            s = alpha * s + beta
            if s >= a and s < b:
                if found < cap:
                    buf[found] = s
                found += 1
    return found


@njit(cache=True, nogil=True)
def min_above_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                    same_set, mated, alpha, beta, v):
    # smallest score strictly greater than v, and how many exceed v
    best = np.inf
    n = 0
    d = rows_p.shape[1]
    for i in range(i0, i1):
        ci = codes_p[i]
        jlo = j0
        if same_set and jlo <= i:
            jlo = i + 1
        for j in range(jlo, j1):
            if mated:
                if codes_g[j] != ci:
                    continue
            else:
                if codes_g[j] == ci:
                    continue
            s = 0.0
            for k in range(d):
                s += rows_p[i, k] * rows_g[j, k]
            s = alpha * s + beta
            if s > v:
                n += 1
                if s < best:
                    best = s
    return best, n
