"""Pure-numpy fallback kernels, bit-compatible with the numba versions.

Scores are accumulated one feature dimension at a time (vectorized over the
pair block), which performs the same IEEE multiply/add sequence per pair as
the numba scalar loop.  Ranks come from np.searchsorted(side="right"),
which computes the same integer as the kernel's binary search.
"""

import numpy as np

NAME = "numpy"


def _block_scores(rows_p, rows_g, i0, i1, j0, j1, alpha, beta):
    p = rows_p[i0:i1]
    g = rows_g[j0:j1]
    acc = np.zeros((i1 - i0, j1 - j0))
    tmp = np.empty_like(acc)
    for k in range(rows_p.shape[1]):
        np.multiply(p[:, k, None], g[None, :, k], out=tmp)
        acc += tmp
    np.multiply(acc, alpha, out=acc)
    np.add(acc, beta, out=acc)
    return acc


def _block_mask(codes_p, codes_g, i0, i1, j0, j1, same_set, mated):
    eq = codes_p[i0:i1, None] == codes_g[None, j0:j1]
    mask = eq if mated else ~eq
    if same_set:
        ii = np.arange(i0, i1)[:, None]
        jj = np.arange(j0, j1)[None, :]
        mask = mask & (jj > ii)
    return mask


def hist_nn_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                  same_set, mated, alpha, beta, grid):
    scores = _block_scores(rows_p, rows_g, i0, i1, j0, j1, alpha, beta)
    mask = _block_mask(codes_p, codes_g, i0, i1, j0, j1, same_set, mated)
    ranks = np.searchsorted(grid, scores[mask], side="right")
    hist = np.bincount(ranks, minlength=grid.shape[0] + 1).astype(np.int64)
    bp, bg = scores.shape
    if mated:
        nn_p = np.full(bp, -np.inf)
        cnt_p = np.zeros(bp, dtype=np.int64)
        nn_g = np.full(bg, -np.inf)
        cnt_g = np.zeros(bg, dtype=np.int64)
    else:
        masked = np.where(mask, scores, -np.inf)
        nn_p = masked.max(axis=1, initial=-np.inf)
        cnt_p = mask.sum(axis=1, dtype=np.int64)
        if same_set:
            nn_g = masked.max(axis=0, initial=-np.inf)
            cnt_g = mask.sum(axis=0, dtype=np.int64)
        else:
            nn_g = np.full(bg, -np.inf)
            cnt_g = np.zeros(bg, dtype=np.int64)
    return hist, nn_p, cnt_p, nn_g, cnt_g


def minmax_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                 same_set, mated, alpha, beta):
    scores = _block_scores(rows_p, rows_g, i0, i1, j0, j1, alpha, beta)
    mask = _block_mask(codes_p, codes_g, i0, i1, j0, j1, same_set, mated)
    vals = scores[mask]
    if vals.size == 0:
        return np.inf, -np.inf, 0
    return float(vals.min()), float(vals.max()), int(vals.size)


def collect_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                  same_set, mated, alpha, beta, a, b, buf):
    scores = _block_scores(rows_p, rows_g, i0, i1, j0, j1, alpha, beta)
    mask = _block_mask(codes_p, codes_g, i0, i1, j0, j1, same_set, mated)
    vals = scores[mask]
    vals = vals[(vals >= a) & (vals < b)]
    found = vals.size
    buf[:min(found, buf.shape[0])] = vals[:buf.shape[0]]
    return int(found)


def min_above_block(rows_p, rows_g, codes_p, codes_g, i0, i1, j0, j1,
                    same_set, mated, alpha, beta, v):
    scores = _block_scores(rows_p, rows_g, i0, i1, j0, j1, alpha, beta)
    mask = _block_mask(codes_p, codes_g, i0, i1, j0, j1, same_set, mated)
    vals = scores[mask]
    vals = vals[vals > v]
    if vals.size == 0:
        return np.inf, 0
    return float(vals.min()), int(vals.size)
