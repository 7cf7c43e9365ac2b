"""Blocked, parallel pairwise-comparison engine.

The pair space of a comparison is partitioned into rectangular blocks that
independent worker threads reduce into private integer histograms (and
per-probe running maxima); partial results merge by addition / elementwise
max, so counts are bit-identical for any worker count, block size, and
backend.

Score convention (shared by both backends and the naive oracles): the dot
product of two rows is accumulated in index order over the feature
dimension, then mapped through ``alpha*s + beta``.  A BLAS matmul does not
honor that order, which is why neither backend uses one on the hot path.

Backends: numba @njit kernels (default) or a pure-numpy fallback, selected
with the IDEM_BACKEND environment variable ("numba", "numpy", or "auto")
or per call via ``backend=``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..embeddings import EmbeddingSet, ScoreScale
from ..errors import EmptyComparisonError, FormatError

WITHIN_NONMATED = "within_set_nonmated"
WITHIN_MATED = "within_set_mated"
BETWEEN = "between_sets"
MODES = (WITHIN_NONMATED, WITHIN_MATED, BETWEEN)

DEFAULT_BLOCK = 1024

_BACKENDS: dict[str, object] = {}


def resolve_backend(name: str | None = None):
    """Return the kernel module for `name` (or the IDEM_BACKEND env flag)."""
    if name is None:
        name = os.environ.get("IDEM_BACKEND", "auto").lower()
    if name in _BACKENDS:
        return _BACKENDS[name]
    if name == "numpy":
        from . import _kernels_numpy as mod
    elif name == "numba":
        from . import _kernels_numba as mod
    elif name == "auto":
        try:
            from . import _kernels_numba as mod
        except ImportError:
            from . import _kernels_numpy as mod
    else:
        raise FormatError(f"unknown backend {name!r} (expected numba, numpy, or auto)")
    _BACKENDS[name] = mod
    return mod


@dataclass(frozen=True)
class ComparisonSpec:
    """Which pairs to compare and on what score scale.

    within_set_nonmated: unordered pairs of `probe`, same-label pairs
    excluded; an unlabeled set counts every pair (all rows distinct).
    within_set_mated: unordered same-label pairs of `probe` (labels
    required).  between_sets: every (probe, gallery) combination, counted
    once.
    """

    mode: str
    probe: EmbeddingSet
    gallery: EmbeddingSet | None = None
    scale: ScoreScale = field(default_factory=ScoreScale)

    def __post_init__(self):
        if self.mode not in MODES:
            raise FormatError(f"unknown comparison mode {self.mode!r}")
        if not self.probe.normalized:
            raise FormatError("comparison requires a normalized probe set")
        if self.mode == BETWEEN:
            if self.gallery is None:
                raise FormatError("between_sets comparison requires a gallery set")
            if not self.gallery.normalized:
                raise FormatError("comparison requires a normalized gallery set")
            if self.gallery.dim != self.probe.dim:
                raise FormatError(f"probe dim {self.probe.dim} != gallery dim {self.gallery.dim}")
        else:
            if self.gallery is not None:
                raise FormatError(f"{self.mode} takes no gallery set")
            if self.mode == WITHIN_MATED and self.probe.labels is None:
                raise FormatError("labels required for mated comparisons")

    def total_comparisons(self) -> int:
        """Closed-form size of the pair universe."""
        if self.mode == BETWEEN:
            return self.probe.n * self.gallery.n
        codes = self.probe.label_codes()
        mated = int(sum(math.comb(int(c), 2) for c in np.bincount(codes)))
        if self.mode == WITHIN_MATED:
            return mated
        return math.comb(self.probe.n, 2) - mated

    def _arrays(self):
        """(rows_p, rows_g, codes_p, codes_g, same_set, mated) for the kernels."""
        if self.mode == BETWEEN:
            # disjoint code ranges: no between-set pair is ever "mated"
            cp = np.arange(self.probe.n, dtype=np.int64)
            cg = np.arange(self.gallery.n, dtype=np.int64) + self.probe.n
            return self.probe.rows, self.gallery.rows, cp, cg, False, False
        codes = self.probe.label_codes()
        return self.probe.rows, self.probe.rows, codes, codes, True, self.mode == WITHIN_MATED


def _blocks(n_p, n_g, same_set, block):
    for i0 in range(0, n_p, block):
        i1 = min(i0 + block, n_p)
        j_start = (i0 // block) * block if same_set else 0
        for j0 in range(j_start, n_g, block):
            yield i0, i1, j0, min(j0 + block, n_g)


def _resolve_workers(workers):
    if workers is None:
        workers = os.cpu_count() or 1
    return max(1, int(workers))


def _map_blocks(fn, tasks, workers):
    if workers == 1:
        for t in tasks:
            yield fn(*t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *t) for t in tasks]
            for fut in futures:
                yield fut.result()


@dataclass
class PassResult:
    """One full sweep over a pair universe."""

    hist: np.ndarray      # int64, len(grid)+1; hist[k] = #pairs whose score has rank k
    nn: np.ndarray        # float64, per-probe max qualifying score (-inf if none)
    nn_count: np.ndarray  # int64, per-probe number of qualifying partners
    npairs: int


def comparison_pass(spec: ComparisonSpec, grid: np.ndarray, *,
                    workers=None, block=DEFAULT_BLOCK, backend=None) -> PassResult:
    """Histogram scores against `grid` and track per-probe nearest neighbours.

    rank k means: exactly k grid values are <= score, so
      #(score >= grid[t]) = sum(hist[t+1:])   and   #(score < grid[t]) = sum(hist[:t+1]).
    """
    kern = resolve_backend(backend)
    workers = _resolve_workers(workers)
    block = max(1, int(block))
    rows_p, rows_g, cp, cg, same_set, mated = spec._arrays()
    alpha, beta = spec.scale.alpha, spec.scale.beta
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if kern.NAME == "numba":  # compile before threading
        _warmup(kern, grid)

    hist = np.zeros(grid.shape[0] + 1, dtype=np.int64)
    nn = np.full(rows_p.shape[0], -np.inf)
    nn_count = np.zeros(rows_p.shape[0], dtype=np.int64)
    tasks = [(rows_p, rows_g, cp, cg, i0, i1, j0, j1, same_set, mated, alpha, beta, grid)
             for (i0, i1, j0, j1) in _blocks(rows_p.shape[0], rows_g.shape[0], same_set, block)]
    for (i0, i1, j0, j1), out in zip((t[4:8] for t in tasks),
                                     _map_blocks(kern.hist_nn_block, tasks, workers)):
        h, nn_p, cnt_p, nn_g, cnt_g = out
        hist += h
        np.maximum(nn[i0:i1], nn_p, out=nn[i0:i1])
        nn_count[i0:i1] += cnt_p
        if same_set:
            np.maximum(nn[j0:j1], nn_g, out=nn[j0:j1])
            nn_count[j0:j1] += cnt_g
    return PassResult(hist, nn, nn_count, int(hist.sum()))


def score_range(spec: ComparisonSpec, *, workers=None, block=DEFAULT_BLOCK,
                backend=None) -> tuple[float, float, int]:
    """(min, max, count) of the comparison's score multiset."""
    kern = resolve_backend(backend)
    workers = _resolve_workers(workers)
    rows_p, rows_g, cp, cg, same_set, mated = spec._arrays()
    alpha, beta = spec.scale.alpha, spec.scale.beta
    if kern.NAME == "numba":
        _warmup(kern, np.array([0.0]))
    lo, hi, n = np.inf, -np.inf, 0
    tasks = [(rows_p, rows_g, cp, cg, i0, i1, j0, j1, same_set, mated, alpha, beta)
             for (i0, i1, j0, j1) in _blocks(rows_p.shape[0], rows_g.shape[0], same_set, block)]
    for blo, bhi, bn in _map_blocks(kern.minmax_block, tasks, workers):
        lo = min(lo, blo)
        hi = max(hi, bhi)
        n += bn
    return lo, hi, n


def collect_scores(spec: ComparisonSpec, a: float, b: float, cap: int, *,
                   block=DEFAULT_BLOCK, backend=None) -> np.ndarray:
    """All scores s with a <= s < b, as an unsorted multiset (single-threaded)."""
    kern = resolve_backend(backend)
    rows_p, rows_g, cp, cg, same_set, mated = spec._arrays()
    alpha, beta = spec.scale.alpha, spec.scale.beta
    buf = np.empty(cap)
    chunks = []
    for (i0, i1, j0, j1) in _blocks(rows_p.shape[0], rows_g.shape[0], same_set, block):
        found = kern.collect_block(rows_p, rows_g, cp, cg, i0, i1, j0, j1,
                                   same_set, mated, alpha, beta, a, b, buf)
        if found > cap:
            raise AssertionError("collect buffer overflow: histogram and collection disagree")
        if found:
            chunks.append(buf[:found].copy())
    return np.concatenate(chunks) if chunks else np.empty(0)


def min_above(spec: ComparisonSpec, v: float, *, workers=None, block=DEFAULT_BLOCK,
              backend=None) -> tuple[float, int]:
    """Smallest score strictly above v, and the number of scores above v."""
    kern = resolve_backend(backend)
    workers = _resolve_workers(workers)
    rows_p, rows_g, cp, cg, same_set, mated = spec._arrays()
    alpha, beta = spec.scale.alpha, spec.scale.beta
    if kern.NAME == "numba":
        _warmup(kern, np.array([0.0]))
    best, n = np.inf, 0
    tasks = [(rows_p, rows_g, cp, cg, i0, i1, j0, j1, same_set, mated, alpha, beta, v)
             for (i0, i1, j0, j1) in _blocks(rows_p.shape[0], rows_g.shape[0], same_set, block)]
    for bbest, bn in _map_blocks(kern.min_above_block, tasks, workers):
        best = min(best, bbest)
        n += bn
    return best, n


def require_nonempty(spec: ComparisonSpec) -> int:
    total = spec.total_comparisons()
    if total == 0:
        raise EmptyComparisonError(f"empty comparison set for mode {spec.mode}")
    return total


_warmed: set[str] = set()


def _warmup(kern, grid):
    """Force numba compilation on the main thread before the pool starts."""
    if kern.NAME in _warmed:
        return
    r = np.zeros((2, 2))
    c = np.array([0, 1], dtype=np.int64)
    g = np.ascontiguousarray(grid[:1], dtype=np.float64)
    kern.hist_nn_block(r, r, c, c, 0, 2, 0, 2, True, False, 1.0, 0.0, g)
    kern.minmax_block(r, r, c, c, 0, 2, 0, 2, True, False, 1.0, 0.0)
    kern.collect_block(r, r, c, c, 0, 2, 0, 2, True, False, 1.0, 0.0, 0.0, 1.0, np.empty(4))
    kern.min_above_block(r, r, c, c, 0, 2, 0, 2, True, False, 1.0, 0.0, 0.0)
    _warmed.add(kern.NAME)
