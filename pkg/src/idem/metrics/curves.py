"""FAR / FRR / ROC curves, threshold selection, and the naive oracles.

Conventions (shared everywhere): a non-mated comparison is a false accept
at threshold t when its score is >= t; a mated comparison is a false
reject when its score is < t.  Ties therefore split exactly between the
two sides and counts partition the pair universe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyComparisonError, FormatError, ResolutionError
from . import engine
from .engine import BETWEEN, WITHIN_MATED, WITHIN_NONMATED, ComparisonSpec


def make_grid(values) -> np.ndarray:
    """Validate a threshold grid: finite, strictly increasing, length >= 1."""
    grid = np.ascontiguousarray(values, dtype=np.float64)
    if grid.ndim != 1 or grid.shape[0] < 1:
        raise FormatError("threshold grid must be a 1-D sequence with at least one entry")
    if not np.isfinite(grid).all():
        raise FormatError("threshold grid contains non-finite values")
    if grid.shape[0] > 1 and not (np.diff(grid) > 0).all():
        raise FormatError("threshold grid must be strictly increasing")
    grid.flags.writeable = False
    return grid


def default_grid(*specs: ComparisonSpec, points: int = 512, workers=None,
                 block=engine.DEFAULT_BLOCK, backend=None) -> np.ndarray:
    """Uniform grid spanning [min, max] of the observed scores of all specs."""
    lo, hi = np.inf, -np.inf
    for spec in specs:
        engine.require_nonempty(spec)
        slo, shi, _ = engine.score_range(spec, workers=workers, block=block, backend=backend)
        lo, hi = min(lo, slo), max(hi, shi)
    if lo == hi:
        return make_grid([lo])
    return make_grid(np.linspace(lo, hi, points))


@dataclass(frozen=True)
class FarCurve:
    """Per-threshold count of comparisons scoring >= threshold."""

    grid: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if self.counts.shape != self.grid.shape:
            raise AssertionError("counts/grid length mismatch")
        if (np.diff(self.counts) > 0).any():
            raise AssertionError("FAR counts must be non-increasing in threshold")
        if self.counts.min() < 0 or self.counts.max() > self.total:
            raise AssertionError("FAR counts out of range")

    @property
    def far(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class FrrCurve:
    """Per-threshold count of mated comparisons scoring < threshold."""

    grid: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if self.counts.shape != self.grid.shape:
            raise AssertionError("counts/grid length mismatch")
        if (np.diff(self.counts) < 0).any():
            raise AssertionError("FRR counts must be non-decreasing in threshold")
        if self.counts.min() < 0 or self.counts.max() > self.total:
            raise AssertionError("FRR counts out of range")

    @property
    def frr(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class RocCurve:
    """(far, frr) pairs parametrized by a shared threshold grid."""

    grid: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    @property
    def points(self):
        return list(zip(self.far.tolist(), self.frr.tolist()))


def _suffix_counts(hist: np.ndarray) -> np.ndarray:
    # counts[t] = #(rank > t) = #(score >= grid[t])
    return hist[::-1].cumsum()[::-1][1:].copy()


def _prefix_counts(hist: np.ndarray) -> np.ndarray:
    # counts[t] = #(rank <= t) = #(score < grid[t])
    return hist.cumsum()[:-1].copy()


def _nonmated_spec(spec: ComparisonSpec):
    if spec.mode not in (WITHIN_NONMATED, BETWEEN):
        raise FormatError(f"expected a non-mated comparison, got mode {spec.mode}")


def far_curve(spec: ComparisonSpec, grid=None, *, workers=None,
              block=engine.DEFAULT_BLOCK, backend=None) -> FarCurve:
    """All-pairs false-acceptance curve over a threshold grid."""
    _nonmated_spec(spec)
    total = engine.require_nonempty(spec)
    if grid is None:
        grid = default_grid(spec, workers=workers, block=block, backend=backend)
    else:
        grid = make_grid(grid)
    res = engine.comparison_pass(spec, grid, workers=workers, block=block, backend=backend)
    if res.npairs != total:
        raise AssertionError(f"engine enumerated {res.npairs} pairs, closed form says {total}")
    return FarCurve(grid, _suffix_counts(res.hist), total)


def nn_far_curve(spec: ComparisonSpec, grid=None, *, workers=None,
                 block=engine.DEFAULT_BLOCK, backend=None) -> FarCurve:
    """Nearest-neighbour FAR: one comparison per probe, at its best score."""
    _nonmated_spec(spec)
    if spec.total_comparisons() == 0:
        raise EmptyComparisonError("probe 0 has no qualifying partners")
    if grid is None:
        grid = default_grid(spec, workers=workers, block=block, backend=backend)
    else:
        grid = make_grid(grid)
    res = engine.comparison_pass(spec, grid, workers=workers, block=block, backend=backend)
    if (res.nn_count == 0).any():
        probe = int(np.argmax(res.nn_count == 0))
        raise EmptyComparisonError(f"probe {probe} has no qualifying partners")
    ranks = np.searchsorted(grid, res.nn, side="right")
    hist = np.bincount(ranks, minlength=grid.shape[0] + 1).astype(np.int64)
    return FarCurve(grid, _suffix_counts(hist), spec.probe.n)


def frr_curve(spec: ComparisonSpec, grid=None, *, workers=None,
              block=engine.DEFAULT_BLOCK, backend=None) -> FrrCurve:
    """False-rejection curve over all mated pairs."""
    if spec.mode != WITHIN_MATED:
        raise FormatError(f"expected a mated comparison, got mode {spec.mode}")
    total = spec.total_comparisons()
    if total == 0:
        raise EmptyComparisonError("no mated pairs (no label occurs twice)")
    if grid is None:
        grid = default_grid(spec, workers=workers, block=block, backend=backend)
    else:
        grid = make_grid(grid)
    res = engine.comparison_pass(spec, grid, workers=workers, block=block, backend=backend)
    if res.npairs != total:
        raise AssertionError(f"engine enumerated {res.npairs} pairs, closed form says {total}")
    return FrrCurve(grid, _prefix_counts(res.hist), total)


def roc_curve(mated: ComparisonSpec, nonmated: ComparisonSpec, grid=None, *,
              workers=None, block=engine.DEFAULT_BLOCK, backend=None) -> RocCurve:
    """(FAR, FRR) locus over a shared grid."""
    if grid is None:
        grid = default_grid(mated, nonmated, workers=workers, block=block, backend=backend)
    else:
        grid = make_grid(grid)
    far = far_curve(nonmated, grid, workers=workers, block=block, backend=backend)
    frr = frr_curve(mated, grid, workers=workers, block=block, backend=backend)
    return RocCurve(grid, far.far, frr.frr)


# ---------------------------------------------------------------------------
# threshold selection

def _fixup_max_count(target: float, total: int) -> int:
    # largest integer count with count/total <= target under float division
    m = int(target * total)
    while m + 1 <= total and (m + 1) / total <= target:
        m += 1
    while m > 0 and m / total > target:
        m -= 1
    return m


def threshold_for_far(spec: ComparisonSpec, target: float, *, workers=None,
                      block=engine.DEFAULT_BLOCK, backend=None) -> float:
    """Smallest observed score t with FAR(t) <= target.

    Falls back to max_score + 1ulp (FAR exactly 0) when even the top score
    is too frequent.  Rejects target <= 0 and targets below 1/total
    resolution.
    """
    _nonmated_spec(spec)
    total = engine.require_nonempty(spec)
    if not (target > 0.0):
        raise ResolutionError(f"target FAR must be positive, got {target}")
    if target * total < 1.0:
        raise ResolutionError(
            f"target below resolution: FAR {target:g} needs >= {math.ceil(1.0 / target)} "
            f"comparisons, have {total}")
    m = _fixup_max_count(target, total)
    lo, hi, n = engine.score_range(spec, workers=workers, block=block, backend=backend)
    if m >= total:
        return lo
    if lo == hi:
        return float(np.nextafter(hi, np.inf))
    # locate the (m+1)-th largest score v: then t = smallest observed score > v
    cand = np.linspace(lo, hi, 4096)
    res = engine.comparison_pass(spec, cand, workers=workers, block=block, backend=backend)
    suffix = res.hist[::-1].cumsum()[::-1]  # suffix[k] = #(rank >= k)
    ge = suffix[1:]                         # ge[t] = #(score >= cand[t])
    t_idx = int(np.max(np.nonzero(ge >= m + 1)[0]))
    bin_lo = cand[t_idx]
    bin_hi = cand[t_idx + 1] if t_idx + 1 < cand.shape[0] else np.inf
    above = int(ge[t_idx + 1]) if t_idx + 1 < cand.shape[0] else 0
    cap = int(ge[t_idx]) - above
    vals = engine.collect_scores(spec, bin_lo, bin_hi, cap, block=block, backend=backend)
    if vals.size != cap:
        raise AssertionError("score collection disagrees with histogram")
    vals[::-1].sort()  # descending
    v = float(vals[m - above])
    best, n_above = engine.min_above(spec, v, workers=workers, block=block, backend=backend)
    if n_above == 0:
        return float(np.nextafter(hi, np.inf))
    return float(best)


def frr_at_threshold(spec: ComparisonSpec, threshold: float, *, workers=None,
                     block=engine.DEFAULT_BLOCK, backend=None) -> float:
    """Fraction of mated comparisons scoring below `threshold`."""
    curve = frr_curve(spec, [threshold], workers=workers, block=block, backend=backend)
    return float(curve.frr[0])


def frr_at_far(mated: ComparisonSpec, nonmated: ComparisonSpec, target_far: float, *,
               workers=None, block=engine.DEFAULT_BLOCK, backend=None) -> tuple[float, float]:
    """Threshold achieving `target_far` on non-mated scores, and FRR there."""
    t = threshold_for_far(nonmated, target_far, workers=workers, block=block, backend=backend)
    return t, frr_at_threshold(mated, t, workers=workers, block=block, backend=backend)


# ---------------------------------------------------------------------------
# naive single-threaded oracles: same contracts, independent counting path

def _row_scores(rows_p, i, rows_g, j0, alpha, beta):
    # index-order accumulation over the feature dimension (engine convention)
    g = rows_g[j0:]
    acc = np.zeros(g.shape[0])
    p = rows_p[i]
    for k in range(rows_p.shape[1]):
        acc += p[k] * g[:, k]
    np.multiply(acc, alpha, out=acc)
    np.add(acc, beta, out=acc)
    return acc


def _naive_setup(spec: ComparisonSpec, grid):
    grid = make_grid(grid) if grid is not None else default_grid(spec)
    if spec.mode == BETWEEN:
        return grid, spec.probe.rows, spec.gallery.rows, None, None
    codes = spec.probe.label_codes()
    return grid, spec.probe.rows, spec.probe.rows, codes, codes


def far_curve_naive(spec: ComparisonSpec, grid=None) -> FarCurve:
    """Reference FAR: direct double loop over pairs, one probe row at a time."""
    _nonmated_spec(spec)
    total = engine.require_nonempty(spec)
    grid, rows_p, rows_g, cp, cg = _naive_setup(spec, grid)
    alpha, beta = spec.scale.alpha, spec.scale.beta
    hist = np.zeros(grid.shape[0] + 1, dtype=np.int64)
    for i in range(rows_p.shape[0]):
        if spec.mode == BETWEEN:
            s = _row_scores(rows_p, i, rows_g, 0, alpha, beta)
        else:
            s = _row_scores(rows_p, i, rows_g, i + 1, alpha, beta)
            s = s[cg[i + 1:] != cp[i]]
        if s.size:
            hist += np.bincount(np.searchsorted(grid, s, side="right"),
                                minlength=grid.shape[0] + 1)
    if int(hist.sum()) != total:
        raise AssertionError("naive oracle enumerated an unexpected pair count")
    return FarCurve(grid, _suffix_counts(hist), total)


def nn_far_curve_naive(spec: ComparisonSpec, grid=None) -> FarCurve:
    """Reference NN-FAR: per-probe max over a full scan of qualifying partners."""
    _nonmated_spec(spec)
    if spec.total_comparisons() == 0:
        raise EmptyComparisonError("probe 0 has no qualifying partners")
    grid, rows_p, rows_g, cp, cg = _naive_setup(spec, grid)
    alpha, beta = spec.scale.alpha, spec.scale.beta
    nn = np.empty(rows_p.shape[0])
    for i in range(rows_p.shape[0]):
        s = _row_scores(rows_p, i, rows_g, 0, alpha, beta)
        if spec.mode != BETWEEN:
            s = s[cg != cp[i]]
        if s.size == 0:
            raise EmptyComparisonError(f"probe {i} has no qualifying partners")
        nn[i] = s.max()
    hist = np.bincount(np.searchsorted(grid, nn, side="right"),
                       minlength=grid.shape[0] + 1).astype(np.int64)
    return FarCurve(grid, _suffix_counts(hist), rows_p.shape[0])


def frr_curve_naive(spec: ComparisonSpec, grid=None) -> FrrCurve:
    """Reference FRR over all same-label pairs."""
    if spec.mode != WITHIN_MATED:
        raise FormatError(f"expected a mated comparison, got mode {spec.mode}")
    total = spec.total_comparisons()
    if total == 0:
        raise EmptyComparisonError("no mated pairs (no label occurs twice)")
    grid, rows_p, rows_g, cp, cg = _naive_setup(spec, grid)
    alpha, beta = spec.scale.alpha, spec.scale.beta
    hist = np.zeros(grid.shape[0] + 1, dtype=np.int64)
    for i in range(rows_p.shape[0]):
        s = _row_scores(rows_p, i, rows_g, i + 1, alpha, beta)
        s = s[cg[i + 1:] == cp[i]]
        if s.size:
            hist += np.bincount(np.searchsorted(grid, s, side="right"),
                                minlength=grid.shape[0] + 1)
    if int(hist.sum()) != total:
        raise AssertionError("naive oracle enumerated an unexpected pair count")
    return FrrCurve(grid, _prefix_counts(hist), total)


# ---------------------------------------------------------------------------
# CSV output

def write_curve_csv(curve: FarCurve | FrrCurve, path) -> None:
    """threshold,count,total,rate with 10-significant-digit rates."""
    rates = curve.far if isinstance(curve, FarCurve) else curve.frr
    lines = ["threshold,count,total,rate"]
    for t, c, r in zip(curve.grid, curve.counts, rates):
        lines.append(f"{float(t)!r},{int(c)},{curve.total},{r:.10g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
