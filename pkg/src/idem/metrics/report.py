"""Identity-overfitting and mode-collapse report over a real/fake set pair.

The report compares three score distributions on one shared threshold grid:
Real-vs-Real (within, non-mated), Fake-vs-Real (between sets), and
Fake-vs-Fake (within; all pairs when the fake set is unlabeled).  A
comparison is flagged at a threshold when its FAR exceeds the Real-vs-Real
FAR by more than three pooled-binomial standard deviations — the testable
stand-in for "matching frequencies are in close agreement".
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..embeddings import EmbeddingSet
from ..errors import FormatError
from . import engine
from .curves import FarCurve, _suffix_counts, default_grid, make_grid
from .engine import BETWEEN, WITHIN_NONMATED, ComparisonSpec


def distinguishable_identities(far: float) -> float:
    """Population size separable at an operating point: 1/FAR."""
    if not (far > 0.0):
        raise FormatError(f"FAR must be positive, got {far}")
    return 1.0 / far


def mode_collapse_fraction(far_real: float, far_fake: float) -> float:
    """Fraction of the real identity space spanned by the fake set.

    Equals distinguishable_identities(fake) / distinguishable_identities(real)
    at a common threshold.
    """
    if not (far_real > 0.0 and far_fake > 0.0):
        raise FormatError(f"FARs must be positive, got ({far_real}, {far_fake})")
    return far_real / far_fake


def binomial_sigma(count_a: np.ndarray, total_a: int,
                   count_b: np.ndarray, total_b: int) -> np.ndarray:
    """Pooled-binomial std dev of the difference between two rates."""
    p = (np.asarray(count_a, dtype=np.float64) + np.asarray(count_b, dtype=np.float64)) \
        / (total_a + total_b)
    return np.sqrt(p * (1.0 - p) * (1.0 / total_a + 1.0 / total_b))


def excess_flags(curve: FarCurve, baseline: FarCurve, nsigma: float = 3.0) -> np.ndarray:
    """Per-threshold: curve's FAR exceeds baseline's by more than nsigma bands."""
    sigma = binomial_sigma(curve.counts, curve.total, baseline.counts, baseline.total)
    return curve.far > baseline.far + nsigma * sigma


FLAG_FRACTION = 0.05


@dataclass(frozen=True)
class OverfitReport:
    """Per-threshold 3-sigma flags plus summary booleans.

    A summary flag raises only when more than FLAG_FRACTION of grid points
    exceed the band (on the all-pairs or the NN curves): isolated 3-sigma
    crossings among hundreds of correlated thresholds are expected null
    noise, so "in agreement" means within-band at >= 95% of grid points.
    """

    grid: np.ndarray
    curves: dict          # name -> FarCurve; names: real_vs_real, fake_vs_real,
                          # fake_vs_fake, and *_nn variants
    overfit_flags: np.ndarray
    overfit_flags_nn: np.ndarray
    collapse_flags: np.ndarray
    collapse_flags_nn: np.ndarray

    @property
    def overfit(self) -> bool:
        return bool(max(self.overfit_flags.mean(),
                        self.overfit_flags_nn.mean()) > FLAG_FRACTION)

    @property
    def collapse(self) -> bool:
        return bool(max(self.collapse_flags.mean(),
                        self.collapse_flags_nn.mean()) > FLAG_FRACTION)

    def to_json_dict(self) -> dict:
        out = {
            "grid": self.grid.tolist(),
            "curves": {
                name: {
                    "count": c.counts.tolist(),
                    "total": c.total,
                    "rate": c.far.tolist(),
                }
                for name, c in self.curves.items()
            },
            "overfit": self.overfit,
            "collapse": self.collapse,
            "overfit_flags": self.overfit_flags.tolist(),
            "overfit_flags_nn": self.overfit_flags_nn.tolist(),
            "collapse_flags": self.collapse_flags.tolist(),
            "collapse_flags_nn": self.collapse_flags_nn.tolist(),
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1)


def _pass_to_curves(spec, grid, n_probe, *, workers, block, backend):
    res = engine.comparison_pass(spec, grid, workers=workers, block=block, backend=backend)
    allpairs = FarCurve(grid, _suffix_counts(res.hist), res.npairs)
    ranks = np.searchsorted(grid, res.nn, side="right")
    hist = np.bincount(ranks, minlength=grid.shape[0] + 1).astype(np.int64)
    nn = FarCurve(grid, _suffix_counts(hist), n_probe)
    return allpairs, nn, res.nn_count


def overfit_report(real: EmbeddingSet, fake: EmbeddingSet, grid=None, *,
                   workers=None, block=engine.DEFAULT_BLOCK, backend=None,
                   nsigma: float = 3.0) -> OverfitReport:
    """Full overfitting / collapse comparison of a fake set against its real set.

    `real` must be labeled; an unlabeled `fake` counts every within-fake
    pair as non-mated (distinct-identity assumption for raw GAN samples).
    """
    if real.labels is None:
        raise FormatError("labels required on the real set")
    rvr = ComparisonSpec(WITHIN_NONMATED, real)
    fvr = ComparisonSpec(BETWEEN, fake, real)
    fvf = ComparisonSpec(WITHIN_NONMATED, fake)
    for spec in (rvr, fvr, fvf):
        engine.require_nonempty(spec)
    if grid is None:
        grid = default_grid(rvr, fvr, fvf, workers=workers, block=block, backend=backend)
    else:
        grid = make_grid(grid)

    opts = dict(workers=workers, block=block, backend=backend)
    rvr_all, rvr_nn, rvr_cnt = _pass_to_curves(rvr, grid, real.n, **opts)
    fvr_all, fvr_nn, _ = _pass_to_curves(fvr, grid, fake.n, **opts)
    fvf_all, fvf_nn, fvf_cnt = _pass_to_curves(fvf, grid, fake.n, **opts)
    for cnt, what in ((rvr_cnt, "real"), (fvf_cnt, "fake")):
        if (cnt == 0).any():
            raise FormatError(
                f"{what} set has a probe without non-mated partners (single identity?)")

    return OverfitReport(
        grid=grid,
        curves={
            "real_vs_real": rvr_all, "fake_vs_real": fvr_all, "fake_vs_fake": fvf_all,
            "real_vs_real_nn": rvr_nn, "fake_vs_real_nn": fvr_nn, "fake_vs_fake_nn": fvf_nn,
        },
        overfit_flags=excess_flags(fvr_all, rvr_all, nsigma),
        overfit_flags_nn=excess_flags(fvr_nn, rvr_nn, nsigma),
        collapse_flags=excess_flags(fvf_all, rvr_all, nsigma),
        collapse_flags_nn=excess_flags(fvf_nn, rvr_nn, nsigma),
    )
