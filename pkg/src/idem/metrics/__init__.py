from .engine import (BETWEEN, DEFAULT_BLOCK, WITHIN_MATED, WITHIN_NONMATED,
                     ComparisonSpec, resolve_backend)
from .curves import (FarCurve, FrrCurve, RocCurve, default_grid, far_curve,
                     far_curve_naive, frr_at_far, frr_at_threshold, frr_curve,
                     frr_curve_naive, make_grid, nn_far_curve,
                     nn_far_curve_naive, roc_curve, threshold_for_far,
                     write_curve_csv)
from .report import (OverfitReport, binomial_sigma, distinguishable_identities,
                     excess_flags, mode_collapse_fraction, overfit_report)

__all__ = [
    "BETWEEN", "DEFAULT_BLOCK", "WITHIN_MATED", "WITHIN_NONMATED",
    "ComparisonSpec", "resolve_backend",
    "FarCurve", "FrrCurve", "RocCurve", "default_grid", "far_curve",
    "far_curve_naive", "frr_at_far", "frr_at_threshold", "frr_curve",
    "frr_curve_naive", "make_grid", "nn_far_curve", "nn_far_curve_naive",
    "roc_curve", "threshold_for_far", "write_curve_csv",
    "OverfitReport", "binomial_sigma", "distinguishable_identities",
    "excess_flags", "mode_collapse_fraction", "overfit_report",
]
