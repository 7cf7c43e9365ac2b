import numpy as np
import pytest

from idem import (EmbeddingSet, FormatError, MixtureSpec, PathologySpec,
                  gen_identity_clouds, make_fake_set)
from idem.metrics import (ComparisonSpec, WITHIN_NONMATED, binomial_sigma,
                          distinguishable_identities, far_curve,
                          mode_collapse_fraction, overfit_report,
                          threshold_for_far)


def test_distinguishable_identities():
    assert distinguishable_identities(1e-4) == 10_000.0
    assert distinguishable_identities(0.82e-3) == pytest.approx(1219.5, abs=0.1)
    assert distinguishable_identities(1.0) == 1.0
    with pytest.raises(FormatError):
        distinguishable_identities(0.0)
    with pytest.raises(FormatError):
        distinguishable_identities(-0.1)


def test_mode_collapse_fraction():
    assert mode_collapse_fraction(1.00e-4, 0.82e-3) == pytest.approx(0.122, abs=5e-4)
    assert mode_collapse_fraction(1.29e-3, 5.80e-3) == pytest.approx(0.222, abs=5e-4)
    assert mode_collapse_fraction(0.37, 0.37) == 1.0
    with pytest.raises(FormatError):
        mode_collapse_fraction(0.0, 0.1)


def test_binomial_sigma_scalar():
    s = binomial_sigma(np.array([50]), 1000, np.array([50]), 1000)
    p = 100 / 2000
    assert s[0] == pytest.approx(np.sqrt(p * (1 - p) * (2 / 1000)))


def test_report_requires_labeled_real():
    unl = EmbeddingSet("u", np.eye(4), labels=None, normalized=True)
    with pytest.raises(FormatError, match="labels"):
        overfit_report(unl, unl)


def test_exact_copy_is_maximal_overfit():
    real = gen_identity_clouds(MixtureSpec(K=50, m=2, dim=8, within_sigma=0.1, seed=0))
    fake = EmbeddingSet("copy", np.array(real.rows), labels=None, normalized=True)
    report = overfit_report(real, fake)
    nn = report.curves["fake_vs_real_nn"]
    below_max = report.grid <= 1.0 - 1e-9  # self-scores sit within 1ulp of 1.0
    assert below_max.any()
    assert (nn.far[below_max] == 1.0).all()
    assert report.overfit


def test_memorized_flags_honest_does_not():
    real = gen_identity_clouds(MixtureSpec(K=800, m=1, dim=32, within_sigma=0.0, seed=3))
    mem = make_fake_set(real, PathologySpec(memorize_fraction=0.05, perturb_eps=0.05),
                        800, seed=5)
    hon = make_fake_set(real, PathologySpec(), 800, seed=6)
    assert overfit_report(real, mem).overfit
    r = overfit_report(real, hon)
    assert not r.overfit


def test_collapse_flagged_and_quantified():
    real = gen_identity_clouds(MixtureSpec(K=600, m=1, dim=16, within_sigma=0.0, seed=7))
    fake = make_fake_set(real, PathologySpec(collapse_k=5, collapse_sigma=0.05),
                         600, seed=8)
    report = overfit_report(real, fake)
    assert report.collapse
    t = threshold_for_far(ComparisonSpec(WITHIN_NONMATED, real), 1e-2)
    far_fake = far_curve(ComparisonSpec(WITHIN_NONMATED, fake), [t]).far[0]
    d = distinguishable_identities(far_fake)
    assert 2.5 <= d <= 10.0  # ~5 collapse centers


def test_report_json_deterministic():
    real = gen_identity_clouds(MixtureSpec(K=30, m=2, dim=8, within_sigma=0.2, seed=9))
    fake = make_fake_set(real, PathologySpec(), 50, seed=10)
    grid = np.linspace(-1, 1, 32)
    a = overfit_report(real, fake, grid, workers=1).to_json()
    b = overfit_report(real, fake, grid, workers=2, block=17).to_json()
    assert a == b
    assert '"overfit": false' in a


def test_report_curve_names_and_totals():
    real = gen_identity_clouds(MixtureSpec(K=20, m=3, dim=8, within_sigma=0.2, seed=11))
    fake = make_fake_set(real, PathologySpec(), 40, seed=12)
    report = overfit_report(real, fake, np.linspace(-1, 1, 16))
    names = set(report.curves)
    assert names == {"real_vs_real", "fake_vs_real", "fake_vs_fake",
                     "real_vs_real_nn", "fake_vs_real_nn", "fake_vs_fake_nn"}
    assert report.curves["fake_vs_real"].total == 40 * 60
    assert report.curves["fake_vs_fake"].total == 40 * 39 // 2  # unlabeled: all pairs
    assert report.curves["real_vs_real_nn"].total == 60
