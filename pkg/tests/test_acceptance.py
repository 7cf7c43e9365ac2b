"""Acceptance gate: every criterion at its stated tolerance and budget.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from idem import (EmbeddingSet, MixtureSpec, PathologySpec,
                  gen_identity_clouds, make_fake_set)
from idem.gan import (LatentSpec, Mlp, TrainConfig, build_model,
                      generate_identity_sets, pair_batch, sdgan_critic_grad,
                      sdgan_gen_grad, sdgan_losses, train, triplet_critic_grad,
                      triplet_losses, wgan_critic_grad, wgan_gen_grad,
                      wgan_losses)
from idem.metrics import (BETWEEN, WITHIN_MATED, WITHIN_NONMATED,
                          ComparisonSpec, binomial_sigma,
                          distinguishable_identities, far_curve,
                          far_curve_naive, frr_at_far, frr_curve,
                          frr_curve_naive, make_grid, mode_collapse_fraction,
                          nn_far_curve, nn_far_curve_naive, overfit_report,
                          threshold_for_far)


@contextmanager
def criterion(number, description, budget_s):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {description}")
        raise
    elapsed = time.perf_counter() - start
    print(f"[PASS] criterion {number}: {description} ({elapsed:.1f}s, budget {budget_s}s)")
    assert elapsed < budget_s, f"criterion {number} exceeded its {budget_s}s budget"


def mixture(K, m, dim=16, sigma=0.2, seed=0, name="mix"):
    return gen_identity_clouds(MixtureSpec(K=K, m=m, dim=dim, within_sigma=sigma,
                                           seed=seed, name=name))


def test_criterion_1_collapse_arithmetic():
    with criterion(1, "collapse-fraction and distinguishable-identity arithmetic", 5):
        assert mode_collapse_fraction(1.00e-4, 0.82e-3) == pytest.approx(0.122, abs=0.0005)
        assert mode_collapse_fraction(1.29e-3, 5.80e-3) == pytest.approx(0.222, abs=0.0005)
        assert distinguishable_identities(1e-4) == 10_000.0


def test_criterion_2_oracle_equivalence():
    sizes = {10: (5, 2), 100: (20, 5), 1000: (200, 5), 5000: (1000, 5)}
    grid = make_grid(np.linspace(-1.0, 1.0, 512))
    with criterion(2, "blocked == naive oracle on 20 seeded datasets", 120):
        checked = 0
        for n, (K, m) in sizes.items():
            for seed in range(5):
                ds = mixture(K, m, seed=seed)
                gallery = mixture(K, m, seed=seed + 77, name="g")
                within = ComparisonSpec(WITHIN_NONMATED, ds)
                between = ComparisonSpec(BETWEEN, ds, gallery)
                mated = ComparisonSpec(WITHIN_MATED, ds)
                for blocked, naive, spec in [
                    (far_curve, far_curve_naive, within),
                    (far_curve, far_curve_naive, between),
                    (nn_far_curve, nn_far_curve_naive, within),
                    (nn_far_curve, nn_far_curve_naive, between),
                    (frr_curve, frr_curve_naive, mated),
                ]:
                    a = blocked(spec, grid)
                    b = naive(spec, grid)
                    assert np.array_equal(a.counts, b.counts), (n, seed, spec.mode)
                    assert a.total == b.total
                checked += 1
        assert checked == 20


def test_criterion_3_parallel_determinism():
    with criterion(3, "identical counts across workers {1,2,8} x blocks {64,1024}", 60):
        ds = mixture(1000, 5, seed=31)
        gallery = mixture(1000, 5, seed=32, name="g")
        grid = make_grid(np.linspace(-1.0, 1.0, 512))
        specs = [ComparisonSpec(WITHIN_NONMATED, ds),
                 ComparisonSpec(BETWEEN, ds, gallery),
                 ComparisonSpec(WITHIN_MATED, ds)]
        ops = [far_curve, far_curve, frr_curve]
        refs = [op(spec, grid, workers=1, block=1024) for op, spec in zip(ops, specs)]
        nn_ref = nn_far_curve(specs[0], grid, workers=1, block=1024)
        for workers in (1, 2, 8):
            for block in (64, 1024):
                for op, spec, ref in zip(ops, specs, refs):
                    res = op(spec, grid, workers=workers, block=block)
                    assert np.array_equal(res.counts, ref.counts), (workers, block, spec.mode)
                res = nn_far_curve(specs[0], grid, workers=workers, block=block)
                assert np.array_equal(res.counts, nn_ref.counts), (workers, block, "nn")


def test_criterion_4_honest_generator_null():
    with criterion(4, "honest fake within binomial 3-sigma of real at >=95% of grid", 180):
        for seed in range(10):
            real = gen_identity_clouds(MixtureSpec(K=2000, m=5, dim=32,
                                                   within_sigma=0.5, seed=seed))
            fake = gen_identity_clouds(MixtureSpec(K=2000, m=5, dim=32,
                                                   within_sigma=0.5, seed=seed + 500,
                                                   name="fake"))
            rvr = ComparisonSpec(WITHIN_NONMATED, real)
            fvr = ComparisonSpec(BETWEEN, fake, real)
            from idem.metrics import default_grid
            grid = default_grid(rvr, fvr)
            a = far_curve(fvr, grid)
            b = far_curve(rvr, grid)
            sigma = binomial_sigma(a.counts, a.total, b.counts, b.total)
            within_band = np.abs(a.far - b.far) <= 3.0 * sigma
            assert within_band.mean() >= 0.95, (seed, within_band.mean())


def test_criterion_5_pathology_detection():
    with criterion(5, "memorization flags 9/10 seeds each way; collapse in [50,200]", 300):
        detected = quiet = 0
        for seed in range(10):
            real = gen_identity_clouds(MixtureSpec(K=2000, m=1, dim=32,
                                                   within_sigma=0.0, seed=seed))
            mem = make_fake_set(real, PathologySpec(memorize_fraction=0.05,
                                                    perturb_eps=0.05), 2000,
                                seed=seed + 100)
            hon = make_fake_set(real, PathologySpec(), 2000, seed=seed + 200)
            detected += overfit_report(real, mem).overfit
            quiet += not overfit_report(real, hon).overfit
        assert detected >= 9, f"memorization detected in only {detected}/10 seeds"
        assert quiet >= 9, f"honest fake flagged in {10 - quiet}/10 seeds"

        real = gen_identity_clouds(MixtureSpec(K=10_000, m=1, dim=16,
                                               within_sigma=0.0, seed=41))
        fake = make_fake_set(real, PathologySpec(collapse_k=100, collapse_sigma=0.05),
                             10_000, seed=42)
        t = threshold_for_far(ComparisonSpec(WITHIN_NONMATED, real), 1e-3)
        far_fake = far_curve(ComparisonSpec(WITHIN_NONMATED, fake), [t]).far[0]
        d = distinguishable_identities(far_fake)
        assert 50.0 <= d <= 200.0, f"distinguishable identities {d}"


def _flatten(grads):
    return np.concatenate([np.concatenate([gw.ravel(), gb.ravel()]) for gw, gb in grads])


def _fd(value_fn, net, h=1e-5):
    flat = net.params_flat()
    out = np.empty_like(flat)
    for p in range(flat.size):
        orig = flat[p]
        flat[p] = orig + h
        net.set_params_flat(flat)
        up = value_fn()
        flat[p] = orig - h
        net.set_params_flat(flat)
        down = value_fn()
        flat[p] = orig
        net.set_params_flat(flat)
        out[p] = (up - down) / (2.0 * h)
    return out


def test_criterion_6_gradient_correctness():
    with criterion(6, "analytic gradients of all six losses vs central differences", 60):
        worst = 0.0
        rng = np.random.default_rng(2024)
        for trial in range(10):
            model = build_model(d_x=2, latent=LatentSpec(2, 2), gen_hidden=(4,),
                                seed=trial)
            for net in (model.generator, model.critic):
                flat = net.params_flat()
                net.set_params_flat(flat + 0.3 * rng.standard_normal(flat.size))
            critic1 = Mlp.init([2, 4, 1], np.random.default_rng(trial + 90))
            x = rng.standard_normal((5, 2))
            xp, xbar = rng.standard_normal((2, 5, 4))
            z = rng.standard_normal((5, 4))
            z1 = rng.standard_normal((5, 4))
            z2 = rng.standard_normal((5, 4))
            lam = 0.001
            gen = model.generator
            checks = [
                (critic1, lambda: wgan_losses(critic1, gen, x, z)[0],
                 wgan_critic_grad(critic1, gen, x, z)[1]),
                (gen, lambda: wgan_losses(critic1, gen, x, z)[1],
                 wgan_gen_grad(critic1, gen, z)[1]),
                (model.critic, lambda: sdgan_losses(model, xp, z1, z2)[0],
                 sdgan_critic_grad(model, xp, z1, z2)[1]),
                (gen, lambda: sdgan_losses(model, xp, z1, z2)[1],
                 sdgan_gen_grad(model, z1, z2)[1]),
                (model.critic, lambda: triplet_losses(model, xp, xbar, z1, z2, lam)[0],
                 triplet_critic_grad(model, xp, xbar, z1, z2, lam)[1]),
                (gen, lambda: triplet_losses(model, xp, xbar, z1, z2, lam)[1],
                 sdgan_gen_grad(model, z1, z2)[1]),
            ]
            for net, value_fn, analytic in checks:
                fd = _fd(value_fn, net)
                an = _flatten(analytic)
                rel = np.abs(an - fd) / np.maximum.reduce(
                    [np.abs(an), np.abs(fd), np.full_like(fd, 1e-6)])
                worst = max(worst, float(rel.max()))
        assert worst <= 1e-4, f"max relative gradient error {worst}"


def test_criterion_7_triplet_reduction_identity():
    with criterion(7, "triplet loss with lam=0 and xbar=fake equals the paired loss", 5):
        rng = np.random.default_rng(7)
        for seed in range(5):
            model = build_model(d_x=3, latent=LatentSpec(2, 2), gen_hidden=(6,),
                                seed=seed)
            x = rng.standard_normal((8, 6))
            z1 = rng.standard_normal((8, 4))
            z2 = rng.standard_normal((8, 4))
            fake = pair_batch(model.generator(z1), model.generator(z2))
            t_d, t_g = triplet_losses(model, x, fake, z1, z2, 0.0)
            s_d, s_g = sdgan_losses(model, x, z1, z2)
            assert abs(t_d - s_d) <= 1e-12 and abs(t_g - s_g) <= 1e-12


def test_criterion_8_directional_disentanglement():
    with criterion(8, "median FRR@FAR=1e-2: triplet <= plain, both beat untrained", 900):
        def eval_frr(model, seed):
            gen = generate_identity_sets(model, 400, 8, seed=seed)
            return frr_at_far(ComparisonSpec(WITHIN_MATED, gen),
                              ComparisonSpec(WITHIN_NONMATED, gen), 1e-2)[1]

        results = {"triplet": [], "sdgan": [], "untrained": []}
        for s in range(5):
            data = gen_identity_clouds(MixtureSpec(K=500, m=4, dim=8,
                                                   within_sigma=0.10, seed=1000 + s))
            untrained = build_model(d_x=8, latent=LatentSpec(8, 8), seed=s)
            results["untrained"].append(eval_frr(untrained, seed=5 + s))
            for variant in ("triplet", "sdgan"):
                model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=s)
                train(model, data, TrainConfig(variant=variant), steps=1500, seed=42 + s)
                results[variant].append(eval_frr(model, seed=5 + s))
        med = {k: float(np.median(v)) for k, v in results.items()}
        print(f"  medians: {med}")
        assert med["triplet"] <= med["sdgan"], med
        assert med["triplet"] < med["untrained"], med
        assert med["sdgan"] < med["untrained"], med


def test_criterion_9_protocol_shape():
    with criterion(9, "1000 identities x 10 rows -> 10,000 rows / 45,000 mated pairs", 30):
        model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=0)
        es = generate_identity_sets(model, 1000, 10, seed=0)
        assert es.n == 10_000
        assert len(set(es.labels)) == 1000
        assert ComparisonSpec(WITHIN_MATED, es).total_comparisons() == 45_000
