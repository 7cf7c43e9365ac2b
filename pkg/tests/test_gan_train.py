import numpy as np
import pytest

from idem import (DivergenceError, EmptyComparisonError, FormatError,
                  MixtureSpec, gen_identity_clouds)
from idem.gan import (LatentSpec, TrainConfig, TrainData, TrainState,
                      build_model, build_negative_pool, generate_identity_sets,
                      load_model, make_mated_pair_batch, sample_latent_pair,
                      sample_latent_pairs, save_model, train, train_step)
from idem.metrics import (ComparisonSpec, WITHIN_MATED, WITHIN_NONMATED,
                          frr_at_far, frr_curve)
from idem.embeddings import EmbeddingSet


def toy_data(K=60, m=4, seed=0):
    return gen_identity_clouds(MixtureSpec(K=K, m=m, dim=8, within_sigma=0.1, seed=seed))


def test_latent_pair_shares_identity_block():
    spec = LatentSpec(2, 2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z1, z2 = sample_latent_pair(spec, rng)
        assert np.array_equal(z1[:2], z2[:2])
        assert not np.array_equal(z1[2:], z2[2:])


def test_latent_moments():
    z1, z2 = sample_latent_pairs(LatentSpec(4, 4), 10_000, np.random.default_rng(1))
    both = np.concatenate([z1, z2[:, 4:]], axis=1)
    assert np.abs(both.mean(axis=0)).max() < 0.05
    assert np.abs(both.var(axis=0) - 1.0).max() < 0.1


def test_model_shape_invariants():
    model = build_model(d_x=8, latent=LatentSpec(8, 8), gen_hidden=(64, 64))
    assert model.critic.widths == [16, 128, 128, 1]
    assert model.generator.widths == [16, 64, 64, 8]
    from idem.gan.mlp import Mlp
    rng = np.random.default_rng(0)
    with pytest.raises(FormatError, match="twice"):
        from idem.gan.train import SdGanModel
        SdGanModel(Mlp.init([16, 64, 8], rng), Mlp.init([12, 128, 1], rng),
                   LatentSpec(8, 8), 0.05)
    with pytest.raises(FormatError, match="double"):
        from idem.gan.train import SdGanModel
        SdGanModel(Mlp.init([16, 64, 8], rng), Mlp.init([16, 100, 1], rng),
                   LatentSpec(8, 8), 0.05)


def test_negative_pool_single_cross_pair():
    es = EmbeddingSet("two", np.eye(2), labels=("a", "b"), normalized=True)
    pool = build_negative_pool(es, 0.5)
    assert len(pool) == 1
    assert sorted(pool.pairs[0].tolist()) == [0, 1]


def test_negative_pool_cutoff_vs_sort_oracle():
    data = toy_data(K=20, m=3, seed=2)
    q = 0.1
    pool = build_negative_pool(data, q)
    codes = data.label_codes()
    scores = data.rows @ data.rows.T
    iu = np.triu_indices(data.n, 1)
    cross = codes[iu[0]] != codes[iu[1]]
    vals = np.sort(scores[iu][cross])
    cutoff = vals[int(np.floor((vals.size - 1) * (1 - q)))]
    assert pool.cutoff == cutoff
    pair_scores = (data.rows[pool.pairs[:, 0]] * data.rows[pool.pairs[:, 1]]).sum(axis=1)
    assert pair_scores.min() >= pool.cutoff
    assert all(data.labels[i] != data.labels[j] for i, j in pool.pairs)


def test_negative_pool_requires_labels():
    es = EmbeddingSet("u", np.eye(3), labels=None, normalized=True)
    with pytest.raises(FormatError, match="labels"):
        build_negative_pool(es, 0.1)


def test_mated_pair_batch_label_mismatch():
    data = toy_data(K=5, m=2, seed=3)
    with pytest.raises(FormatError, match="mismatched labels"):
        make_mated_pair_batch(data, np.array([0]), np.array([2]))
    ok = make_mated_pair_batch(data, np.array([0]), np.array([1]))
    assert ok.shape == (1, 16)


def test_zero_clip_degenerates_critic():
    data = toy_data(seed=4)
    model = build_model(d_x=8, latent=LatentSpec(8, 8), clip=0.0, seed=0)
    cfg = TrainConfig(variant="sdgan", n_critic=1, batch=8)
    state = TrainState(model, cfg)
    train_step(model, state, TrainData(data), None, cfg, np.random.default_rng(0))
    assert all((w == 0).all() for w in model.critic.weights)
    from idem.gan import sdgan_gen_grad
    _, grads = sdgan_gen_grad(model, np.zeros((4, 16)), np.zeros((4, 16)))
    assert all((gw == 0).all() and (gb == 0).all() for gw, gb in grads)


def test_clipping_invariant():
    data = toy_data(seed=5)
    model = build_model(d_x=8, latent=LatentSpec(8, 8), clip=0.05, seed=1)
    train(model, data, TrainConfig(variant="triplet", batch=16), steps=5, seed=7)
    bound = max(max(np.abs(w).max(), np.abs(b).max())
                for w, b in zip(model.critic.weights, model.critic.biases))
    assert bound <= 0.05


def test_train_bit_reproducible():
    data = toy_data(seed=6)
    runs = []
    for _ in range(2):
        model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=2)
        trace = train(model, data, TrainConfig(batch=16), steps=4, seed=9)
        runs.append((model.generator.params_flat(), model.critic.params_flat(), trace))
    assert np.array_equal(runs[0][0].view(np.uint64), runs[1][0].view(np.uint64))
    assert np.array_equal(runs[0][1].view(np.uint64), runs[1][1].view(np.uint64))
    assert runs[0][2] == runs[1][2]


def test_zero_steps_leaves_model_unchanged():
    data = toy_data(seed=7)
    model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=3)
    before = model.generator.params_flat().copy(), model.critic.params_flat().copy()
    trace = train(model, data, TrainConfig(), steps=0, seed=0)
    assert trace == []
    assert np.array_equal(before[0], model.generator.params_flat())
    assert np.array_equal(before[1], model.critic.params_flat())


def test_log_identity_matches_recomputation():
    data = toy_data(seed=8)
    model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=4)
    cfg = TrainConfig(variant="triplet", batch=16)
    trace = train(model, data, cfg, steps=3, seed=11)
    for row in trace:
        expect = (row["d_real"] - 0.5 * (row["d_fake"] + row["d_imposter"])
                  + cfg.lam * (row["d_fake"] - row["d_imposter"]) ** 2)
        assert row["loss_d"] == expect


def test_divergence_guard():
    data = toy_data(seed=9)
    model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=5)
    cfg = TrainConfig(variant="sdgan", optimizer="sgd", lr=1e300, n_critic=1, batch=4)
    with np.errstate(all="ignore"), pytest.raises(DivergenceError, match=r"step \d+"):
        train(model, data, cfg, steps=2, seed=1)


def test_config_defaults_and_latent_validation():
    cfg = TrainConfig()
    assert cfg.lam == 0.001
    assert cfg.negative_pool_quantile == 0.05
    assert cfg.n_critic == 5
    with pytest.raises(FormatError):
        LatentSpec(0, 4)
    with pytest.raises(FormatError):
        TrainConfig(variant="wasserstein-ish")
    with pytest.raises(FormatError):
        TrainConfig(lam=-1.0)


def test_train_2000_steps_under_60s():
    import time
    data = gen_identity_clouds(MixtureSpec(K=500, m=4, dim=8, within_sigma=0.1, seed=12))
    model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=10)
    start = time.perf_counter()
    trace = train(model, data, TrainConfig(variant="triplet"), steps=2000, seed=16)
    elapsed = time.perf_counter() - start
    assert len(trace) == 2000
    assert model.finite()
    assert elapsed < 60.0, f"2000 steps took {elapsed:.1f}s"


def test_generate_identity_sets_protocol():
    model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=6)
    es = generate_identity_sets(model, 50, 10, seed=3)
    assert es.n == 500 and len(set(es.labels)) == 50
    assert es.normalized
    again = generate_identity_sets(model, 50, 10, seed=3)
    assert np.array_equal(es.rows.view(np.uint64), again.rows.view(np.uint64))
    single = generate_identity_sets(model, 20, 1, seed=4)
    with pytest.raises(EmptyComparisonError):
        frr_curve(ComparisonSpec(WITHIN_MATED, single), [0.5])


def test_training_improves_mated_frr():
    data = toy_data(K=200, m=4, seed=10)
    untrained = build_model(d_x=8, latent=LatentSpec(8, 8), seed=7)
    trained = build_model(d_x=8, latent=LatentSpec(8, 8), seed=7)
    train(trained, data, TrainConfig(variant="triplet"), steps=400, seed=13)

    def frr_of(model):
        gen = generate_identity_sets(model, 150, 6, seed=21)
        return frr_at_far(ComparisonSpec(WITHIN_MATED, gen),
                          ComparisonSpec(WITHIN_NONMATED, gen), 1e-2)[1]

    assert frr_of(trained) < frr_of(untrained)


def test_trained_model_identity_coherence():
    data = toy_data(K=200, m=4, seed=11)
    model = build_model(d_x=8, latent=LatentSpec(8, 8), seed=8)
    train(model, data, TrainConfig(variant="triplet"), steps=400, seed=14)
    gen = generate_identity_sets(model, 100, 5, seed=15)
    codes = gen.label_codes()
    sims = gen.rows @ gen.rows.T
    same = codes[:, None] == codes[None, :]
    off_diag = ~np.eye(gen.n, dtype=bool)
    within = sims[same & off_diag].mean()
    cross = sims[~same].mean()
    assert within > cross


def test_checkpoint_round_trip(tmp_path):
    model = build_model(d_x=6, latent=LatentSpec(3, 5), gen_hidden=(10, 12), clip=0.07, seed=9)
    path = tmp_path / "m.sdgt"
    save_model(model, path)
    back = load_model(path)
    assert back.latent == LatentSpec(3, 5)
    assert back.clip == 0.07
    assert np.array_equal(back.generator.params_flat(), model.generator.params_flat())
    assert np.array_equal(back.critic.params_flat(), model.critic.params_flat())
    save_model(back, tmp_path / "m2.sdgt")
    assert path.read_bytes() == (tmp_path / "m2.sdgt").read_bytes()
    (tmp_path / "junk.sdgt").write_bytes(b"NOPE" + path.read_bytes()[4:])
    with pytest.raises(FormatError, match="magic"):
        load_model(tmp_path / "junk.sdgt")


def test_train_data_requirements():
    with pytest.raises(FormatError, match="labeled"):
        TrainData(EmbeddingSet("u", np.eye(3), labels=None, normalized=True))
    singles = EmbeddingSet("s", np.eye(3), labels=("a", "b", "c"), normalized=True)
    with pytest.raises(FormatError, match=">= 2 rows"):
        TrainData(singles)
