"""Paired-critic GAN at desk scale: model, training loop, sampling, checkpoints.

The generator maps a latent pair-sharing vector [z_id, z_iv] to a data-space
row; the critic consumes channel-concatenated row pairs and is kept
Lipschitz by weight clipping after every update.  Training minimizes the
losses in losses.py as written; it is single-threaded and bit-reproducible
for a fixed seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..embeddings import EmbeddingSet
from ..errors import DivergenceError, FormatError
from .losses import (pair_batch, sdgan_critic_grad, sdgan_gen_grad,
                     triplet_critic_grad)
from .mlp import Mlp
from .pool import HardNegativePool, build_negative_pool

VARIANTS = ("sdgan", "triplet")


@dataclass(frozen=True)
class LatentSpec:
    d_id: int
    d_iv: int

    def __post_init__(self):
        if self.d_id < 1 or self.d_iv < 1:
            raise FormatError(f"latent dims must be >= 1, got ({self.d_id}, {self.d_iv})")

    @property
    def total(self) -> int:
        return self.d_id + self.d_iv


class SdGanModel:
    """Generator + paired critic with a latent identity/variation split."""

    def __init__(self, generator: Mlp, critic: Mlp, latent: LatentSpec, clip: float):
        if clip < 0:
            raise FormatError(f"clip bound must be >= 0, got {clip}")
        d_x = generator.widths[-1]
        if generator.widths[0] != latent.total:
            raise FormatError("generator input width must equal d_id + d_iv")
        if critic.widths[0] != 2 * d_x:
            raise FormatError("critic input width must be twice the data dimension")
        if critic.widths[1:-1] != [2 * w for w in generator.widths[1:-1]]:
            raise FormatError("critic hidden widths must double the generator's")
        self.generator = generator
        self.critic = critic
        self.latent = latent
        self.clip = float(clip)

    @property
    def d_x(self) -> int:
        return self.generator.widths[-1]

    def copy(self) -> "SdGanModel":
        return SdGanModel(self.generator.copy(), self.critic.copy(), self.latent, self.clip)

    def finite(self) -> bool:
        return self.generator.finite() and self.critic.finite()


def build_model(d_x: int, latent: LatentSpec, gen_hidden=(64, 64),
                clip: float = 0.05, seed: int = 0) -> SdGanModel:
    rng = np.random.default_rng(seed)
    gen = Mlp.init([latent.total, *gen_hidden, d_x], rng)
    critic = Mlp.init([2 * d_x, *(2 * w for w in gen_hidden), 1], rng)
    return SdGanModel(gen, critic, latent, clip)


@dataclass(frozen=True)
class TrainConfig:
    """Triplet/plain training knobs; defaults follow the loss-weight and
    critic-schedule choices that worked at image scale (lam) plus desk-scale
    optimizer settings."""

    variant: str = "triplet"
    lam: float = 0.001
    negative_pool_quantile: float = 0.05
    n_critic: int = 5
    batch: int = 64
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.0
    beta2: float = 0.99
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise FormatError(f"unknown variant {self.variant!r}")
        if self.lam < 0:
            raise FormatError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 < self.negative_pool_quantile < 1.0:
            raise FormatError("negative_pool_quantile must be in (0,1)")
        if self.n_critic < 1 or self.batch < 1:
            raise FormatError("n_critic and batch must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise FormatError(f"unknown optimizer {self.optimizer!r}")


# ---------------------------------------------------------------------------
# latent and data sampling

def sample_latent_pair(latent: LatentSpec, rng: np.random.Generator):
    """One standard-Gaussian latent pair sharing the identity subvector."""
    z1, z2 = sample_latent_pairs(latent, 1, rng)
    return z1[0], z2[0]


def sample_latent_pairs(latent: LatentSpec, batch: int, rng: np.random.Generator):
    z_id = rng.standard_normal((batch, latent.d_id))
    iv1 = rng.standard_normal((batch, latent.d_iv))
    iv2 = rng.standard_normal((batch, latent.d_iv))
    return np.concatenate([z_id, iv1], axis=1), np.concatenate([z_id, iv2], axis=1)


class TrainData:
    """Real set indexed by identity, restricted to multi-row identities."""

    def __init__(self, dataset: EmbeddingSet):
        if dataset.labels is None:
            raise FormatError("training data must be labeled")
        if not dataset.normalized:
            raise FormatError("training data must be normalized")
        codes = dataset.label_codes()
        order = np.argsort(codes, kind="stable")
        groups = np.split(order, np.unique(codes[order], return_index=True)[1][1:])
        self.groups = [g for g in groups if g.size >= 2]
        if not self.groups:
            raise FormatError("training data has no identity with >= 2 rows")
        self.dataset = dataset

    def mated_pair_batch(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        which = rng.integers(len(self.groups), size=batch)
        i = np.empty(batch, dtype=np.int64)
        j = np.empty(batch, dtype=np.int64)
        for b, g in enumerate(which):
            grp = self.groups[g]
            a, c = rng.choice(grp.size, size=2, replace=False)
            i[b], j[b] = grp[a], grp[c]
        return make_mated_pair_batch(self.dataset, i, j)


def make_mated_pair_batch(dataset: EmbeddingSet, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Concatenated (batch, 2*dim) real pairs; labels must match within each pair."""
    if dataset.labels is not None:
        for a, b in zip(np.atleast_1d(i), np.atleast_1d(j)):
            if dataset.labels[int(a)] != dataset.labels[int(b)]:
                raise FormatError(
                    f"pair ({int(a)}, {int(b)}) has mismatched labels "
                    f"{dataset.labels[int(a)]!r} vs {dataset.labels[int(b)]!r}")
    return pair_batch(dataset.rows[i], dataset.rows[j])


# ---------------------------------------------------------------------------
# optimizer

class _Opt:
    def __init__(self, net: Mlp, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [(np.zeros_like(w), np.zeros_like(b))
                  for w, b in zip(net.weights, net.biases)]
        self.v = [(np.zeros_like(w), np.zeros_like(b))
                  for w, b in zip(net.weights, net.biases)]

    def step(self, net: Mlp, grads) -> None:
        c = self.cfg
        if c.optimizer == "sgd":
            for (w, b), (gw, gb) in zip(zip(net.weights, net.biases), grads):
                w -= c.lr * gw
                b -= c.lr * gb
            return
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for l, (gw, gb) in enumerate(grads):
            for arr, g, m, v in ((net.weights[l], gw, self.m[l][0], self.v[l][0]),
                                 (net.biases[l], gb, self.m[l][1], self.v[l][1])):
                m *= c.beta1
                m += (1.0 - c.beta1) * g
                v *= c.beta2
                v += (1.0 - c.beta2) * g * g
                arr -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


class TrainState:
    def __init__(self, model: SdGanModel, cfg: TrainConfig):
        self.opt_d = _Opt(model.critic, cfg)
        self.opt_g = _Opt(model.generator, cfg)


def _clip_critic(model: SdGanModel) -> None:
    c = model.clip
    for w, b in zip(model.critic.weights, model.critic.biases):
        np.clip(w, -c, c, out=w)
        np.clip(b, -c, c, out=b)


# ---------------------------------------------------------------------------
# training

def train_step(model: SdGanModel, state: TrainState, data: TrainData,
               pool: HardNegativePool | None, cfg: TrainConfig,
               rng: np.random.Generator, step: int = 0) -> dict:
    """n_critic critic updates (clipped) then one generator update.

    Returns the per-step log row; raises DivergenceError on non-finite
    parameters.
    """
    if cfg.variant == "triplet" and pool is None:
        raise FormatError("triplet training requires a hard-negative pool")
    logs = {}
    try:
        for _ in range(cfg.n_critic):
            x = data.mated_pair_batch(cfg.batch, rng)
            if cfg.variant == "triplet":
                xbar = pool.sample_batch(cfg.batch, rng)
                z1, z2 = sample_latent_pairs(model.latent, cfg.batch, rng)
                l_d, grads, (d_real, d_fake, d_imp) = triplet_critic_grad(
                    model, x, xbar, z1, z2, cfg.lam)
            else:
                z1, z2 = sample_latent_pairs(model.latent, cfg.batch, rng)
                l_d, grads, (d_real, d_fake) = sdgan_critic_grad(model, x, z1, z2)
                d_imp = float("nan")
            state.opt_d.step(model.critic, grads)
            _clip_critic(model)
            logs.update(loss_d=l_d, d_real=d_real, d_fake=d_fake, d_imposter=d_imp)
        z1, z2 = sample_latent_pairs(model.latent, cfg.batch, rng)
        l_g, grads = sdgan_gen_grad(model, z1, z2)
        state.opt_g.step(model.generator, grads)
        logs["loss_g"] = l_g
    except DivergenceError as exc:
        raise DivergenceError(step, "non-finite forward value") from exc
    if not model.finite():
        raise DivergenceError(step)
    return logs


def train(model: SdGanModel, dataset: EmbeddingSet, cfg: TrainConfig,
          steps: int, seed: int) -> list[dict]:
    """Run `steps` training steps in place; returns the per-step trace."""
    rng = np.random.default_rng(seed)
    data = TrainData(dataset)
    pool = (build_negative_pool(dataset, cfg.negative_pool_quantile)
            if cfg.variant == "triplet" else None)
    state = TrainState(model, cfg)
    trace = []
    for step in range(steps):
        logs = train_step(model, state, data, pool, cfg, rng, step)
        logs["step"] = step
        trace.append(logs)
    return trace


TRACE_COLUMNS = ("step", "loss_d", "loss_g", "d_real", "d_fake", "d_imposter")


def write_trace_csv(trace: list[dict], path) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for row in trace:
        lines.append(",".join(
            str(row["step"]) if c == "step" else repr(float(row[c]))
            for c in TRACE_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def generate_identity_sets(model: SdGanModel, n_ids: int, per_id: int, seed: int,
                           name: str = "generated") -> EmbeddingSet:
    """K distinct identity latents, m variation draws each, unit-normalized."""
    rng = np.random.default_rng(seed)
    z_id = rng.standard_normal((n_ids, model.latent.d_id))
    z_iv = rng.standard_normal((n_ids * per_id, model.latent.d_iv))
    z = np.concatenate([np.repeat(z_id, per_id, axis=0), z_iv], axis=1)
    rows = model.generator(z)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if (norms == 0.0).any():
        raise DivergenceError(-1, "generator produced a zero row")
    width = max(4, len(str(n_ids - 1)))
    labels = tuple(f"id{k:0{width}d}" for k in range(n_ids) for _ in range(per_id))
    return EmbeddingSet(name, rows / norms, labels, normalized=True)


# ---------------------------------------------------------------------------
# checkpoint format: magic "SDGT" | u16 version | u32 d_id | u32 d_iv | f8 clip
#   | u32 n gen widths | widths... | u32 n critic widths | widths...
#   | parameters (per layer: W row-major then b), all little-endian f8

_CKPT_MAGIC = b"SDGT"
_CKPT_VERSION = 1


def save_model(model: SdGanModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<HIId", _CKPT_VERSION, model.latent.d_id,
                             model.latent.d_iv, model.clip))
        for widths in (model.generator.widths, model.critic.widths):
            fh.write(struct.pack("<I", len(widths)))
            fh.write(np.asarray(widths, dtype="<u4").tobytes())
        for net in (model.generator, model.critic):
            fh.write(net.params_flat().astype("<f8").tobytes())


def load_model(path) -> SdGanModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _CKPT_MAGIC:
        raise FormatError(f"{path}: not a model checkpoint (bad magic)")
    version, d_id, d_iv, clip = struct.unpack("<HIId", raw[4:22])
    if version != _CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    pos = 22
    widths = []
    for _ in range(2):
        (n,) = struct.unpack("<I", raw[pos:pos + 4])
        pos += 4
        widths.append(np.frombuffer(raw, dtype="<u4", count=n, offset=pos).tolist())
        pos += 4 * n
    rng = np.random.default_rng(0)
    gen = Mlp.init(widths[0], rng)
    critic = Mlp.init(widths[1], rng)
    for net in (gen, critic):
        n = net.params_flat().size
        net.set_params_flat(np.frombuffer(raw, dtype="<f8", count=n, offset=pos))
        pos += 8 * n
    if pos != len(raw):
        raise FormatError(f"{path}: trailing bytes in checkpoint")
    return SdGanModel(gen, critic, LatentSpec(d_id, d_iv), clip)
