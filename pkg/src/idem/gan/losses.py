"""Wasserstein, paired-critic, and triplet loss values and gradients.

All losses are minimized exactly as written:

  critic (single):   L_D = mean D(x) - mean D(G(z))
  generator:         L_G = mean D(G(z))
  critic (paired):   L_D = mean D(x) - mean D(G(z1), G(z2))
  critic (triplet):  L_D = mean D(x) - 1/2 [mean D(G(z1), G(z2)) + mean D(xbar)]
                           + lam * [mean D(G(z1), G(z2)) - mean D(xbar)]^2
  generator (pair):  L_G = mean D(G(z1), G(z2))

The critic consumes channel-concatenated pairs; xbar is a batch of real
non-mated pairs.  Gradients are exact reverse-mode: the critic loss is
linear in per-sample critic outputs apart from the quadratic coupling,
whose chain rule only rescales the per-batch output weights.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError, FormatError
from .mlp import Mlp, add_grads, zero_grads


def _check_finite(*vals):
    for v in vals:
        if not np.isfinite(v):
            raise DivergenceError(-1, "non-finite forward value")


def _mean_out(net: Mlp, x):
    y, cache = net.forward(x)
    return float(y.mean()), y, cache


def pair_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Channel-concatenate two (batch, d) image batches into critic input."""
    if a.shape != b.shape:
        raise FormatError(f"pair halves disagree: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=1)


# ---------------------------------------------------------------------------
# loss values

def wgan_losses(critic: Mlp, gen: Mlp, x: np.ndarray, z: np.ndarray):
    """Original Wasserstein losses on single images."""
    d_real = float(critic(x).mean())
    d_fake = float(critic(gen(z)).mean())
    _check_finite(d_real, d_fake)
    return d_real - d_fake, d_fake


def sdgan_losses(model, x_pairs: np.ndarray, z1: np.ndarray, z2: np.ndarray):
    """Paired-critic losses: real mated pairs vs generated shared-identity pairs."""
    d_real = float(model.critic(x_pairs).mean())
    fake = pair_batch(model.generator(z1), model.generator(z2))
    d_fake = float(model.critic(fake).mean())
    _check_finite(d_real, d_fake)
    return d_real - d_fake, d_fake


def triplet_losses(model, x_pairs: np.ndarray, xbar_pairs: np.ndarray,
                   z1: np.ndarray, z2: np.ndarray, lam: float):
    """Triplet-augmented paired-critic losses (imposter term + quadratic coupling)."""
    if lam < 0:
        raise FormatError(f"lambda must be >= 0, got {lam}")
    d_real = float(model.critic(x_pairs).mean())
    fake = pair_batch(model.generator(z1), model.generator(z2))
    d_fake = float(model.critic(fake).mean())
    d_imp = float(model.critic(xbar_pairs).mean())
    _check_finite(d_real, d_fake, d_imp)
    l_d = d_real - 0.5 * (d_fake + d_imp) + lam * (d_fake - d_imp) ** 2
    return l_d, d_fake


# ---------------------------------------------------------------------------
# gradients

def _weighted_critic_grads(critic: Mlp, passes):
    """Sum of critic backward passes; each entry is (cache, y, weight).

    `weight` is dLoss/d(mean output of that batch); per-sample weight is
    weight / batch.
    """
    grads = zero_grads(critic)
    for cache, y, weight in passes:
        g, _ = critic.backward(cache, np.full_like(y, weight / y.shape[0]))
        add_grads(grads, g)
    return grads


def wgan_critic_grad(critic: Mlp, gen: Mlp, x: np.ndarray, z: np.ndarray):
    """(L_D, dL_D/dtheta_D) with the generator frozen."""
    d_real, y_r, c_r = _mean_out(critic, x)
    d_fake, y_f, c_f = _mean_out(critic, gen(z))
    _check_finite(d_real, d_fake)
    grads = _weighted_critic_grads(critic, [(c_r, y_r, 1.0), (c_f, y_f, -1.0)])
    return d_real - d_fake, grads


def wgan_gen_grad(critic: Mlp, gen: Mlp, z: np.ndarray):
    """(L_G, dL_G/dtheta_G) with the critic frozen."""
    fake, g_cache = gen.forward(z)
    y, d_cache = critic.forward(fake)
    _check_finite(float(y.mean()))
    _, dx = critic.backward(d_cache, np.full_like(y, 1.0 / fake.shape[0]))
    grads, _ = gen.backward(g_cache, dx)
    return float(y.mean()), grads


def sdgan_critic_grad(model, x_pairs, z1, z2):
    fake = pair_batch(model.generator(z1), model.generator(z2))
    d_real, y_r, c_r = _mean_out(model.critic, x_pairs)
    d_fake, y_f, c_f = _mean_out(model.critic, fake)
    _check_finite(d_real, d_fake)
    grads = _weighted_critic_grads(model.critic, [(c_r, y_r, 1.0), (c_f, y_f, -1.0)])
    return d_real - d_fake, grads, (d_real, d_fake)


def triplet_critic_grad(model, x_pairs, xbar_pairs, z1, z2, lam: float):
    """Triplet critic gradient: the quadratic coupling only rescales weights.

    With A = mean D(fake), B = mean D(xbar):
      dL/dA = -1/2 + 2 lam (A - B),   dL/dB = -1/2 - 2 lam (A - B).
    """
    fake = pair_batch(model.generator(z1), model.generator(z2))
    d_real, y_r, c_r = _mean_out(model.critic, x_pairs)
    d_fake, y_f, c_f = _mean_out(model.critic, fake)
    d_imp, y_i, c_i = _mean_out(model.critic, xbar_pairs)
    _check_finite(d_real, d_fake, d_imp)
    coupling = 2.0 * lam * (d_fake - d_imp)
    grads = _weighted_critic_grads(
        model.critic,
        [(c_r, y_r, 1.0), (c_f, y_f, -0.5 + coupling), (c_i, y_i, -0.5 - coupling)])
    l_d = d_real - 0.5 * (d_fake + d_imp) + lam * (d_fake - d_imp) ** 2
    return l_d, grads, (d_real, d_fake, d_imp)


def sdgan_gen_grad(model, z1, z2):
    """(L_G, dL_G/dtheta_G); the plain and triplet variants share this loss."""
    g1, c1 = model.generator.forward(z1)
    g2, c2 = model.generator.forward(z2)
    fake = pair_batch(g1, g2)
    y, d_cache = model.critic.forward(fake)
    _check_finite(float(y.mean()))
    _, dx = model.critic.backward(d_cache, np.full_like(y, 1.0 / fake.shape[0]))
    d = g1.shape[1]
    grads, _ = model.generator.backward(c1, dx[:, :d])
    g2_grads, _ = model.generator.backward(c2, dx[:, d:])
    add_grads(grads, g2_grads)
    return float(y.mean()), grads
