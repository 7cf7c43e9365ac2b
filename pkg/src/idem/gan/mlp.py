"""Multilayer perceptron with hand-rolled reverse-mode gradients.

Hidden activations are leaky rectifiers with slope 0.2; the output layer is
linear.  Everything is float64.  The backward pass returns exact analytic
gradients of sum(w_s * y_s) for caller-chosen per-sample output weights,
which is the only reduction the GAN losses need.
"""

from __future__ import annotations

import numpy as np

LEAK = 0.2


class Mlp:
    """Fully-connected net; weights[l] has shape (width[l], width[l+1])."""

    def __init__(self, widths, weights, biases):
        self.widths = list(int(w) for w in widths)
        self.weights = weights
        self.biases = biases
        for l in range(len(self.widths) - 1):
            assert weights[l].shape == (self.widths[l], self.widths[l + 1])
            assert biases[l].shape == (self.widths[l + 1],)

    @classmethod
    def init(cls, widths, rng: np.random.Generator) -> "Mlp":
        """He-style init for the leaky-rectifier hidden stack."""
        weights, biases = [], []
        for l in range(len(widths) - 1):
            fan_in = widths[l]
            std = np.sqrt(2.0 / ((1.0 + LEAK ** 2) * fan_in))
            weights.append(std * rng.standard_normal((widths[l], widths[l + 1])))
            biases.append(np.zeros(widths[l + 1]))
        return cls(widths, weights, biases)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(self.widths, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    def forward(self, x: np.ndarray):
        """Returns (output, cache) for a (batch, width[0]) input."""
        acts = [np.ascontiguousarray(x, dtype=np.float64)]
        pre = []
        h = acts[0]
        last = self.n_layers - 1
        for l in range(self.n_layers):
            z = h @ self.weights[l] + self.biases[l]
            pre.append(z)
            h = z if l == last else np.where(z > 0.0, z, LEAK * z)
            acts.append(h)
        return h, (acts, pre)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dy: np.ndarray):
        """Gradients of sum(dy * output) w.r.t. parameters and the input.

        Returns (grads, dx) where grads is a list of (dW, db) per layer.
        """
        acts, pre = cache
        grads = [None] * self.n_layers
        last = self.n_layers - 1
        d = np.asarray(dy, dtype=np.float64)
        for l in range(last, -1, -1):
            dz = d if l == last else d * np.where(pre[l] > 0.0, 1.0, LEAK)
            grads[l] = (acts[l].T @ dz, dz.sum(axis=0))
            d = dz @ self.weights[l].T
        return grads, d

    def params_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for w, b in zip(self.weights, self.biases)
                               for a in (w, b)])

    def set_params_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for l in range(self.n_layers):
            for arr in (self.weights[l], self.biases[l]):
                arr[...] = flat[pos:pos + arr.size].reshape(arr.shape)
                pos += arr.size
        assert pos == flat.size

    def finite(self) -> bool:
        return all(np.isfinite(a).all() for w, b in zip(self.weights, self.biases)
                   for a in (w, b))


def zero_grads(net: Mlp):
    return [(np.zeros_like(w), np.zeros_like(b))
            for w, b in zip(net.weights, net.biases)]


def add_grads(acc, grads):
    for (aw, ab), (gw, gb) in zip(acc, grads):
        aw += gw
        ab += gb
    return acc
