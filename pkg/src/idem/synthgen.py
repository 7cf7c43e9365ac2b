"""Seeded synthetic embedding worlds with known identity structure.

Identity clouds live on the unit sphere: K centers drawn uniformly, m rows
per identity at center + Gaussian(0, within_sigma^2 I), renormalized.
Pathological fake sets inject memorization (perturbed copies of real rows)
or mode collapse (all rows drawn around a few fresh centers), giving the
metrics module ground truth to detect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSet
from .errors import FormatError


@dataclass(frozen=True)
class MixtureSpec:
    K: int
    m: int
    dim: int
    within_sigma: float
    seed: int
    name: str = "clouds"

    def __post_init__(self):
        if self.K < 2 or self.m < 1:
            raise FormatError(f"need K >= 2 identities and m >= 1 rows, got K={self.K}, m={self.m}")
        if self.dim < 2:
            raise FormatError(f"dim must be >= 2, got {self.dim}")
        if self.within_sigma < 0:
            raise FormatError(f"within_sigma must be >= 0, got {self.within_sigma}")


@dataclass(frozen=True)
class PathologySpec:
    memorize_fraction: float = 0.0
    perturb_eps: float = 0.0
    collapse_k: int | None = None
    collapse_sigma: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.memorize_fraction <= 1.0:
            raise FormatError(f"memorize_fraction must be in [0,1], got {self.memorize_fraction}")
        if self.perturb_eps < 0:
            raise FormatError(f"perturb_eps must be >= 0, got {self.perturb_eps}")
        if self.collapse_k is not None and self.collapse_k < 1:
            raise FormatError(f"collapse_k must be positive, got {self.collapse_k}")


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def gen_identity_clouds(spec: MixtureSpec) -> EmbeddingSet:
    """Labeled K*m-row set; deterministic in the seed."""
    rng = np.random.default_rng(spec.seed)
    centers = _unit(rng.standard_normal((spec.K, spec.dim)))
    rows = np.repeat(centers, spec.m, axis=0)
    if spec.within_sigma > 0:
        rows = rows + spec.within_sigma * rng.standard_normal(rows.shape)
    rows = _unit(rows)
    width = max(4, len(str(spec.K - 1)))
    labels = tuple(f"id{k:0{width}d}" for k in range(spec.K) for _ in range(spec.m))
    return EmbeddingSet(spec.name, rows, labels, normalized=True)


def make_fake_set(real: EmbeddingSet, pathology: PathologySpec, n_fake: int,
                  seed: int, name: str = "fake") -> EmbeddingSet:
    """Unlabeled fake set with injected memorization and/or collapse.

    Row layout: first round(memorize_fraction*n_fake) rows are perturbed
    copies of random real rows; the remainder cluster around collapse_k
    fresh centers when collapse is on, and otherwise are fresh single-row
    identities drawn uniformly on the sphere.
    """
    if n_fake < 1:
        raise FormatError(f"n_fake must be >= 1, got {n_fake}")
    rng = np.random.default_rng(seed)
    n_mem = int(round(pathology.memorize_fraction * n_fake))
    parts = []
    if n_mem:
        src = rng.integers(real.n, size=n_mem)
        copies = real.rows[src]
        if pathology.perturb_eps > 0:
            copies = _unit(copies + pathology.perturb_eps
                           * rng.standard_normal(copies.shape))
        parts.append(copies)
    n_rest = n_fake - n_mem
    if n_rest:
        if pathology.collapse_k is not None:
            centers = _unit(rng.standard_normal((pathology.collapse_k, real.dim)))
            which = rng.integers(pathology.collapse_k, size=n_rest)
            rest = centers[which]
            if pathology.collapse_sigma > 0:
                rest = rest + pathology.collapse_sigma * rng.standard_normal(rest.shape)
            parts.append(_unit(rest))
        else:
            parts.append(_unit(rng.standard_normal((n_rest, real.dim))))
    rows = np.concatenate(parts, axis=0)
    return EmbeddingSet(name, rows, labels=None, normalized=True)
