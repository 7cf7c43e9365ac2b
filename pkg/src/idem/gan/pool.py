"""Pre-selected high-scoring non-mated pairs (imposter samples).

The pool holds cross-label row-index pairs whose cosine score reaches the
empirical (1 - quantile) cutoff over all cross-label pairs, computed with a
full score matrix (fine at desk scale; memory grows as N^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embeddings import EmbeddingSet
from ..errors import EmptyComparisonError, FormatError


@dataclass(frozen=True)
class HardNegativePool:
    pairs: np.ndarray   # (P, 2) int64 row indices into the source set
    cutoff: float
    source: EmbeddingSet

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def sample_batch(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        """Concatenated (batch, 2*dim) imposter pairs."""
        idx = rng.integers(len(self), size=batch)
        i, j = self.pairs[idx, 0], self.pairs[idx, 1]
        return np.concatenate([self.source.rows[i], self.source.rows[j]], axis=1)


def build_negative_pool(real: EmbeddingSet, quantile: float) -> HardNegativePool:
    """Top-`quantile` cross-label pairs by score, inclusive of the cutoff."""
    if not 0.0 < quantile < 1.0:
        raise FormatError(f"quantile must be in (0,1), got {quantile}")
    if not real.normalized:
        raise FormatError("pool construction requires a normalized set")
    if real.labels is None:
        raise FormatError("pool construction requires labels")
    codes = real.label_codes()
    if np.unique(codes).size < 2:
        raise FormatError("pool construction requires at least 2 identities")
    scores = real.rows @ real.rows.T
    cross = (codes[:, None] != codes[None, :]) & (np.arange(real.n)[:, None] < np.arange(real.n)[None, :])
    vals = scores[cross]
    cutoff = float(np.quantile(vals, 1.0 - quantile, method="lower"))
    keep = cross & (scores >= cutoff)
    ii, jj = np.nonzero(keep)
    if ii.size < 1:
        raise EmptyComparisonError("negative pool is empty")
    pairs = np.stack([ii, jj], axis=1).astype(np.int64)
    return HardNegativePool(pairs, cutoff, real)
