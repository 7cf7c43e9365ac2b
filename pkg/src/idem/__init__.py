"""idem: identity-overfitting and mode-collapse evaluation for generative
models, with a desk-scale paired-critic GAN that the same metrics evaluate."""

from .embeddings import (EmbeddingSet, ScoreScale, load_embeddings, normalize,
                         save_embeddings, score)
from .errors import (DivergenceError, EmptyComparisonError, FormatError,
                     IdemError, ResolutionError)
from .synthgen import MixtureSpec, PathologySpec, gen_identity_clouds, make_fake_set

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSet", "ScoreScale", "load_embeddings", "normalize",
    "save_embeddings", "score",
    "DivergenceError", "EmptyComparisonError", "FormatError", "IdemError",
    "ResolutionError",
    "MixtureSpec", "PathologySpec", "gen_identity_clouds", "make_fake_set",
    "__version__",
]
