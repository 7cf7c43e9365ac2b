"""Embedding datasets: validation, normalization, scoring, and file formats.

An EmbeddingSet is an immutable N x dim matrix of float64 identity feature
vectors with optional per-row identity labels.  All similarity metrics in
this package operate on unit-normalized sets; the score between two rows is
``alpha * <a, b> + beta`` for a positive ``alpha`` (cosine ordering is
preserved for any such affine scale).

Binary file format (little-endian):
    magic "IDEM" | u16 version=1 | u32 dim | u32 N | u16 flags | values
flags bit 0 set means 32-bit floats on disk, otherwise 64-bit; values are
row-major.  Labels live in a sidecar text file ``<path>.labels`` with one
identity token per line.  The CSV format has an optional ``id,v0,v1,...``
header and one ``label,value,...`` line per row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

_MAGIC = b"IDEM"
_VERSION = 1
_FLAG_F32 = 0x0001

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ScoreScale:
    """Affine map from cosine similarity to matcher score: alpha*cos + beta."""

    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0.0 and np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise FormatError(f"score scale needs finite alpha > 0, got ({self.alpha}, {self.beta})")


@dataclass(frozen=True)
class EmbeddingSet:
    """Immutable matrix of identity feature vectors with optional labels."""

    name: str
    rows: np.ndarray
    labels: tuple[str, ...] | None = None
    normalized: bool = False

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise FormatError(f"embedding rows must be 2-D, got shape {rows.shape}")
        n, dim = rows.shape
        if n < 1:
            raise FormatError("embedding set needs at least 1 row")
        if dim < 2:
            raise FormatError(f"embedding dimension must be >= 2, got {dim}")
        bad = ~np.isfinite(rows).all(axis=1)
        if bad.any():
            raise FormatError(f"row {int(np.argmax(bad))}: non-finite value")
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != n:
                raise FormatError(f"label count {len(labels)} does not match row count {n}")
            object.__setattr__(self, "labels", labels)
        if self.normalized:
            norms = np.linalg.norm(rows, axis=1)
            off = np.abs(norms - 1.0)
            if off.max() > UNIT_NORM_TOL:
                raise FormatError(f"row {int(np.argmax(off))}: claimed normalized but norm is {norms[np.argmax(off)]!r}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def label_codes(self) -> np.ndarray:
        """Integer identity codes (int64); distinct per row when unlabeled."""
        if self.labels is None:
            return np.arange(self.n, dtype=np.int64)
        return np.unique(np.asarray(self.labels), return_inverse=True)[1].astype(np.int64)


def normalize(es: EmbeddingSet) -> EmbeddingSet:
    """Return a unit-norm copy of the set; zero-norm rows are an error."""
    norms = np.linalg.norm(es.rows, axis=1)
    if (norms == 0.0).any():
        raise FormatError(f"row {int(np.argmax(norms == 0.0))}: zero norm, cannot normalize")
    rows = es.rows / norms[:, None]
    return EmbeddingSet(es.name, rows, es.labels, normalized=True)


def score(a: np.ndarray, b: np.ndarray, scale: ScoreScale = ScoreScale()) -> float:
    """Matcher score between two unit rows: alpha*<a,b> + beta.

    The dot product is accumulated in index order, matching the comparison
    engine's arithmetic exactly (see metrics.engine).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise FormatError(f"dimension mismatch: {a.shape} vs {b.shape}")
    s = 0.0
    for k in range(a.shape[0]):
        s += a[k] * b[k]
    return scale.alpha * s + scale.beta


# ---------------------------------------------------------------------------
# file formats

def _labels_path(path: Path) -> Path:
    return path.with_name(path.name + ".labels")


def save_embeddings(es: EmbeddingSet, path: str | Path, fmt: str = "binary") -> Path:
    """Write a set to disk (binary by default); labels go to a sidecar file."""
    path = Path(path)
    if fmt == "binary":
        header = _MAGIC + struct.pack("<HIIH", _VERSION, es.dim, es.n, 0)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(es.rows.astype("<f8", copy=False).tobytes(order="C"))
        if es.labels is not None:
            _labels_path(path).write_text("\n".join(es.labels) + "\n", encoding="utf-8")
    elif fmt == "csv":
        lines = ["id," + ",".join(f"v{k}" for k in range(es.dim))]
        labels = es.labels if es.labels is not None else [f"row{i}" for i in range(es.n)]
        for lab, row in zip(labels, es.rows):
            lines.append(lab + "," + ",".join(repr(float(v)) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise FormatError(f"unknown embedding format {fmt!r}")
    return path


def _load_labels(path: Path, n: int) -> tuple[str, ...] | None:
    lp = _labels_path(path)
    if not lp.exists():
        return None
    labels = lp.read_text(encoding="utf-8").splitlines()
    if len(labels) != n:
        raise FormatError(f"{lp.name}: {len(labels)} labels for {n} rows")
    return tuple(labels)


def _load_binary(path: Path) -> EmbeddingSet:
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != _MAGIC:
        raise FormatError(f"{path.name}: not an embedding file (bad magic)")
    version, dim, n, flags = struct.unpack("<HIIH", raw[4:16])
    if version != _VERSION:
        raise FormatError(f"{path.name}: unsupported format version {version}")
    dtype = np.dtype("<f4") if flags & _FLAG_F32 else np.dtype("<f8")
    expect = 16 + n * dim * dtype.itemsize
    if len(raw) != expect:
        raise FormatError(f"{path.name}: expected {expect} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype=dtype, offset=16)
    rows = values.astype(np.float64).reshape(n, dim)
    return EmbeddingSet(path.stem, rows, _load_labels(path, n), normalized=False)


def _load_csv(path: Path) -> EmbeddingSet:
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path.name}: empty file")
    first = lines[0].split(",")
    has_header = first[0] == "id" and all(f == f"v{k}" for k, f in enumerate(first[1:]))
    if has_header:
        dim = len(first) - 1
        data_lines = lines[1:]
    else:
        dim = len(first) - 1
        data_lines = lines
    if dim < 2:
        raise FormatError(f"{path.name}: header declares dim {dim} < 2")
    labels, rows = [], []
    for i, ln in enumerate(data_lines):
        fields = ln.split(",")
        if len(fields) - 1 != dim:
            raise FormatError(f"{path.name}: row {i}: expected {dim} values, found {len(fields) - 1}")
        labels.append(fields[0])
        try:
            rows.append([float(v) for v in fields[1:]])
        except ValueError as exc:
            raise FormatError(f"{path.name}: row {i}: {exc}") from None
    return EmbeddingSet(path.stem, np.array(rows, dtype=np.float64), tuple(labels), normalized=False)


def load_embeddings(path: str | Path, fmt: str | None = None) -> EmbeddingSet:
    """Load a set from disk; format inferred from the extension unless given."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "binary"
    if fmt == "binary":
        return _load_binary(path)
    if fmt == "csv":
        return _load_csv(path)
    raise FormatError(f"unknown embedding format {fmt!r}")
