"""Embedding containers, distances and hypersphere normalization."""

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

NORM_TOL = 1e-6


def _unit_rows(data, tol=NORM_TOL):
    return bool(np.all(np.abs(np.linalg.norm(data, axis=1) - 1.0) <= tol))


@dataclass(frozen=True)
class EmbeddingMatrix:
    """An ``n x D`` block of embeddings, one sample per row.

    ``normalized`` asserts that every row lies on the unit sphere; the claim is
    checked at construction.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"embeddings must be a non-empty n x D matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("embeddings contain NaN or Inf")
        if self.normalized and not _unit_rows(data):
            raise ValueError("rows flagged as normalized do not have unit norm")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray = field()

    def __post_init__(self):
        raw = np.asarray(self.labels)
        if raw.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if raw.size and (not np.all(np.equal(np.mod(raw, 1), 0)) or raw.min() < 0):
            raise ValueError("labels must be non-negative integers")
        labels = raw.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.size

    @property
    def classes(self):
        return np.unique(self.labels)

    def check_pairs_with(self, emb):
        if len(self) != len(emb):
            raise ValueError(f"{len(self)} labels for {len(emb)} embeddings")


def as_array(x):
    if isinstance(x, EmbeddingMatrix):
        return x.data
    return np.asarray(x, dtype=np.float64)


def as_labels(y):
    if isinstance(y, LabelVector):
        return y.labels
    return LabelVector(np.asarray(y)).labels


def euclidean_distance(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite input")
    return float(np.linalg.norm(a - b))


def cosine_similarity(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    for name, v in (("a", a), ("b", b)):
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ValueError(f"{name} is not unit-normalized")
    return float(a @ b)


def normalize_rows(m):
    data = as_array(m)
    if data.ndim == 1:
        data = data[None, :]
    norms = np.linalg.norm(data, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"cannot normalize zero-norm row {int(zero[0])}")
    return EmbeddingMatrix(data / norms[:, None], normalized=True)


def pairwise_distances(m):
    """Full symmetric Euclidean distance matrix with an exact zero diagonal."""
    data = as_array(m)
    if data.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(data, metric="euclidean"))


def worker_count():
    """Thread cap from ``DMLE_THREADS``; defaults to one worker."""
    raw = os.environ.get("DMLE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
