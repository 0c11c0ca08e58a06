"""Mini-batch construction: label heuristics, the embedding memory bank and
the embedded samplers (greedy coreset, distance-distribution matching,
Frechet-distance matching)."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .core import NORM_TOL, as_array, as_labels, worker_count

DEFAULT_B_STAR = 1024
DEFAULT_CANDIDATES = 8
HIST_BINS = 50
HIST_RANGE = (0.0, 2.0)
COV_JITTER = 1e-6


@dataclass(frozen=True)
class MiniBatch:
    indices: np.ndarray
    sampler: str
    scores: np.ndarray | None = None
    candidates: list = field(default=None, repr=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("mini-batch indices must be unique")
        if len(idx) < 2:
            raise ValueError("a mini-batch needs at least two samples")
        object.__setattr__(self, "indices", idx)

    @property
    def b(self):
        return len(self.indices)


@dataclass(frozen=True)
class MemoryBank:
    """Last-seen embedding of every dataset sample.

    Rows never written are unfilled and cannot be read.
    """

    entries: np.ndarray
    labels: np.ndarray
    filled: np.ndarray

    @classmethod
    def empty(cls, labels, dim):
        y = as_labels(labels)
        return cls(np.zeros((len(y), dim)), y, np.zeros(len(y), dtype=bool))

    @classmethod
    def from_embeddings(cls, embeddings, labels):
        x = as_array(embeddings)
        return bank_update(cls.empty(labels, x.shape[1]), np.arange(len(x)), x)

    @property
    def size(self):
        return len(self.entries)

    def read(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        if not np.all(self.filled[indices]):
            raise ValueError("attempted to read unfilled memory-bank rows")
        return self.entries[indices]

    def filled_indices(self):
        return np.flatnonzero(self.filled)


def bank_update(bank, batch_indices, embeddings):
    idx = np.asarray(batch_indices, dtype=np.int64).reshape(-1)
    x = as_array(embeddings)
    if x.ndim != 2 or x.shape != (len(idx), bank.entries.shape[1]):
        raise ValueError(f"expected embeddings of shape {(len(idx), bank.entries.shape[1])}, got {x.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= bank.size):
        raise IndexError("bank index out of range")
    if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > NORM_TOL):
        raise ValueError("memory bank stores unit-normalized embeddings")
    entries = bank.entries.copy()
    filled = bank.filled.copy()
    entries[idx] = x
    filled[idx] = True
    return MemoryBank(entries, bank.labels, filled)


# label samplers -----------------------------------------------------------------


def spc_sampler(labels, b, n, seed=0):
    """``b / n`` distinct classes, ``n`` samples from each."""
    y = as_labels(labels)
    if n < 1 or b % n:
        raise ValueError(f"batch size {b} is not divisible by samples-per-class {n}")
    classes, counts = np.unique(y, return_counts=True)
    eligible = classes[counts >= n]
    if len(eligible) < b // n:
        raise ValueError(f"need {b // n} classes with >= {n} samples, only {len(eligible)} available")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(eligible, size=b // n, replace=False)
    idx = [rng.choice(np.flatnonzero(y == c), size=n, replace=False) for c in chosen]
    return MiniBatch(np.concatenate(idx), f"spc{n}")


def spc_r_sampler(labels, b, seed=0, max_tries=100):
    """``b - 1`` uniform samples plus one more sharing a class with one of them."""
    y = as_labels(labels)
    _, counts = np.unique(y, return_counts=True)
    if not np.any(counts >= 2):
        raise ValueError("SPC-R needs a class with at least two samples")
    if b < 2 or b > len(y):
        raise ValueError("batch size out of range")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        head = rng.choice(len(y), size=b - 1, replace=False)
        rest = np.setdiff1d(np.arange(len(y)), head)
        partners = rest[np.isin(y[rest], y[head])]
        if len(partners):
            last = partners[rng.integers(len(partners))]
            return MiniBatch(np.append(head, last), "spcr")
    raise ValueError("could not complete an SPC-R batch with a same-class sample")


# embedded samplers -----------------------------------------------------------------


def greedy_coreset_select(candidates, b, seed=0, start=None):
    """Greedy k-center selection over the rows of ``candidates``.

    The first point is drawn uniformly (or given by ``start``); every later
    point maximizes its distance to the nearest point already chosen. Ties go
    to the lowest index.
    """
    x = as_array(candidates)
    if b > len(x):
        raise ValueError(f"cannot select {b} of {len(x)} candidates")
    if b < 1:
        raise ValueError("b must be positive")
    first = int(np.random.default_rng(seed).integers(len(x))) if start is None else int(start)
    chosen = [first]
    min_dist = cdist(x, x[first : first + 1])[:, 0]
    min_dist[first] = -np.inf
    for _ in range(b - 1):
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, cdist(x, x[nxt : nxt + 1])[:, 0])
        min_dist[chosen] = -np.inf
    return np.array(chosen, dtype=np.int64)


def _reference_set(bank, b_star, rng):
    pool = bank.filled_indices()
    if len(pool) < 2:
        raise ValueError("memory bank has too few filled entries")
    return rng.choice(pool, size=min(b_star, len(pool)), replace=False)


def gc_select(bank, b, seed=0, b_star=DEFAULT_B_STAR):
    rng = np.random.default_rng(seed)
    ref = _reference_set(bank, b_star, rng)
    if b > len(ref):
        raise ValueError(f"batch size {b} exceeds the {len(ref)} filled bank entries")
    picks = greedy_coreset_select(bank.read(ref), b, seed=int(rng.integers(2**31)))
    return MiniBatch(ref[picks], "gc")


def distance_histogram(x, bins=HIST_BINS, value_range=HIST_RANGE):
    """Normalized histogram of all pairwise distances among the rows of ``x``."""
    d = pdist(as_array(x))
    counts, _ = np.histogram(d, bins=bins, range=value_range)
    return counts / counts.sum()


def wasserstein_hist_distance(h1, h2, bin_width=None):
    """Earth mover's distance between two histograms on the same uniform bins.

    ``bin_width`` defaults to the width of the distance histograms used by
    DDM.
    """
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape or h1.ndim != 1:
        raise ValueError("histograms must be 1-D with equal bin counts")
    for h in (h1, h2):
        if abs(h.sum() - 1.0) > 1e-9 or np.any(h < 0):
            raise ValueError("histograms must be non-negative and sum to 1")
    if bin_width is None:
        bin_width = (HIST_RANGE[1] - HIST_RANGE[0]) / HIST_BINS
    return float(np.abs(np.cumsum(h1 - h2)).sum() * bin_width)


def frechet_distance(mu1, sigma1, mu2, sigma2):
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)) for Gaussian statistics."""
    mu1, mu2 = np.atleast_1d(mu1).astype(float), np.atleast_1d(mu2).astype(float)
    s1, s2 = np.atleast_2d(sigma1).astype(float), np.atleast_2d(sigma2).astype(float)
    for s in (s1, s2):
        if s.shape[0] != s.shape[1] or not np.allclose(s, s.T, atol=1e-9):
            raise ValueError("covariances must be symmetric square matrices")
    root1 = _psd_sqrt(s1)
    inner = root1 @ s2 @ root1
    eig = np.linalg.eigvalsh((inner + inner.T) / 2)
    if eig.min() < -1e-9:
        raise ValueError("covariance product is not positive semidefinite")
    tr_cross = np.sqrt(np.clip(eig, 0.0, None)).sum()
    diff = mu1 - mu2
    return float(max(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * tr_cross, 0.0))


def _psd_sqrt(s):
    eig, vec = np.linalg.eigh(s)
    if eig.min() < -1e-9:
        raise ValueError("covariance is not positive semidefinite")
    return (vec * np.sqrt(np.clip(eig, 0.0, None))) @ vec.T


def batch_statistics(x):
    """Mean and unbiased covariance, with jitter on the diagonal."""
    x = as_array(x)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return x.mean(axis=0), cov + COV_JITTER * np.eye(x.shape[1])


def _draw_candidates(bank, b, m, rng):
    pool = bank.filled_indices()
    if b > len(pool):
        raise ValueError(f"batch size {b} exceeds the {len(pool)} filled bank entries")
    return [rng.choice(pool, size=b, replace=False) for _ in range(m)]


def _score_all(score, candidates):
    workers = min(worker_count(), len(candidates))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return np.array(list(pool.map(score, candidates)))
    return np.array([score(c) for c in candidates])


def _matching_select(bank, b, m, seed, b_star, name, make_score):
    if m < 1:
        raise ValueError("need at least one candidate batch")
    rng = np.random.default_rng(seed)
    ref = _reference_set(bank, b_star, rng)
    candidates = _draw_candidates(bank, b, m, rng)
    scores = _score_all(make_score(bank.read(ref)), candidates)
    best = int(np.argmin(scores))
    return MiniBatch(candidates[best], name, scores, candidates)


def ddm_select(bank, b, m=DEFAULT_CANDIDATES, seed=0, b_star=DEFAULT_B_STAR):
    """Candidate whose pairwise-distance histogram is closest (Wasserstein) to
    that of a large reference set drawn from the bank."""

    def make_score(ref):
        target = distance_histogram(ref)
        return lambda idx: wasserstein_hist_distance(distance_histogram(bank.read(idx)), target)

    return _matching_select(bank, b, m, seed, b_star, "ddm", make_score)


def frd_select(bank, b, m=DEFAULT_CANDIDATES, seed=0, b_star=DEFAULT_B_STAR):
    """Candidate whose mean/covariance is closest in Frechet distance to the
    reference set's."""

    def make_score(ref):
        mu_ref, cov_ref = batch_statistics(ref)

        def score(idx):
            mu, cov = batch_statistics(bank.read(idx))
            return frechet_distance(mu, cov, mu_ref, cov_ref)

        return score

    return _matching_select(bank, b, m, seed, b_star, "frd", make_score)
