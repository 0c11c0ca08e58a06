"""Retrieval and clustering metrics.

A query is never its own neighbour, and neighbours at equal distance are
ranked by ascending index.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np

from .core import as_array, as_labels, pairwise_distances

DEFAULT_KS = (1, 2, 4, 8)
KMEANS_MAX_ITER = 300


@dataclass
class MetricReport:
    recall_at: dict
    nmi: float
    f1: float
    map_at_c: float
    map_at_1000: float
    flags: list = field(default_factory=list)

    def as_dict(self):
        out = {f"recall@{k}": v for k, v in sorted(self.recall_at.items())}
        out.update(nmi=self.nmi, f1=self.f1, map_at_c=self.map_at_c, map_at_1000=self.map_at_1000)
        return out

    def to_text(self):
        return "".join(f"{k}={v:.10g}\n" for k, v in self.as_dict().items())


def neighbour_ranking(embeddings):
    """Row q lists every other sample ordered by distance to q."""
    d = pairwise_distances(embeddings)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    return order[:, :-1]


def _check(embeddings, labels):
    x = as_array(embeddings)
    y = as_labels(labels)
    if len(x) != len(y):
        raise ValueError(f"{len(y)} labels for {len(x)} embeddings")
    return x, y


def recall_at_k(embeddings, labels, k):
    x, y = _check(embeddings, labels)
    if k < 1 or k >= len(x):
        raise ValueError(f"k must satisfy 1 <= k < n = {len(x)}")
    ranking = neighbour_ranking(x)[:, :k]
    return float(np.mean(np.any(y[ranking] == y[:, None], axis=1)))


def _class_sizes(y):
    _, inverse, counts = np.unique(y, return_inverse=True, return_counts=True)
    return counts[inverse] - 1


def _hits_at(y, ranking, depth):
    """Same-class hits among the first ``depth[q]`` neighbours of each query."""
    same = y[ranking] == y[:, None]
    cols = np.arange(ranking.shape[1])[None, :]
    return np.sum(same & (cols < depth[:, None]), axis=1)


def f1_score(embeddings, labels):
    """Per-query F1 of retrieving as many neighbours as the query has classmates."""
    x, y = _check(embeddings, labels)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    k_c = _class_sizes(y)
    hits = _hits_at(y, neighbour_ranking(x), k_c)
    safe = np.maximum(k_c, 1)
    precision = hits / safe
    recall = hits / safe
    denom = precision + recall
    f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1), 0.0)
    return float(f1.mean())


def map_at_c(embeddings, labels):
    x, y = _check(embeddings, labels)
    k_c = _class_sizes(y)
    if np.any(k_c == 0):
        warnings.warn(f"{int(np.sum(k_c == 0))} queries have no classmates; they score 0", stacklevel=2)
    hits = _hits_at(y, neighbour_ranking(x), k_c)
    return float(np.mean(np.where(k_c > 0, hits / np.maximum(k_c, 1), 0.0)))


def map_at_1000(embeddings, labels, depth=1000):
    x, y = _check(embeddings, labels)
    k = min(depth, len(x) - 1)
    if k < 1:
        raise ValueError("need at least two samples")
    ranking = neighbour_ranking(x)[:, :k]
    return float(np.mean(np.sum(y[ranking] == y[:, None], axis=1) / k))


# clustering -----------------------------------------------------------------


def _kmeans_pp(x, K, rng):
    centers = [x[rng.integers(len(x))]]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = closest.sum()
        if total > 0:
            pick = rng.choice(len(x), p=closest / total)
        else:
            pick = rng.integers(len(x))
        centers.append(x[pick])
        closest = np.minimum(closest, np.sum((x - x[pick]) ** 2, axis=1))
    return np.array(centers)


def kmeans(embeddings, K, seed=0, max_iter=KMEANS_MAX_ITER):
    """Lloyd's algorithm with k-means++ seeding.

    Returns ``(assignments, centers, inertia_history)``. Empty clusters are
    re-seeded with the point farthest from its current center.
    """
    x = as_array(embeddings)
    if K < 1 or K > len(x):
        raise ValueError(f"K must satisfy 1 <= K <= n = {len(x)}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(x, K, rng)
    assign = None
    history = []
    for _ in range(max_iter):
        sq = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(sq, axis=1)
        history.append(float(sq[np.arange(len(x)), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for k in range(K):
            members = x[assign == k]
            if len(members):
                centers[k] = members.mean(axis=0)
            else:
                far = int(np.argmax(sq[np.arange(len(x)), assign]))
                centers[k] = x[far]
    return assign, centers, history


def kmeans_cluster(embeddings, K, seed=0):
    return kmeans(embeddings, K, seed)[0]


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(assignments, labels):
    """2 I(A; B) / (H(A) + H(B)), taken as 1 when both partitions are trivial."""
    a = np.asarray(assignments)
    b = np.asarray(labels)
    if a.shape != b.shape:
        raise ValueError("partitions differ in length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    h_a, h_b = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if h_a + h_b == 0:
        return 1.0
    joint = table / table.sum()
    outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    return float(np.clip(2.0 * mi / (h_a + h_b), 0.0, 1.0))


def evaluate(embeddings, labels, ks=DEFAULT_KS, seed=0):
    x, y = _check(embeddings, labels)
    ks = sorted(set(int(k) for k in ks))
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mac = map_at_c(x, y)
    flags.extend(str(w.message) for w in caught)
    clusters = kmeans_cluster(x, len(np.unique(y)), seed)
    return MetricReport(
        recall_at={k: recall_at_k(x, y, k) for k in ks},
        nmi=nmi(clusters, y),
        f1=f1_score(x, y),
        map_at_c=mac,
        map_at_1000=map_at_1000(x, y),
        flags=flags,
    )


# correlation across runs -------------------------------------------------------


@dataclass
class CorrelationMatrix:
    names: list
    matrix: np.ndarray
    constant: list

    def __getitem__(self, pair):
        i, j = (self.names.index(p) for p in pair)
        return self.matrix[i, j]


def _flatten(report):
    if isinstance(report, dict):
        return dict(report)
    if hasattr(report, "as_dict"):
        return report.as_dict()
    raise TypeError(f"cannot read metrics from {type(report).__name__}")


def metric_correlation_matrix(reports):
    """Pearson correlation between every pair of metrics across runs.

    Each report is a mapping (or an object with ``as_dict``) of metric name to
    value. Pass merged metric and spectral dictionaries to correlate both.
    Metrics that are constant across runs correlate 0 with everything else.
    """
    rows = [_flatten(r) for r in reports]
    if len(rows) < 3:
        raise ValueError("need at least three runs")
    names = [k for k in rows[0] if all(k in r for r in rows)]
    data = np.array([[float(r[k]) for k in names] for r in rows])
    centered = data - data.mean(axis=0)
    scale = np.sqrt((centered**2).sum(axis=0))
    constant = [names[i] for i in np.flatnonzero(scale == 0)]
    safe = np.where(scale > 0, scale, 1.0)
    z = centered / safe
    corr = z.T @ z
    corr[:, scale == 0] = 0.0
    corr[scale == 0, :] = 0.0
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(names, corr, constant)
