"""Tuple construction from a labelled mini-batch.

Every miner enumerates each batch element with at least one same-class partner
and at least one other-class sample as an anchor, exactly once per pass.
Positives are drawn uniformly among same-class partners; the miners differ in
how the negative is picked. All miners are deterministic given ``seed``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln

from .core import NORM_TOL, as_array, as_labels, pairwise_distances

TUPLE_WIDTH = {"pairs": 2, "triplets": 3, "quadruplets": 4}


@dataclass(frozen=True)
class TupleSet:
    """Index tuples into a batch.

    For triplets a switched row stores ``(a, n, p)``, i.e. the positive and
    negative slots have been exchanged. For pairs the indices stay as they are
    and the switch flips the pair's role (attract vs. repel).
    """

    kind: str
    indices: np.ndarray
    miner: str = "manual"
    seed: int | None = None
    switched: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind not in TUPLE_WIDTH:
            raise ValueError(f"unknown tuple kind {self.kind!r}")
        width = TUPLE_WIDTH[self.kind]
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, width)
        switched = (
            np.zeros(len(idx), dtype=bool)
            if self.switched is None
            else np.asarray(self.switched, dtype=bool).reshape(-1)
        )
        if switched.shape != (len(idx),):
            raise ValueError("switched mask must have one entry per tuple")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "switched", switched)

    def __len__(self):
        return len(self.indices)

    def check(self, labels):
        """Raise if an unswitched tuple breaks the class constraints of its kind."""
        y = as_labels(labels)
        idx = self.indices[~self.switched]
        if idx.size and (idx.min() < 0 or idx.max() >= len(y)):
            raise IndexError("tuple index out of range")
        if self.kind == "triplets" and len(idx):
            a, p, n = y[idx[:, 0]], y[idx[:, 1]], y[idx[:, 2]]
            bad = (a != p) | (a == n)
            if bad.any():
                raise ValueError(f"triplet {idx[bad][0].tolist()} violates y_a = y_p != y_n")
        if self.kind == "quadruplets" and len(idx):
            a, p, n1, n2 = (y[idx[:, k]] for k in range(4))
            bad = (a != p) | (p == n1) | (n2 == n1) | (n2 == p)
            if bad.any():
                raise ValueError(f"quadruplet {idx[bad][0].tolist()} violates its class constraints")


def _empty(kind, miner, seed):
    return TupleSet(kind, np.zeros((0, TUPLE_WIDTH[kind]), dtype=np.int64), miner, seed)


def _anchor_sets(y):
    """Yield (anchor, positives, negatives) for anchors that can form a triplet."""
    idx = np.arange(len(y))
    for a in idx:
        pos = idx[(y == y[a]) & (idx != a)]
        neg = idx[y != y[a]]
        if len(pos) and len(neg):
            yield a, pos, neg


def _pick(rng, candidates, fallback):
    pool = candidates if len(candidates) else fallback
    return int(pool[rng.integers(len(pool))])


def random_miner(labels, seed=0):
    y = as_labels(labels)
    rng = np.random.default_rng(seed)
    rows = [(a, _pick(rng, pos, pos), _pick(rng, neg, neg)) for a, pos, neg in _anchor_sets(y)]
    if not rows:
        return _empty("triplets", "random", seed)
    return TupleSet("triplets", np.array(rows), "random", seed)


def semihard_miner(batch, labels, seed=0):
    """Negatives farther from the anchor than the sampled positive.

    Anchors without such a negative fall back to a uniformly random one.
    """
    y = as_labels(labels)
    dist = pairwise_distances(batch)
    rng = np.random.default_rng(seed)
    rows = []
    for a, pos, neg in _anchor_sets(y):
        p = _pick(rng, pos, pos)
        rows.append((a, p, _pick(rng, semihard_candidates(dist, a, p, neg), neg)))
    if not rows:
        return _empty("triplets", "semihard", seed)
    return TupleSet("triplets", np.array(rows), "semihard", seed)


def semihard_candidates(dist, a, p, neg):
    return neg[dist[a, neg] > dist[a, p]]


def softhard_candidates(dist, a, pos, neg):
    """Hard negatives (closer than the farthest positive) and hard positives
    (farther than the closest negative) for anchor ``a``."""
    hard_neg = neg[dist[a, neg] < dist[a, pos].max()]
    hard_pos = pos[dist[a, pos] > dist[a, neg].min()]
    return hard_pos, hard_neg


def softhard_miner(batch, labels, seed=0):
    y = as_labels(labels)
    dist = pairwise_distances(batch)
    rng = np.random.default_rng(seed)
    rows = []
    for a, pos, neg in _anchor_sets(y):
        hard_pos, hard_neg = softhard_candidates(dist, a, pos, neg)
        rows.append((a, _pick(rng, hard_pos, pos), _pick(rng, hard_neg, neg)))
    if not rows:
        return _empty("triplets", "softhard", seed)
    return TupleSet("triplets", np.array(rows), "softhard", seed)


def log_sphere_density_norm(dim):
    """log of the integral of d^(dim-2) (1 - d^2/4)^((dim-3)/2) over [0, 2]."""
    return (dim - 2.0) * np.log(2.0) + betaln(0.5 * (dim - 1), 0.5 * (dim - 1))


def log_inverse_sphere_density(d, dim):
    """log 1/q(d), q being the density of the distance between two independent
    uniform points on the unit sphere in R^dim:

        q(d) = d^(dim-2) (1 - d^2/4)^((dim-3)/2) / Z

    Worked in log space so large ``dim`` does not overflow.
    """
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_q = (dim - 2.0) * np.log(d) + 0.5 * (dim - 3.0) * np.log(1.0 - 0.25 * d * d)
    return log_sphere_density_norm(dim) - log_q


def distance_weights(d, dim, lambda_clip=0.5, d_max=1.4):
    """Unnormalized sampling weights min(lambda, q^-1(min(d, d_max)))."""
    clipped = np.minimum(np.asarray(d, dtype=np.float64), d_max)
    log_w = np.minimum(np.log(lambda_clip), log_inverse_sphere_density(clipped, dim))
    return np.exp(log_w)


def distance_weighted_miner(batch, labels, seed=0, lambda_clip=0.5, d_max=1.4):
    x = as_array(batch)
    y = as_labels(labels)
    dim = x.shape[1]
    if dim < 3:
        raise ValueError("distance-weighted mining needs embedding dimension >= 3")
    if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > NORM_TOL):
        raise ValueError("distance-weighted mining needs unit-normalized embeddings")
    dist = pairwise_distances(x)
    rng = np.random.default_rng(seed)
    rows = []
    for a, pos, neg in _anchor_sets(y):
        p = _pick(rng, pos, pos)
        w = distance_weights(dist[a, neg], dim, lambda_clip, d_max)
        rows.append((a, p, int(neg[rng.choice(len(neg), p=w / w.sum())])))
    if not rows:
        return _empty("triplets", "distance", seed)
    return TupleSet("triplets", np.array(rows), "distance", seed)


def triplets_to_pairs(tuples):
    """Split each triplet into its anchor-positive and anchor-negative pair.

    Switched triplets produce switched pairs, so their roles stay flipped.
    """
    if tuples.kind != "triplets":
        raise ValueError("expected triplets")
    idx = tuples.indices
    pairs = np.concatenate([idx[:, [0, 1]], idx[:, [0, 2]]])
    switched = np.concatenate([tuples.switched, tuples.switched])
    return TupleSet("pairs", pairs, tuples.miner, tuples.seed, switched)


def extend_to_quadruplets(tuples, labels, seed=0):
    """Append a second negative n2 with y_n2 differing from both y_p and y_n1."""
    y = as_labels(labels)
    rng = np.random.default_rng(seed)
    rows = []
    for a, p, n1 in tuples.indices:
        cand = np.flatnonzero((y != y[p]) & (y != y[n1]))
        if len(cand):
            rows.append((a, p, n1, int(cand[rng.integers(len(cand))])))
    if not rows:
        return _empty("quadruplets", tuples.miner, seed)
    return TupleSet("quadruplets", np.array(rows), tuples.miner, seed)


def all_pairs(labels):
    """Every unordered pair i < j of a batch."""
    n = len(as_labels(labels))
    i, j = np.triu_indices(n, k=1)
    return TupleSet("pairs", np.stack([i, j], axis=1), "exhaustive")


def rho_regularize_tuples(tuples, labels, p_switch, seed=0):
    """Swap positive and negative roles of each tuple with probability ``p_switch``."""
    if not 0.0 <= p_switch <= 1.0:
        raise ValueError("p_switch must lie in [0, 1]")
    if tuples.kind not in ("pairs", "triplets"):
        raise ValueError("only pairs and triplets can be switched")
    tuples.check(labels)
    rng = np.random.default_rng(seed)
    flip = rng.random(len(tuples)) < p_switch
    idx = tuples.indices.copy()
    if tuples.kind == "triplets":
        idx[flip, 1], idx[flip, 2] = tuples.indices[flip, 2], tuples.indices[flip, 1]
    return TupleSet(
        tuples.kind,
        idx,
        f"{tuples.miner}+rho",
        tuples.seed,
        tuples.switched ^ flip,
    )
