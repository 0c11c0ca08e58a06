"""Tuple-based ranking losses: contrastive, triplet, margin, quadruplet, SNR and
the mixup triplet variant.

Each loss averages over the tuples it is handed, so its scale does not depend
on how many tuples a miner produced. An empty tuple set gives zero loss and
zero gradient.
"""

import numpy as np

from .. import autodiff as ad
from ..mining import triplets_to_pairs
from ._base import coerce_tuples, check_range, finish, leaf, prepare, zero_output


def _pair_roles(tuples, y):
    """True where a pair should attract; switched pairs have their role flipped."""
    i, j = tuples.indices[:, 0], tuples.indices[:, 1]
    return (y[i] == y[j]) ^ tuples.switched


def contrastive_loss(batch, labels, pairs, gamma=1.0):
    x, y = prepare(batch, labels)
    pairs = coerce_tuples(pairs, "pairs")
    check_range(pairs.indices, len(x))
    if not len(pairs):
        return zero_output(x)
    attract = _pair_roles(pairs, y)
    emb = leaf(x)
    d = ad.gathered_distances(emb, pairs.indices[:, 0], pairs.indices[:, 1])
    per_pair = ad.where(attract, d, ad.relu(gamma - d))
    return finish(per_pair.mean(), emb)


def triplet_loss(batch, labels, triplets, gamma=0.2):
    x, y = prepare(batch, labels)
    triplets = coerce_tuples(triplets, "triplets")
    check_range(triplets.indices, len(x))
    triplets.check(y)
    if not len(triplets):
        return zero_output(x)
    emb = leaf(x)
    return finish(_triplet_terms(emb, triplets.indices, gamma).mean(), emb)


def _triplet_terms(emb, idx, gamma):
    a, p, n = idx[:, 0], idx[:, 1], idx[:, 2]
    return ad.relu(ad.gathered_distances(emb, a, p) - ad.gathered_distances(emb, a, n) + gamma)


def margin_loss(batch, labels, tuples, beta=1.2, gamma=0.2):
    """Pairs are pushed to the correct side of a learnable boundary ``beta``.

    Triplets are split into their anchor-positive and anchor-negative pairs.
    The gradient with respect to ``beta`` is returned in ``grad_beta``.
    """
    x, y = prepare(batch, labels)
    if getattr(tuples, "kind", None) == "triplets":
        tuples = triplets_to_pairs(tuples)
    pairs = coerce_tuples(tuples, "pairs")
    check_range(pairs.indices, len(x))
    if not len(pairs):
        return zero_output(x, with_beta=True)
    sign = np.where(_pair_roles(pairs, y), 1.0, -1.0)
    emb, b = leaf(x), leaf(beta)
    d = ad.gathered_distances(emb, pairs.indices[:, 0], pairs.indices[:, 1])
    loss = ad.relu(gamma + sign * (d - b)).mean()
    return finish(loss, emb, beta=b)


def quadruplet_loss(batch, labels, quadruplets, gamma1=1.0, gamma2=0.5):
    x, y = prepare(batch, labels)
    quads = coerce_tuples(quadruplets, "quadruplets")
    check_range(quads.indices, len(x))
    quads.check(y)
    if not len(quads):
        return zero_output(x)
    emb = leaf(x)
    a, p, n1, n2 = quads.indices.T
    d_an1 = ad.gathered_distances(emb, a, n1)
    first = ad.relu(ad.gathered_distances(emb, a, p) - d_an1 + gamma1)
    second = ad.relu(d_an1 - ad.gathered_distances(emb, n2, n1) + gamma2)
    return finish((first + second).mean(), emb)


def snr_distance(anchor, other):
    """Variance of the difference over the variance of the anchor (coordinate-wise)."""
    anchor = np.asarray(anchor, dtype=np.float64)
    noise = np.asarray(other, dtype=np.float64) - anchor
    return noise.var(axis=-1) / anchor.var(axis=-1)


def _var(v):
    centered = v - v.mean(axis=-1).reshape(*v.shape[:-1], 1)
    return (centered * centered).mean(axis=-1)


def snr_loss(batch, labels, triplets, gamma=0.2, lam=0.005):
    x, y = prepare(batch, labels)
    triplets = coerce_tuples(triplets, "triplets")
    check_range(triplets.indices, len(x))
    triplets.check(y)
    if not len(triplets):
        return zero_output(x)
    a, p, n = triplets.indices.T
    if np.any(x[a].var(axis=1) <= 1e-12):
        raise ValueError("SNR distance undefined for an anchor with zero variance")
    emb = leaf(x)
    anchor_var = _var(emb[a])
    d_ap = _var(emb[p] - emb[a]) / anchor_var
    d_an = _var(emb[n] - emb[a]) / anchor_var
    hinge = ad.relu(d_ap - d_an + gamma).mean()
    touched = np.unique(triplets.indices)
    penalty = ad.absolute(emb[touched].sum(axis=1)).mean()
    return finish(hinge + lam * penalty, emb)


def mixup_triplet_loss(batch, label_entries, triplet_sets, weights, gamma=0.2):
    """Mixup-weighted sum of triplet losses, one triplet set per label entry.

    ``label_entries[k]`` holds the k-th mixed label of every sample and
    ``triplet_sets[k]`` the triplets mined against it; ``weights`` are the
    interpolation coefficients and must sum to one.
    """
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(label_entries) != len(weights) or len(triplet_sets) != len(weights):
        raise ValueError("need one label entry and one triplet set per weight")
    if np.any(weights < 0) or np.any(weights > 1) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("mixup weights must lie in [0, 1] and sum to 1")
    x, _ = prepare(batch, label_entries[0])
    emb = leaf(x)
    total = None
    for lam, y, triplets in zip(weights, label_entries, triplet_sets):
        _, y = prepare(x, y)
        triplets = coerce_tuples(triplets, "triplets")
        check_range(triplets.indices, len(x))
        triplets.check(y)
        if not len(triplets):
            continue
        term = lam * _triplet_terms(emb, triplets.indices, gamma).mean()
        total = term if total is None else total + term
    if total is None:
        return zero_output(x)
    return finish(total, emb)


def mixup_batch(batch, labels, lam, seed=0):
    """Mix every sample with a partner from a seeded permutation.

    Returns the mixed embeddings, both label entries and the weights
    ``(lam, 1 - lam)``.
    """
    x, y = prepare(batch, labels)
    perm = np.random.default_rng(seed).permutation(len(x))
    mixed = lam * x + (1.0 - lam) * x[perm]
    return mixed, (y, y[perm]), (lam, 1.0 - lam)
