"""Losses that look at every pair inside the batch: generalized lifted
structure, N-pair, angular, histogram and multi-similarity."""

import math

import numpy as np

from .. import autodiff as ad
from ._base import finish, leaf, prepare, zero_output


def _masks(y):
    same = y[:, None] == y[None, :]
    np.fill_diagonal(same, False)
    diff = y[:, None] != y[None, :]
    return same, diff


def generalized_lifted_loss(batch, labels, gamma=1.0, nu=0.005):
    """Hinged log-sum-exp over positive and (margin - negative) distances per
    anchor, plus ``nu`` times the mean squared embedding norm."""
    x, y = prepare(batch, labels)
    same, diff = _masks(y)
    anchors = np.flatnonzero(same.any(axis=1) & diff.any(axis=1))
    emb = leaf(x)
    norm_term = nu * (emb * emb).sum(axis=1).mean()
    if not len(anchors):
        return finish(norm_term, emb, anchors=0)
    d = ad.all_pair_distances(emb)[anchors]
    pos = ad.logsumexp(d, axis=1, mask=same[anchors])
    neg = ad.logsumexp(gamma - d, axis=1, mask=diff[anchors])
    loss = ad.relu(pos + neg).mean() + norm_term
    return finish(loss, emb, anchors=len(anchors))


def _anchor_positive_pairs(y):
    same, _ = _masks(y)
    a, p = np.nonzero(same)
    return a, p


def _npair_graph(emb, y):
    a, p = _anchor_positive_pairs(y)
    if not len(a):
        return None, a, p
    sims = emb @ emb.T
    diff = y[a][:, None] != y[None, :]
    logits = sims[a] - sims[a, p].reshape(-1, 1)
    return ad.logsumexp(logits, axis=1, mask=diff, include_zero=True).mean(), a, p


def npair_loss(batch, labels, nu=0.005):
    x, y = prepare(batch, labels)
    emb = leaf(x)
    ranking, _, _ = _npair_graph(emb, y)
    loss = nu * (emb * emb).sum(axis=1).mean()
    if ranking is not None:
        loss = ranking + loss
    return finish(loss, emb)


def angular_coefficients(alpha):
    t2 = math.tan(alpha) ** 2
    return 4.0 * t2, 2.0 * (1.0 + t2)


def angular_loss(batch, labels, alpha=math.pi / 4, lam=2.0, nu=0.005):
    """N-pair loss plus ``lam`` times the angular log-sum-exp term
    log(1 + sum_n exp(4 tan^2(alpha) (a + p)^T n - 2 (1 + tan^2(alpha)) a^T p))."""
    x, y = prepare(batch, labels)
    emb = leaf(x)
    ranking, a, p = _npair_graph(emb, y)
    loss = nu * (emb * emb).sum(axis=1).mean()
    if ranking is None:
        return finish(loss, emb)
    c_np, c_ap = angular_coefficients(alpha)
    sims = emb @ emb.T
    logits = c_np * (sims[a] + sims[p]) - c_ap * sims[a, p].reshape(-1, 1)
    diff = y[a][:, None] != y[None, :]
    ang = ad.logsumexp(logits, axis=1, mask=diff, include_zero=True).mean()
    return finish(ranking + lam * ang + loss, emb)


def histogram_nodes(bins):
    return np.linspace(-1.0, 1.0, bins), 2.0 / (bins - 1)


def histogram_loss(batch, labels, bins=65):
    """Probability that a negative pair scores above a positive pair, estimated
    with triangular-kernel histograms over cosine similarities."""
    if bins < 2:
        raise ValueError("histogram needs at least 2 bins")
    x, y = prepare(batch, labels)
    i, j = np.triu_indices(len(x), k=1)
    positive = y[i] == y[j]
    if not positive.any() or positive.all():
        return zero_output(x)
    emb = leaf(x)
    sims = (emb[i] * emb[j]).sum(axis=1)
    nodes, delta = histogram_nodes(bins)

    def hist(mask):
        s = sims[np.flatnonzero(mask)].reshape(-1, 1)
        weights = ad.relu(1.0 - ad.absolute(s - nodes.reshape(1, -1)) / delta)
        return weights.mean(axis=0)

    h_pos, h_neg = hist(positive), hist(~positive)
    cdf_pos = h_pos.reshape(1, -1) @ leaf(np.triu(np.ones((bins, bins))))
    loss = (h_neg * cdf_pos.reshape(-1)).sum()
    return finish(loss, emb)


def multisimilarity_masks(sims, y, epsilon):
    """Positives and negatives that survive the epsilon-mining step.

    A negative is kept when it is more similar than the least similar positive
    minus epsilon; a positive is kept when it is less similar than the most
    similar negative plus epsilon. Anchors lacking either set keep nothing.
    """
    same, diff = _masks(y)
    keep_pos = np.zeros_like(same)
    keep_neg = np.zeros_like(diff)
    for a in range(len(y)):
        if not (same[a].any() and diff[a].any()):
            continue
        hardest_pos = sims[a, same[a]].min()
        hardest_neg = sims[a, diff[a]].max()
        keep_neg[a] = diff[a] & (sims[a] > hardest_pos - epsilon)
        keep_pos[a] = same[a] & (sims[a] < hardest_neg + epsilon)
    return keep_pos, keep_neg


def multisimilarity_loss(batch, labels, alpha=2.0, beta=40.0, lam=0.5, epsilon=0.1):
    x, y = prepare(batch, labels)
    keep_pos, keep_neg = multisimilarity_masks(x @ x.T, y, epsilon)
    if not (keep_pos.any() or keep_neg.any()):
        return zero_output(x)
    emb = leaf(x)
    sims = emb @ emb.T
    pos = ad.logsumexp(-alpha * (sims - lam), axis=1, mask=keep_pos, include_zero=True)
    neg = ad.logsumexp(beta * (sims - lam), axis=1, mask=keep_neg, include_zero=True)
    loss = (pos / alpha + neg / beta).mean()
    return finish(loss, emb)
