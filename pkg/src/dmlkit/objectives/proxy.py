"""Proxy and classification losses: ArcFace, ProxyNCA, SoftTriple and
normalized softmax.

Proxies are normalized inside each loss, so ``grad_proxies`` is the gradient
with respect to the raw proxy parameters that get updated.
"""

import numpy as np

from .. import autodiff as ad
from ._base import (
    COS_EPS,
    ProxyBank,
    check_proxy_labels,
    check_unit_proxies,
    finish,
    leaf,
    prepare,
)


def _proxy_array(proxies):
    if isinstance(proxies, ProxyBank):
        return proxies.proxies
    p = np.asarray(proxies, dtype=np.float64)
    return p[:, None, :] if p.ndim == 2 else p


def _single(proxies):
    p = _proxy_array(proxies)
    if p.shape[1] != 1:
        raise ValueError("this loss expects exactly one proxy per class")
    return p[:, 0, :]


def _nll_excluding_true(logits, true_logit, other_mask):
    """-log(exp(true) / sum_{others} exp(logit)), averaged over samples."""
    return (ad.logsumexp(logits, axis=1, mask=other_mask) - true_logit).mean()


def arcface_logits(batch, labels, weights, margin=0.5, scale=16.0):
    x, y = prepare(batch, labels)
    w = _single(weights)
    check_proxy_labels(y, len(w))
    w_hat = w / np.linalg.norm(w, axis=1, keepdims=True)
    cosines = np.clip(x @ w_hat.T, -1 + COS_EPS, 1 - COS_EPS)
    logits = scale * cosines
    rows = np.arange(len(x))
    logits[rows, y] = scale * np.cos(np.arccos(cosines[rows, y]) + margin)
    return logits


def arcface_loss(batch, labels, weights, margin=0.5, scale=16.0):
    """Softmax over scaled cosines with an additive angular margin on the true
    class. Only classes present in the batch compete in the denominator."""
    x, y = prepare(batch, labels)
    w_raw = _single(weights)
    check_proxy_labels(y, len(w_raw))
    emb, w = leaf(x), leaf(w_raw)
    cosines = ad.clip(emb @ ad.normalize_rows(w).T, -1 + COS_EPS, 1 - COS_EPS)
    rows = np.arange(len(x))
    true_logit = scale * ad.cos(ad.arccos(cosines[rows, y]) + margin)
    present = np.zeros(len(w_raw), dtype=bool)
    present[y] = True
    is_true = np.zeros(cosines.shape, dtype=bool)
    is_true[rows, y] = True
    logits = ad.where(is_true, true_logit.reshape(-1, 1), scale * cosines)
    denom_mask = present[None, :]
    loss = (ad.logsumexp(logits, axis=1, mask=denom_mask) - true_logit).mean()
    out = finish(loss, emb, proxies=w)
    out.grad_proxies = out.grad_proxies[:, None, :]
    return out


def proxynca_loss(batch, labels, proxies):
    x, y = prepare(batch, labels)
    p_raw = _single(proxies)
    check_proxy_labels(y, len(p_raw))
    emb, p = leaf(x), leaf(p_raw)
    p_hat = ad.normalize_rows(p)
    n, c = len(x), len(p_raw)
    diff = emb.reshape(n, 1, -1) - p_hat.reshape(1, c, -1)
    dist = ad.sqrt((diff * diff).sum(axis=-1))
    rows = np.arange(n)
    others = np.ones((n, c), dtype=bool)
    others[rows, y] = False
    loss = _nll_excluding_true(-1.0 * dist, -1.0 * dist[rows, y], others)
    out = finish(loss, emb, proxies=p)
    out.grad_proxies = out.grad_proxies[:, None, :]
    return out


def softtriple_similarity(x, proxies, gamma=0.1):
    """Soft class similarity: proxy similarities weighted by a within-class
    softmax at temperature ``gamma``. Returns shape ``(n, C)``."""
    p = _proxy_array(proxies)
    p = p / np.linalg.norm(p, axis=-1, keepdims=True)
    s = np.einsum("nd,ckd->nck", np.asarray(x, dtype=np.float64), p)
    w = np.exp((s - s.max(axis=2, keepdims=True)) / gamma)
    w /= w.sum(axis=2, keepdims=True)
    return (w * s).sum(axis=2)


def softtriple_loss(batch, labels, proxies, tau=0.2, lam=8.0, delta=0.01, gamma=0.1):
    x, y = prepare(batch, labels)
    p_raw = _proxy_array(proxies)
    check_unit_proxies(p_raw)
    check_proxy_labels(y, len(p_raw))
    n, (c, k, d) = len(x), p_raw.shape
    emb, p = leaf(x), leaf(p_raw)
    p_hat = ad.normalize_rows(p.reshape(c * k, d))
    s = (emb @ p_hat.T).reshape(n, c, k)
    within = s / gamma - ad.logsumexp(s / gamma, axis=2).reshape(n, c, 1)
    sim = (ad.exp(within) * s).sum(axis=2)
    rows = np.arange(n)
    is_true = np.zeros((n, c), dtype=bool)
    is_true[rows, y] = True
    logits = lam * (sim - delta * is_true)
    base = (ad.logsumexp(logits, axis=1) - logits[rows, y]).mean()
    loss = base
    if k > 1:
        loss = base + tau * _proxy_spread(p_hat, c, k)
    return finish(loss, emb, proxies=p)


def _proxy_spread(p_hat, c, k):
    """Mean pairwise chord length between distinct proxies of the same class."""
    d = p_hat.shape[-1]
    grid = p_hat.reshape(c, k, d)
    total = None
    for cls in range(c):
        block = grid[cls]
        gram = block @ block.T
        off = np.nonzero(~np.eye(k, dtype=bool))
        chords = ad.sqrt(ad.relu(2.0 - 2.0 * gram[off]))
        part = chords.sum()
        total = part if total is None else total + part
    return total / (c * k * (k - 1))


def normalized_softmax_loss(batch, labels, proxies, temperature=0.05):
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    x, y = prepare(batch, labels)
    p_raw = _single(proxies)
    check_proxy_labels(y, len(p_raw))
    emb, p = leaf(x), leaf(p_raw)
    logits = emb @ ad.normalize_rows(p).T / temperature
    rows = np.arange(len(x))
    others = np.ones(logits.shape, dtype=bool)
    others[rows, y] = False
    loss = _nll_excluding_true(logits, logits[rows, y], others)
    out = finish(loss, emb, proxies=p)
    out.grad_proxies = out.grad_proxies[:, None, :]
    return out
