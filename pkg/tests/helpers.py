"""Shared oracles for the test suite. Nothing here imports library internals
beyond the public functions under test."""

import numpy as np

from dmlkit import mining
from dmlkit import objectives as obj

FD_STEP = 1e-5
GRAD_RTOL = 1e-4


def central_difference(f, x, h=FD_STEP):
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_batch(rng, n_max=16, d_max=8, d_min=3):
    """Labels with every class present at least twice, at least two classes."""
    n_classes = int(rng.integers(2, 5))
    per = int(rng.integers(2, max(3, n_max // n_classes + 1)))
    n = min(n_classes * per, n_max)
    per = n // n_classes
    y = np.repeat(np.arange(n_classes), per)
    d = int(rng.integers(d_min, d_max + 1))
    x = rng.standard_normal((len(y), d))
    return x, y


LOSS_NAMES = (
    "contrastive",
    "triplet",
    "margin",
    "genlifted",
    "npair",
    "angular",
    "arcface",
    "histogram",
    "multisimilarity",
    "proxynca",
    "quadruplet",
    "snr",
    "softtriple",
    "normsoftmax",
    "mixup_triplet",
)


def loss_case(name, seed):
    """Return ``(f, x0, proxy_f, p0)`` for one seeded random batch.

    ``f(x)`` maps embeddings to a :class:`LossOutput`; for proxy losses
    ``proxy_f(p)`` does the same as a function of the proxies.
    """
    rng = np.random.default_rng(seed)
    x, y = random_batch(rng)
    xn = unit_rows(x)
    C, D = int(y.max()) + 1, x.shape[1]
    trip = mining.random_miner(y, seed)
    pairs = mining.triplets_to_pairs(trip)
    proxies = obj.ProxyBank.random(C, D, 1, seed + 1).proxies
    proxies2 = obj.ProxyBank.random(C, D, 2, seed + 1).proxies
    proxy_f = p0 = None

    if name == "contrastive":
        pairs = mining.rho_regularize_tuples(pairs, y, 0.3, seed)
        f, x0 = (lambda e: obj.contrastive_loss(e, y, pairs, 0.5)), xn
    elif name == "triplet":
        f, x0 = (lambda e: obj.triplet_loss(e, y, trip, 0.5)), xn
    elif name == "margin":
        f, x0 = (lambda e: obj.margin_loss(e, y, trip, 1.0, 0.2)), xn
    elif name == "genlifted":
        f, x0 = (lambda e: obj.generalized_lifted_loss(e, y)), x
    elif name == "npair":
        f, x0 = (lambda e: obj.npair_loss(e, y)), x
    elif name == "angular":
        f, x0 = (lambda e: obj.angular_loss(e, y)), 0.3 * x
    elif name == "arcface":
        f, x0 = (lambda e: obj.arcface_loss(e, y, proxies)), xn
        proxy_f, p0 = (lambda p: obj.arcface_loss(xn, y, p)), proxies
    elif name == "histogram":
        f, x0 = (lambda e: obj.histogram_loss(e, y, 65)), xn
    elif name == "multisimilarity":
        f, x0 = (lambda e: obj.multisimilarity_loss(e, y)), xn
    elif name == "proxynca":
        f, x0 = (lambda e: obj.proxynca_loss(e, y, proxies)), xn
        proxy_f, p0 = (lambda p: obj.proxynca_loss(xn, y, p)), proxies
    elif name == "quadruplet":
        quads = mining.extend_to_quadruplets(trip, y, seed)
        f, x0 = (lambda e: obj.quadruplet_loss(e, y, quads)), xn
    elif name == "snr":
        f, x0 = (lambda e: obj.snr_loss(e, y, trip, 0.2, 0.005)), xn
    elif name == "softtriple":
        f, x0 = (lambda e: obj.softtriple_loss(e, y, proxies2)), xn
        proxy_f, p0 = (lambda p: obj.softtriple_loss(xn, y, p)), proxies2
    elif name == "normsoftmax":
        f, x0 = (lambda e: obj.normalized_softmax_loss(e, y, proxies)), xn
        proxy_f, p0 = (lambda p: obj.normalized_softmax_loss(xn, y, p)), proxies
    elif name == "mixup_triplet":
        lam = float(rng.uniform(0.2, 0.8))
        mixed, entries, weights = obj.mixup_batch(xn, y, lam, seed)
        sets = [mining.random_miner(entry, seed + k) for k, entry in enumerate(entries)]
        f, x0 = (lambda e: obj.mixup_triplet_loss(e, entries, sets, weights)), mixed
    else:
        raise KeyError(name)
    return f, x0, proxy_f, p0


def gradient_error(name, seed):
    """Worst relative error of every gradient a loss exposes on one batch."""
    f, x0, proxy_f, p0 = loss_case(name, seed)
    out = f(x0)
    errors = [relative_error(out.grad_embeddings, central_difference(lambda e: f(e).value, x0))]
    if proxy_f is not None:
        g = proxy_f(p0).grad_proxies
        errors.append(relative_error(g, central_difference(lambda p: proxy_f(p).value, p0)))
    return max(errors), out.value


# brute-force metric oracles -------------------------------------------------------


def brute_neighbours(x, q):
    """Indices of every other sample sorted by (distance, index), computed by
    explicit loops."""
    others = []
    for j in range(len(x)):
        if j == q:
            continue
        d = float(np.sqrt(sum((a - b) ** 2 for a, b in zip(x[q], x[j]))))
        others.append((d, j))
    others.sort()
    return [j for _, j in others]


def brute_recall(x, y, k):
    hits = 0
    for q in range(len(x)):
        if any(y[j] == y[q] for j in brute_neighbours(x, q)[:k]):
            hits += 1
    return hits / len(x)


def brute_f1(x, y):
    total = 0.0
    for q in range(len(x)):
        kc = sum(1 for j in range(len(y)) if j != q and y[j] == y[q])
        if kc == 0:
            continue
        hits = sum(1 for j in brute_neighbours(x, q)[:kc] if y[j] == y[q])
        p = hits / kc
        r = hits / kc
        total += 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return total / len(x)


def brute_map_at_c(x, y):
    total = 0.0
    for q in range(len(x)):
        kc = sum(1 for j in range(len(y)) if j != q and y[j] == y[q])
        if kc == 0:
            continue
        total += sum(1 for j in brute_neighbours(x, q)[:kc] if y[j] == y[q]) / kc
    return total / len(x)


def brute_map_at_1000(x, y, depth=1000):
    k = min(depth, len(x) - 1)
    return sum(sum(1 for j in brute_neighbours(x, q)[:k] if y[j] == y[q]) / k for q in range(len(x))) / len(x)
