"""Evaluate every loss on one batch and check its gradient numerically."""

import numpy as np

from dmlkit import mining, objectives as obj

rng = np.random.default_rng(3)
labels = np.repeat(np.arange(4), 4)
raw = rng.standard_normal((len(labels), 8))
unit = raw / np.linalg.norm(raw, axis=1, keepdims=True)
trip = mining.distance_weighted_miner(unit, labels, seed=0)
proxies = obj.ProxyBank.random(4, 8, 1, seed=0).proxies

cases = {
    "contrastive": (unit, lambda e: obj.contrastive_loss(e, labels, mining.triplets_to_pairs(trip))),
    "triplet": (unit, lambda e: obj.triplet_loss(e, labels, trip)),
    "margin": (unit, lambda e: obj.margin_loss(e, labels, trip, 1.2)),
    "npair": (raw, lambda e: obj.npair_loss(e, labels)),
    "multisimilarity": (unit, lambda e: obj.multisimilarity_loss(e, labels)),
    "histogram": (unit, lambda e: obj.histogram_loss(e, labels, 65)),
    "proxynca": (unit, lambda e: obj.proxynca_loss(e, labels, proxies)),
    "arcface": (unit, lambda e: obj.arcface_loss(e, labels, proxies)),
}


def numeric_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (f(x + step).value - f(x - step).value) / (2 * h)
    return g


for name, (x, f) in cases.items():
    out = f(x)
    num = numeric_grad(f, x)
    err = np.linalg.norm(out.grad_embeddings - num) / max(np.linalg.norm(num), 1e-12)
    print(f"{name:16s} loss={out.value:9.4f}  |grad|={np.linalg.norm(out.grad_embeddings):8.4f}  fd rel err={err:.1e}")
