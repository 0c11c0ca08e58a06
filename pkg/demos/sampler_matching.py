"""How well does each sampler's mini-batch mirror the whole embedding bank?

Builds a memory bank of clustered unit vectors, draws a batch with every
strategy and reports how far its pairwise-distance histogram is from the
bank's (Wasserstein) and how far its first two moments are (Frechet).
"""

import numpy as np

from dmlkit import batching

rng = np.random.default_rng(0)
n_classes, per_class, dim, b = 40, 12, 16, 32
centers = rng.standard_normal((n_classes, dim))
labels = np.repeat(np.arange(n_classes), per_class)
emb = centers[labels] + 0.6 * rng.standard_normal((len(labels), dim))
emb /= np.linalg.norm(emb, axis=1, keepdims=True)
bank = batching.MemoryBank.from_embeddings(emb, labels)

target_hist = batching.distance_histogram(emb)
target_stats = batching.batch_statistics(emb)

batches = {
    "spc2": batching.spc_sampler(labels, b, 2, seed=1),
    "spc8": batching.spc_sampler(labels, b, 8, seed=1),
    "spcr": batching.spc_r_sampler(labels, b, seed=1),
    "gc": batching.gc_select(bank, b, seed=1),
    "ddm": batching.ddm_select(bank, b, m=16, seed=1),
    "frd": batching.frd_select(bank, b, m=16, seed=1),
}

print(f"{'sampler':8s} {'wasserstein':>12s} {'frechet':>10s} {'classes':>8s}")
for name, batch in batches.items():
    x = emb[batch.indices]
    w = batching.wasserstein_hist_distance(batching.distance_histogram(x), target_hist)
    f = batching.frechet_distance(*batching.batch_statistics(x), *target_stats)
    print(f"{name:8s} {w:12.4f} {f:10.4f} {len(np.unique(labels[batch.indices])):8d}")

# SPC-8 packs few classes into the batch, so its distance histogram is skewed
# toward small intra-class distances. The greedy coreset spreads out and
# overshoots the other way.
