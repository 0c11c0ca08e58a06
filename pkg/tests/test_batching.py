import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import sqrtm
from scipy.optimize import linprog

from dmlkit import batching
from helpers import unit_rows


def bank_fixture(n=60, d=4, classes=6, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % classes
    return batching.MemoryBank.from_embeddings(unit_rows(rng.standard_normal((n, d))), y)


# label samplers ---------------------------------------------------------------


def test_spc_unique_valid_batch():
    b = batching.spc_sampler([0, 0, 1, 1], 4, 2, 5)
    assert sorted(b.indices.tolist()) == [0, 1, 2, 3]
    assert b.b == 4 and b.sampler == "spc2"


def test_spc_label_histogram():
    y = np.repeat(np.arange(10), 6)
    for s in range(20):
        batch = batching.spc_sampler(y, 8, 4, s)
        _, counts = np.unique(y[batch.indices], return_counts=True)
        assert counts.tolist() == [4, 4]


def test_spc_errors():
    y = np.repeat(np.arange(3), 3)
    with pytest.raises(ValueError, match="divisible"):
        batching.spc_sampler(y, 7, 2)
    with pytest.raises(ValueError, match="classes"):
        batching.spc_sampler(y, 8, 4)


def test_spc_class_choice_is_uniform():
    y = np.repeat(np.arange(5), 2)
    counts = np.zeros(5)
    draws = 10000
    for s in range(draws):
        counts[np.unique(y[batching.spc_sampler(y, 4, 2, s).indices])] += 1
    p = 2 / 5
    sigma = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) < 3 * sigma)


def test_spc_r_properties():
    y = np.repeat(np.arange(20), 3)
    for s in range(50):
        batch = batching.spc_r_sampler(y, 6, s)
        _, counts = np.unique(y[batch.indices], return_counts=True)
        assert counts.max() >= 2
    pair = batching.spc_r_sampler(y, 2, 3)
    assert y[pair.indices[0]] == y[pair.indices[1]]
    with pytest.raises(ValueError):
        batching.spc_r_sampler(np.arange(6), 3)


def test_spc_r_distinct_class_distribution_matches_simulation():
    y = np.repeat(np.arange(6), 2)
    b, draws = 4, 4000

    def simulate(rng):
        head = rng.choice(len(y), size=b - 1, replace=False)
        rest = np.setdiff1d(np.arange(len(y)), head)
        partners = rest[np.isin(y[rest], y[head])]
        return len(np.unique(y[np.append(head, rng.choice(partners))]))

    rng = np.random.default_rng(99)
    sim = np.bincount([simulate(rng) for _ in range(draws)], minlength=5)
    got = np.bincount(
        [len(np.unique(y[batching.spc_r_sampler(y, b, s).indices])) for s in range(draws)], minlength=5
    )
    p = sim / draws
    sigma = np.sqrt(2 * draws * p * (1 - p)) + 1
    assert np.all(np.abs(got - sim) < 4 * sigma)


# memory bank ------------------------------------------------------------------


def test_bank_update_and_read():
    bank = batching.MemoryBank.empty([0, 1, 2], 2)
    with pytest.raises(ValueError, match="unfilled"):
        bank.read([0])
    new = batching.bank_update(bank, [1], np.array([[0.6, 0.8]]))
    np.testing.assert_array_equal(new.read([1]), [[0.6, 0.8]])
    assert new.filled.tolist() == [False, True, False]
    assert not bank.filled.any()
    again = batching.bank_update(new, [2], np.array([[1.0, 0.0]]))
    np.testing.assert_array_equal(again.entries[1], new.entries[1])
    with pytest.raises(ValueError, match="shape"):
        batching.bank_update(bank, [0, 1], np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError, match="unit"):
        batching.bank_update(bank, [0], np.array([[2.0, 0.0]]))
    with pytest.raises(IndexError):
        batching.bank_update(bank, [7], np.array([[1.0, 0.0]]))


def test_bank_full_after_one_epoch():
    rng = np.random.default_rng(0)
    y = np.arange(20) % 4
    bank = batching.MemoryBank.empty(y, 3)
    for chunk in np.array_split(rng.permutation(20), 5):
        bank = batching.bank_update(bank, chunk, unit_rows(rng.standard_normal((len(chunk), 3))))
    assert bank.filled.all()


def test_minibatch_invariants():
    with pytest.raises(ValueError):
        batching.MiniBatch([1, 1], "x")
    with pytest.raises(ValueError):
        batching.MiniBatch([3], "x")


# greedy coreset --------------------------------------------------------------


def brute_coreset(x, b, start):
    chosen = [start]
    while len(chosen) < b:
        best, best_d = None, -1.0
        for i in range(len(x)):
            if i in chosen:
                continue
            d = min(np.linalg.norm(x[i] - x[c]) for c in chosen)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
    return chosen


def test_coreset_examples():
    x = np.array([[0.0], [1.0], [2.0], [10.0]])
    assert batching.greedy_coreset_select(x, 2, start=0).tolist() == [0, 3]
    assert sorted(batching.greedy_coreset_select(x, 4, seed=3).tolist()) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        batching.greedy_coreset_select(x, 5)


@pytest.mark.parametrize("seed", range(4))
def test_coreset_matches_brute_force(seed):
    x = np.random.default_rng(seed).standard_normal((64, 3))
    got = batching.greedy_coreset_select(x, 10, start=seed)
    assert got.tolist() == brute_coreset(x, 10, seed)


def test_coreset_ties_go_to_lowest_index():
    x = np.array([[0.0], [1.0], [-1.0]])
    assert batching.greedy_coreset_select(x, 2, start=0).tolist() == [0, 1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_coreset_cover_radius_non_increasing(seed, b):
    x = np.random.default_rng(seed).standard_normal((30, 3))
    picks = batching.greedy_coreset_select(x, b, seed=seed)
    assert len(set(picks.tolist())) == b
    radii = [min(np.linalg.norm(x[picks[k]] - x[picks[j]]) for j in range(k)) for k in range(1, b)]
    assert all(a >= c - 1e-12 for a, c in zip(radii, radii[1:]))


def test_gc_select():
    bank = bank_fixture()
    batch = batching.gc_select(bank, 6, seed=1)
    assert batch.b == 6 and batch.sampler == "gc"
    np.testing.assert_array_equal(batching.gc_select(bank, 6, seed=1).indices, batch.indices)
    with pytest.raises(ValueError):
        batching.gc_select(bank, 61)


# histograms and Wasserstein ------------------------------------------------------


def lp_wasserstein(h1, h2, width=1.0):
    n = len(h1)
    pos = np.arange(n) * width
    cost = np.abs(pos[:, None] - pos[None, :]).ravel()
    rows = np.zeros((n, n * n))
    cols = np.zeros((n, n * n))
    for i in range(n):
        rows[i, i * n : (i + 1) * n] = 1
        cols[i, i::n] = 1
    res = linprog(cost, A_eq=np.vstack([rows, cols]), b_eq=np.concatenate([h1, h2]), bounds=(0, None))
    return res.fun


def test_wasserstein_examples():
    h = np.full(50, 1 / 50)
    assert batching.wasserstein_hist_distance(h, h) == 0.0
    a = np.zeros(50)
    b = np.zeros(50)
    a[10], b[11] = 1.0, 1.0
    assert batching.wasserstein_hist_distance(a, b) == pytest.approx(2.0 / 50)
    with pytest.raises(ValueError):
        batching.wasserstein_hist_distance(a * 2, b)
    with pytest.raises(ValueError):
        batching.wasserstein_hist_distance(a, b[:10])


@pytest.mark.parametrize("seed", range(6))
def test_wasserstein_matches_lp(seed):
    rng = np.random.default_rng(seed)
    h1, h2 = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
    got = batching.wasserstein_hist_distance(h1, h2, bin_width=1.0)
    assert got == pytest.approx(lp_wasserstein(h1, h2), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_wasserstein_is_metric(seed):
    rng = np.random.default_rng(seed)
    h = [rng.dirichlet(np.ones(12)) for _ in range(3)]
    w = batching.wasserstein_hist_distance
    assert abs(w(h[0], h[1]) - w(h[1], h[0])) < 1e-12
    assert w(h[0], h[2]) <= w(h[0], h[1]) + w(h[1], h[2]) + 1e-12


def test_distance_histogram():
    x = unit_rows(np.random.default_rng(0).standard_normal((20, 3)))
    h = batching.distance_histogram(x)
    assert h.shape == (50,) and h.sum() == pytest.approx(1.0)


# Frechet distance -----------------------------------------------------------------


def test_frechet_examples():
    mu, s = np.zeros(3), np.eye(3)
    assert batching.frechet_distance(mu, s, mu, s) == pytest.approx(0.0, abs=1e-12)
    z = np.zeros((2, 2))
    assert batching.frechet_distance([0, 0], z, [3, 0], z) == pytest.approx(9.0)
    assert batching.frechet_distance([0.0], [[4.0]], [0.0], [[1.0]]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        batching.frechet_distance([0.0], [[-1.0]], [0.0], [[1.0]])
    with pytest.raises(ValueError):
        batching.frechet_distance([0, 0], [[1, 2], [0, 1]], [0, 0], np.eye(2))


def random_psd(rng, d):
    a = rng.standard_normal((d, d + 2))
    return a @ a.T / (d + 2)


@pytest.mark.parametrize("seed", range(5))
def test_frechet_matches_sqrtm(seed):
    rng = np.random.default_rng(seed)
    d = 4
    m1, m2 = rng.standard_normal(d), rng.standard_normal(d)
    s1, s2 = random_psd(rng, d), random_psd(rng, d)
    ref = np.sum((m1 - m2) ** 2) + np.trace(s1 + s2 - 2 * np.real(sqrtm(s1 @ s2)))
    got = batching.frechet_distance(m1, s1, m2, s2)
    assert got == pytest.approx(ref, rel=1e-7, abs=1e-9)
    assert got == pytest.approx(batching.frechet_distance(m2, s2, m1, s1), abs=1e-9)
    assert batching.frechet_distance(m1, s1, m1, s1) == pytest.approx(0.0, abs=1e-9)


# DDM and FRD ----------------------------------------------------------------------


@pytest.mark.parametrize("select", [batching.ddm_select, batching.frd_select])
def test_single_candidate_is_returned(select):
    bank = bank_fixture()
    batch = select(bank, 5, m=1, seed=2)
    np.testing.assert_array_equal(batch.indices, batch.candidates[0])


@pytest.mark.parametrize("select", [batching.ddm_select, batching.frd_select])
def test_winner_is_exhaustive_minimum(select):
    bank = bank_fixture(n=80)
    batch = select(bank, 8, m=6, seed=4, b_star=40)
    assert len(batch.scores) == 6
    assert batch.scores[list(map(tuple, batch.candidates)).index(tuple(batch.indices))] == batch.scores.min()


def test_ddm_scores_match_independent_recomputation():
    bank = bank_fixture(n=50)
    batch = batching.ddm_select(bank, 6, m=5, seed=1, b_star=50)
    ref = bank.entries
    target = np.histogram(
        [np.linalg.norm(ref[i] - ref[j]) for i, j in itertools.combinations(range(50), 2)], 50, (0, 2)
    )[0]
    target = target / target.sum()
    for cand, score in zip(batch.candidates, batch.scores):
        x = bank.entries[cand]
        h = np.histogram([np.linalg.norm(x[i] - x[j]) for i, j in itertools.combinations(range(6), 2)], 50, (0, 2))[0]
        h = h / h.sum()
        assert score == pytest.approx(np.abs(np.cumsum(h - target)).sum() * 0.04, abs=1e-12)


def test_frd_prefers_moment_matched_candidate():
    rng = np.random.default_rng(0)
    ref = unit_rows(rng.standard_normal((40, 3)))
    far = unit_rows(np.array([1.0, 0.0, 0.0]) + 0.05 * rng.standard_normal((8, 3)))
    mu_ref, cov_ref = batching.batch_statistics(ref)
    spread = batching.frechet_distance(*batching.batch_statistics(ref[::5]), mu_ref, cov_ref)
    bunched = batching.frechet_distance(*batching.batch_statistics(far), mu_ref, cov_ref)
    assert spread < bunched


def test_matching_select_errors():
    bank = batching.MemoryBank.empty(np.zeros(10, dtype=int), 3)
    with pytest.raises(ValueError, match="filled"):
        batching.ddm_select(bank, 4)
    with pytest.raises(ValueError):
        batching.frd_select(bank_fixture(), 4, m=0)
    with pytest.raises(ValueError):
        batching.ddm_select(bank_fixture(n=10), 11)


@pytest.mark.parametrize("select", [batching.ddm_select, batching.frd_select])
def test_threaded_scoring_equals_sequential(select, monkeypatch):
    bank = bank_fixture(n=100)
    monkeypatch.setenv("DMLE_THREADS", "1")
    seq = select(bank, 10, m=8, seed=3)
    monkeypatch.setenv("DMLE_THREADS", "4")
    par = select(bank, 10, m=8, seed=3)
    np.testing.assert_array_equal(seq.indices, par.indices)
    np.testing.assert_array_equal(seq.scores, par.scores)
