from itertools import permutations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph, two_cliques
from mlsbm.baselines import (aggregate_mean, aggregate_sparse, align_labels, best_permutation, confusion_matrix,
                             fit_single_layer_sbm, majority_vote)
from mlsbm.graph import MultiLayerGraph, generate_mlsbm, GroundTruth
from mlsbm.metrics import nmi
from mlsbm.spectral import spectral_init

labels = st.lists(st.integers(0, 3), min_size=1, max_size=25)


class TestAggregation:
    def test_mean_majority_of_three(self):
        g = MultiLayerGraph.from_edges(3, [[(0, 1)], [(0, 1)], []])
        assert aggregate_mean(g).layers[0].tolist() == [[0, 1]]

    def test_mean_strict_at_half(self):
        g = MultiLayerGraph.from_edges(3, [[(0, 1)], []])
        assert aggregate_mean(g).edge_counts.tolist() == [0]

    def test_single_layer_identity(self, rng):
        g, _ = random_graph(rng, 10, 1)
        assert aggregate_mean(g) == g
        assert aggregate_sparse(g) == g

    def test_sparse_disjoint(self):
        g = MultiLayerGraph.from_edges(4, [[(0, 1)], [(1, 2), (2, 3)]])
        assert aggregate_sparse(g).edge_counts.tolist() == [3]

    def test_sparse_identical(self, rng):
        g1, _ = random_graph(rng, 10, 1)
        assert aggregate_sparse(MultiLayerGraph(10, g1.layers * 3)) == g1

    def test_sparse_is_or(self, rng):
        g, dense = random_graph(rng, 12, 3)
        np.testing.assert_array_equal(aggregate_sparse(g).dense()[0], dense.any(axis=0).astype(int))

    @given(st.integers(0, 10_000))
    def test_sparse_contains_mean(self, seed):
        g, dense = random_graph(np.random.default_rng(seed), 9, 4, density=0.5)
        mean = aggregate_mean(g).dense()[0]
        np.testing.assert_array_equal(mean, (dense.sum(0) > 2).astype(int))
        assert np.all(aggregate_sparse(g).dense()[0] >= mean)


class TestSingleLayer:
    def test_cliques(self):
        g, z = two_cliques(10, n_layers=1)
        fit = fit_single_layer_sbm(g, 2, spectral_init(g, 0, 2, 0))
        assert nmi(z, fit.z_hat) == 1.0

    def test_k_one(self, rng):
        g, dense = random_graph(rng, 10, 1)
        fit = fit_single_layer_sbm(g, 1, np.ones((10, 1)))
        assert fit.params.pi[0, 0, 0] == pytest.approx(dense.sum() / 90)

    def test_rejects_multilayer(self, rng):
        g, _ = random_graph(rng, 5, 2)
        with pytest.raises(ValueError):
            fit_single_layer_sbm(g, 2, np.full((5, 2), 0.5))

    @pytest.mark.slow
    def test_planted_single_layer(self):
        scores = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            truth = GroundTruth(rng.integers(4, size=300), 4)
            pi = np.full((1, 4, 4), 0.1)
            np.fill_diagonal(pi[0], 0.3)
            g = generate_mlsbm(truth, pi, seed)
            fit = fit_single_layer_sbm(g, 4, spectral_init(g, 0, 4, seed))
            scores.append(nmi(truth.z, fit.z_hat))
        assert np.mean(scores) >= 0.9


def brute_force_align(z_ref, z, K):
    best, best_perm = -1, None
    for perm in permutations(range(K)):
        agree = int(np.sum(np.array(perm)[z] == z_ref))
        if agree > best:
            best, best_perm = agree, perm
    return best


class TestAlignment:
    def test_identity(self):
        z = np.array([0, 1, 2, 1, 0])
        np.testing.assert_array_equal(align_labels(z, z, 3), z)

    def test_swap(self):
        z = np.array([0, 0, 1, 1, 2])
        w = np.array([1, 1, 0, 0, 2])
        np.testing.assert_array_equal(align_labels(z, w, 3), z)

    def test_tie_prefers_identity(self):
        # both matchings give agreement 2; identity wins
        z_ref = np.array([0, 1, 0, 1])
        z = np.array([0, 1, 1, 0])
        np.testing.assert_array_equal(align_labels(z_ref, z, 2), z)

    def test_against_exhaustive(self, rng):
        for _ in range(30):
            z_ref = rng.integers(4, size=30)
            z = rng.integers(4, size=30)
            aligned = align_labels(z_ref, z, 4)
            assert int(np.sum(aligned == z_ref)) == brute_force_align(z_ref, z, 4)

    def test_confusion_sums(self, rng):
        z1, z2 = rng.integers(3, size=20), rng.integers(5, size=20)
        c = confusion_matrix(z1, z2)
        assert c.shape == (5, 5) and c.sum() == 20

    @given(labels, st.permutations(range(4)))
    def test_bijection(self, z, perm):
        z = np.array(z)
        w = np.array(perm)[z]
        aligned = align_labels(z, w, 4)
        np.testing.assert_array_equal(aligned, z)
        # a relabelling: equal labels stay equal, different stay different
        assert len(set(zip(w.tolist(), aligned.tolist()))) == len(set(w.tolist()))

    def test_best_permutation_is_permutation(self, rng):
        perm = best_permutation(rng.integers(0, 9, size=(5, 5)))
        assert sorted(perm.tolist()) == list(range(5))


class TestMajority:
    def test_agree(self):
        z = np.array([0, 1, 1, 2])
        np.testing.assert_array_equal(majority_vote([z, z, z], 3), z)

    def test_strict_majority(self):
        a = np.array([0, 0, 1, 1])
        b = np.array([0, 0, 1, 1])
        c = np.array([1, 0, 1, 1])
        assert majority_vote([a, b, c], 2)[0] == 0

    def test_tie_goes_low(self):
        a = np.array([0, 0, 0, 1, 1, 1])
        b = np.array([1, 0, 0, 1, 1, 1])
        assert majority_vote([a, b], 2)[0] == 0

    def test_empty(self):
        with pytest.raises(ValueError):
            majority_vote([], 2)

    @given(st.lists(st.permutations(range(3)), min_size=2, max_size=4), st.integers(0, 1000))
    def test_invariant_to_relabelling(self, perms, seed):
        rng = np.random.default_rng(seed)
        base = [np.repeat([0, 1, 2], 6) for _ in perms]
        noisy = []
        for z in base:
            z = z.copy()
            flip = rng.random(len(z)) < 0.15
            z[flip] = rng.integers(3, size=flip.sum())
            noisy.append(z)
        plain = majority_vote(noisy, 3)
        # relabelling every assignment except the reference leaves the vote unchanged
        others = [noisy[0]] + [np.array(p)[z] for p, z in zip(perms[1:], noisy[1:])]
        np.testing.assert_array_equal(majority_vote(others, 3), plain)
        # relabelling the reference too relabels the output, except where the low-label tie rule applies
        allp = [np.array(p)[z] for p, z in zip(perms, noisy)]
        out = majority_vote(allp, 3)
        aligned = [noisy[0]] + [align_labels(noisy[0], z, 3) for z in noisy[1:]]
        votes = np.stack([np.bincount(col, minlength=3) for col in np.stack(aligned).T])
        top = np.sort(votes, axis=1)
        strict = top[:, -1] > top[:, -2]
        np.testing.assert_array_equal(out[strict], np.array(perms[0])[plain][strict])
