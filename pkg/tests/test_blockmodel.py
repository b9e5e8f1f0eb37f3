import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph, symmetric_probs, two_cliques
from mlsbm.blockmodel import (MLSBMParams, RMLSBMParams, bernoulli_kl, block_counts, box_limit,
                              decomposition_residual, decomposition_residual_restricted, estimating_residuals,
                              expected_log_likelihood, log_likelihood_mlsbm, logit, mle_pi_hat, phi_transform,
                              pi_bar, profile_log_likelihood, restricted_log_likelihood, rmle_fixed_z,
                              RestrictedObjective)
from mlsbm.graph import MultiLayerGraph
from mlsbm.lbfgs import LBFGSOptions

TIGHT = LBFGSOptions(gtol=1e-11, max_iter=2000)


# -- independent oracles: plain loops over unordered pairs ------------------

def naive_loglik(dense, z, pi):
    total = 0.0
    n = dense.shape[1]
    for m in range(dense.shape[0]):
        for i in range(n):
            for j in range(i + 1, n):
                p = min(max(pi[m, z[i], z[j]], 1e-12), 1 - 1e-12)
                total += math.log(p) if dense[m, i, j] else math.log(1 - p)
    return total


def naive_expected(P, z, pi):
    total = 0.0
    n = P.shape[1]
    for m in range(P.shape[0]):
        for i in range(n):
            for j in range(i + 1, n):
                p = pi[m, z[i], z[j]]
                total += P[m, i, j] * math.log(p) + (1 - P[m, i, j]) * math.log(1 - p)
    return total


def naive_block_mean(X, z, K):
    out = np.zeros((X.shape[0], K, K))
    n = X.shape[1]
    for m in range(X.shape[0]):
        s, c = np.zeros((K, K)), np.zeros((K, K))
        for i in range(n):
            for j in range(i + 1, n):
                q, l = z[i], z[j]
                s[q, l] += X[m, i, j]
                c[q, l] += 1
                if q != l:
                    s[l, q] += X[m, i, j]
                    c[l, q] += 1
        out[m] = np.divide(s, c, out=np.zeros_like(s), where=c > 0)
    return out


def random_P(rng, n, n_layers):
    P = rng.uniform(0.05, 0.95, size=(n_layers, n, n))
    P = (P + P.transpose(0, 2, 1)) / 2
    for m in range(n_layers):
        np.fill_diagonal(P[m], 0.0)
    return P


def random_instance(rng):
    n = int(rng.integers(4, 13))
    M = int(rng.integers(1, 4))
    K = int(rng.integers(1, 4))
    g, dense = random_graph(rng, n, M, density=rng.uniform(0.2, 0.8))
    z = rng.integers(K, size=n)
    return g, dense, random_P(rng, n, M), z, K


class TestBernoulliKL:
    def test_equal(self):
        assert bernoulli_kl(0.5, 0.5) == 0.0

    def test_half_quarter(self):
        expected = mpmath.mpf("0.5") * mpmath.log(2) + mpmath.mpf("0.5") * mpmath.log(mpmath.mpf(2) / 3)
        assert bernoulli_kl(0.5, 0.25) == pytest.approx(float(expected), abs=1e-14)
        assert bernoulli_kl(0.5, 0.25) == pytest.approx(0.14384103622589, abs=1e-13)

    def test_clamped_zero(self):
        assert bernoulli_kl(0.0, 0.5) == pytest.approx(math.log(2), abs=1e-10)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_nonnegative_and_zero_iff_equal(self, a, b):
        d = bernoulli_kl(a, b)
        assert d >= 0
        ca, cb = min(max(a, 1e-12), 1 - 1e-12), min(max(b, 1e-12), 1 - 1e-12)
        if ca == cb:
            assert d == 0
        elif abs(ca - cb) > 1e-3:
            assert d > 0


class TestBlockCounts:
    def test_two_two(self):
        c = block_counts([0, 0, 1, 1], 2)
        assert c.class_sizes.tolist() == [2, 2]
        assert c.pair_counts.tolist() == [[1, 4], [4, 1]]

    def test_single_block(self):
        assert block_counts([0, 0, 0], 1).pair_counts.tolist() == [[3]]

    def test_singletons(self):
        c = block_counts([0, 1, 2], 3).pair_counts
        assert np.diag(c).tolist() == [0, 0, 0]
        assert c[~np.eye(3, dtype=bool)].tolist() == [1] * 6

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            block_counts([0, 3], 3)

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=30))
    def test_total_pairs(self, z):
        n = len(z)
        c = block_counts(z, 5).pair_counts
        assert np.triu(c).sum() == n * (n - 1) // 2


class TestMlePiHat:
    def test_empty(self):
        g = MultiLayerGraph.from_edges(5, [[]])
        assert not mle_pi_hat(g, [0, 0, 1, 1, 1], 2).any()

    def test_three_node(self):
        g = MultiLayerGraph.from_edges(3, [[(0, 1), (0, 2)]])
        np.testing.assert_allclose(mle_pi_hat(g, [0, 0, 1], 2)[0], [[1.0, 0.5], [0.5, 0.0]])

    def test_complete(self):
        a = np.ones((6, 6), dtype=int) - np.eye(6, dtype=int)
        g = MultiLayerGraph.from_dense(a)
        np.testing.assert_allclose(mle_pi_hat(g, [0, 1, 2, 0, 1, 2], 3), 1.0)

    def test_matches_oracle(self, rng):
        for _ in range(20):
            g, dense, _, z, K = random_instance(rng)
            np.testing.assert_allclose(mle_pi_hat(g, z, K), naive_block_mean(dense, z, K), atol=1e-12)


class TestPiBar:
    def test_constant(self):
        P = np.full((2, 5, 5), 0.3)
        np.testing.assert_allclose(pi_bar(P, [0, 1, 0, 1, 1], 2), 0.3)

    def test_block_constant_recovers(self, rng):
        z = np.array([0, 1, 2, 0, 1, 2, 0])
        pi = symmetric_probs(rng, 2, 3)
        P = pi[:, z][:, :, z]
        np.testing.assert_allclose(pi_bar(P, z, 3), pi, atol=1e-12)

    def test_matches_oracle(self, rng):
        for _ in range(20):
            _, _, P, z, K = random_instance(rng)
            np.testing.assert_allclose(pi_bar(P, z, K), naive_block_mean(P, z, K), atol=1e-12)


class TestLikelihood:
    def test_uniform(self, rng):
        g, _ = random_graph(rng, 7, 3)
        pi = np.full((3, 2, 2), 0.5)
        assert log_likelihood_mlsbm(g, rng.integers(2, size=7), pi) == pytest.approx(-21 * 3 * math.log(2))

    def test_single_edge(self):
        g = MultiLayerGraph.from_edges(2, [[(0, 1)]])
        assert log_likelihood_mlsbm(g, [0, 0], np.array([[[0.3]]])) == pytest.approx(math.log(0.3))

    def test_matches_oracle(self, rng):
        for _ in range(20):
            g, dense, _, z, K = random_instance(rng)
            pi = symmetric_probs(rng, g.n_layers, K)
            assert log_likelihood_mlsbm(g, z, pi) == pytest.approx(naive_loglik(dense, z, pi), abs=1e-10)

    def test_accepts_params_object(self, rng):
        g, _ = random_graph(rng, 6, 2)
        pi = symmetric_probs(rng, 2, 2)
        p = MLSBMParams(pi, np.array([0.5, 0.5]))
        z = [0, 1, 0, 1, 1, 0]
        assert log_likelihood_mlsbm(g, z, p) == log_likelihood_mlsbm(g, z, pi)

    def test_profile_empty(self):
        g = MultiLayerGraph.from_edges(6, [[], []])
        assert profile_log_likelihood(g, [0, 1, 2, 0, 1, 2], 3) == 0.0

    def test_profile_cliques(self):
        g, z = two_cliques(5)
        assert profile_log_likelihood(g, z, 2) == 0.0

    def test_profile_dominates_random_pi(self, rng):
        g, _, _, z, K = random_instance(rng)
        best = profile_log_likelihood(g, z, K)
        assert best == pytest.approx(log_likelihood_mlsbm(g, z, mle_pi_hat(g, z, K)), abs=1e-6)
        for _ in range(100):
            assert log_likelihood_mlsbm(g, z, symmetric_probs(rng, g.n_layers, K, 0.01, 0.99)) <= best + 1e-9

    def test_expected_block_constant(self, rng):
        z = np.array([0, 0, 1, 1, 1])
        pi = symmetric_probs(rng, 2, 2)
        P = pi[:, z][:, :, z]
        n = block_counts(z, 2).pair_counts
        closed = sum(n[q, l] * (pi[m, q, l] * math.log(pi[m, q, l]) + (1 - pi[m, q, l]) * math.log(1 - pi[m, q, l]))
                     for m in range(2) for q in range(2) for l in range(q, 2))
        assert expected_log_likelihood(P, z, pi) == pytest.approx(closed, abs=1e-10)

    def test_expected_zero_P(self, rng):
        z = np.array([0, 1, 1, 0])
        pi = symmetric_probs(rng, 1, 2)
        n = block_counts(z, 2).pair_counts
        closed = sum(n[q, l] * math.log(1 - pi[0, q, l]) for q in range(2) for l in range(q, 2))
        assert expected_log_likelihood(np.zeros((1, 4, 4)), z, pi) == pytest.approx(closed, abs=1e-12)

    def test_expected_matches_oracle(self, rng):
        for _ in range(20):
            _, _, P, z, K = random_instance(rng)
            pi = symmetric_probs(rng, P.shape[0], K)
            assert expected_log_likelihood(P, z, pi) == pytest.approx(naive_expected(P, z, pi), abs=1e-10)


class TestDecomposition:
    def test_random_instances(self, rng):
        worst = max(decomposition_residual(g, P, z, K) for g, _, P, z, K in (random_instance(rng) for _ in range(50)))
        assert worst < 1e-8

    def test_empty_graph(self, rng):
        g = MultiLayerGraph.from_edges(8, [[], []])
        assert decomposition_residual(g, random_P(rng, 8, 2), rng.integers(2, size=8), 2) < 1e-8


class TestPhiTransform:
    @pytest.mark.parametrize("p, b, expected", [(0, 0, 0.5), (1, -1, 0.5), (math.log(3), 0, 0.75)])
    def test_values(self, p, b, expected):
        assert phi_transform(p, b) == pytest.approx(expected, abs=1e-15)

    def test_extremes_finite(self):
        assert phi_transform(800.0, 0.0) == 1.0
        assert phi_transform(-800.0, 0.0) == 0.0

    @given(st.floats(-15, 15), st.floats(-15, 15))
    def test_log_odds_inverse(self, p, b):
        # both tails evaluated directly, so the check is not limited by 1 - x cancelling
        up, down = float(phi_transform(p, b)), float(phi_transform(-p, -b))
        assert math.log(up) - math.log(down) == pytest.approx(p + b, abs=1e-10)
        assert up + down == pytest.approx(1.0, abs=1e-15)

    @given(st.floats(-27, 5))  # inside the 1e-12 clamp and where 1 - x is resolved
    def test_logit_helper_inverse(self, s):
        assert float(logit(phi_transform(s, 0.0))) == pytest.approx(s, abs=1e-10)

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_shift_invariance(self, p, b, c):
        assert phi_transform(p + c, b - c) == pytest.approx(phi_transform(p, b), abs=1e-12)


class TestRestrictedParams:
    def test_free_count(self):
        assert RMLSBMParams.n_free(4, 3) == 10 + 2

    def test_normalized_centres_and_clips(self):
        p = RMLSBMParams(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([5.0, -1.0, 2.0]))
        q = p.normalized(10.0)
        assert abs(q.beta.sum()) < 1e-12
        np.testing.assert_allclose(q.phi(), p.phi(), atol=1e-12)
        r = RMLSBMParams(np.zeros((2, 2)), np.array([30.0, -1.0, -1.0])).normalized(5.0)
        assert abs(r.beta.sum()) < 1e-10
        assert np.all(np.abs(r.beta) <= 5.0) and np.all(np.abs(r.pi) <= 5.0)

    @pytest.mark.parametrize("K, M", [(1, 1), (2, 3), (4, 2)])
    def test_neg_matches_value_and_gradient(self, rng, K, M):
        E = symmetric_probs(rng, M, K) * 5
        W = np.full((K, K), 6.0)
        obj = RestrictedObjective(E, W)
        p = RMLSBMParams(symmetric_probs(rng, 1, K, -2, 2)[0], rng.normal(size=M))
        val, grad = obj.neg(obj.pack(p))
        assert val == pytest.approx(-obj.value(p), abs=1e-12)
        np.testing.assert_allclose(grad, -np.concatenate(obj.gradient(p)), atol=1e-12)
        assert obj.unpack(obj.pack(p)).pi.tolist() == p.pi.tolist()


def _converged_instance(rng, n=10, M=2, K=2, tries=50):
    """Random instance whose restricted MLE is interior (no empty blocks)."""
    for _ in range(tries):
        g, dense = random_graph(rng, n, M, density=0.5)
        z = rng.integers(K, size=n)
        params, res = rmle_fixed_z(g, z, K, TIGHT)
        if (res.converged and np.bincount(z, minlength=K).min() >= 2
                and np.max(np.abs(estimating_residuals(g, z, params))) < 1e-9):
            return g, dense, z, params
    raise RuntimeError("no interior instance found")


class TestRmle:
    def test_single_layer_reduces(self, rng):
        g, dense, z, params = _converged_instance(rng, M=1)
        assert params.beta.tolist() == [0.0]
        np.testing.assert_allclose(params.phi()[0], mle_pi_hat(g, z, 2)[0], atol=1e-8)

    def test_identical_layers(self, rng):
        g1, _ = random_graph(rng, 12, 1, density=0.5)
        g = MultiLayerGraph(12, g1.layers * 3)
        z = np.arange(12) % 2
        params, res = rmle_fixed_z(g, z, 2, TIGHT)
        assert np.max(np.abs(params.beta)) < 1e-6
        np.testing.assert_allclose(params.phi()[0], mle_pi_hat(g1, z, 2)[0], atol=1e-6)

    def test_estimating_residuals_at_optimum(self, rng):
        g, _, z, params = _converged_instance(rng, n=6, M=2, K=2)
        r = estimating_residuals(g, z, params)
        assert r.shape == (2 + 3,)
        assert np.max(np.abs(r)) < 1e-6

    def test_perturbed_beta_residual(self, rng):
        g, _, z, params = _converged_instance(rng, n=6, M=2, K=2)
        beta = params.beta.copy()
        beta[0] += 0.5
        r = estimating_residuals(g, z, RMLSBMParams(params.pi, beta))
        assert r[0] > 1e-3

    def test_single_layer_logit_residuals(self, rng):
        g, _ = random_graph(rng, 9, 1, density=0.5)
        z = np.arange(9) % 3
        phat = mle_pi_hat(g, z, 3)[0]
        r = estimating_residuals(g, z, RMLSBMParams(logit(phat), np.zeros(1)))
        assert np.max(np.abs(r)) < 1e-9

    def test_box_respected(self, rng):
        g = MultiLayerGraph.from_edges(6, [[(0, 1)], [(2, 3)]])
        params, _ = rmle_fixed_z(g, np.array([0, 0, 0, 1, 1, 1]), 2)
        limit = box_limit(2, 6)
        assert np.all(np.abs(params.pi) <= limit + 1e-12)
        assert np.all(np.abs(params.beta) <= limit + 1e-12)
        assert abs(params.beta.sum()) < 1e-10

    def test_restricted_below_unrestricted(self, rng):
        for _ in range(10):
            g, _ = random_graph(rng, 10, 3, density=rng.uniform(0.2, 0.7))
            z = rng.integers(2, size=10)
            params, _ = rmle_fixed_z(g, z, 2, TIGHT)
            assert restricted_log_likelihood(g, z, params) <= profile_log_likelihood(g, z, 2) + 1e-9

    def test_restricted_loglik_matches_mlsbm_form(self, rng):
        g, _ = random_graph(rng, 8, 2)
        z = rng.integers(2, size=8)
        params = RMLSBMParams(np.array([[0.3, -1.0], [-1.0, 0.8]]), np.array([0.4, -0.4]))
        assert restricted_log_likelihood(g, z, params) == pytest.approx(log_likelihood_mlsbm(g, z, params.phi()), abs=1e-10)

    def test_restricted_decomposition(self, rng):
        done = 0
        while done < 20:
            g, _, z, _ = _converged_instance(rng, n=int(rng.integers(6, 12)), M=int(rng.integers(1, 4)))
            P = random_P(rng, g.n_nodes, g.n_layers)
            assert decomposition_residual_restricted(g, P, z, 2) < 1e-8
            done += 1
