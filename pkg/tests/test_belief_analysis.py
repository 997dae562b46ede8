import math

import numpy as np
import pytest
import scipy.linalg as la

from asymlq import belief_analysis as ba
from asymlq.best_response import maximizer_initial, minimizer_initial, run_best_response
from asymlq.errors import NotStable
from asymlq.game_model import paper_example, random_instance

from oracles import dense_pivoted_ldl, gramian_series, lyapunov_series, random_stable


@pytest.fixture(scope="module")
def benchmark_max_k1():
    return maximizer_initial(paper_example())


class TestGramians:
    def test_scalar(self):
        assert ba.controllability_gramian([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3)
        assert ba.observability_gramian([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3)

    def test_zero_input(self):
        np.testing.assert_array_equal(ba.controllability_gramian(np.diag([0.5, 0.2]), np.zeros((2, 1))),
                                      np.zeros((2, 2)))

    def test_benchmark_plant_against_series(self, benchmark_max_k1):
        p = benchmark_max_k1.plant
        Wc = ba.controllability_gramian(p.A_bar, p.B_bar)
        Wo = ba.observability_gramian(p.A_bar, p.C_bar)
        np.testing.assert_allclose(Wc, gramian_series(p.A_bar, p.B_bar), atol=1e-8)
        np.testing.assert_allclose(Wo, lyapunov_series(p.A_bar, p.C_bar.T @ p.C_bar), atol=1e-8)

    def test_duality(self, benchmark_max_k1):
        p = benchmark_max_k1.plant
        np.testing.assert_allclose(ba.observability_gramian(p.A_bar, p.C_bar),
                                   ba.controllability_gramian(p.A_bar.T, p.C_bar.T), atol=1e-12)

    def test_unstable(self):
        with pytest.raises(NotStable):
            ba.controllability_gramian([[1.1]], [[1.0]])


class TestHankel:
    def test_scalar(self):
        assert ba.hankel_singular_values([[4 / 3]], [[4 / 3]])[0] == pytest.approx(4 / 3)

    def test_identity_observability(self):
        rng = np.random.default_rng(0)
        G = rng.standard_normal((4, 4))
        Wc = G @ G.T
        expected = np.sqrt(np.sort(np.linalg.eigvalsh(Wc))[::-1])
        np.testing.assert_allclose(ba.hankel_singular_values(Wc, np.eye(4)), expected, rtol=1e-10)

    @pytest.mark.parametrize("seed", range(100))
    def test_similarity_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        A = random_stable(rng, n, radius=rng.uniform(0.2, 0.9))
        B = rng.standard_normal((n, int(rng.integers(1, 3))))
        C = rng.standard_normal((int(rng.integers(1, 3)), n))
        # orthogonal times a mild scaling keeps cond(T) <= 4
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        T = U @ np.diag(rng.uniform(0.5, 2.0, n))
        Ti = np.linalg.inv(T)
        h = ba.gramian_pair(A, B, C).hankel
        ht = ba.gramian_pair(T @ A @ Ti, T @ B, C @ Ti).hankel
        assert np.max(np.abs(h - ht)) <= 1e-8 * max(1.0, h[0])

    def test_descending_nonnegative(self, benchmark_max_k1):
        p = benchmark_max_k1.plant
        h = ba.gramian_pair(p.A_bar, p.B_bar, p.C_bar).hankel
        assert np.all(h >= 0) and np.all(np.diff(h) <= 0)


class TestCholeskyEstimates:
    def test_single(self):
        assert ba.cholesky_decay_estimates([0.5]).deltas[0] == pytest.approx(1.5)
        assert ba.cholesky_decay_estimates([0.0]).deltas[0] == pytest.approx(0.5)

    def test_pair(self):
        r = ba.cholesky_decay_estimates([0.25, 0.5])
        np.testing.assert_allclose(r.ordered_eigenvalues, [0.5, 0.25])
        assert r.deltas[0] == pytest.approx(1.5)
        assert r.deltas[1] == pytest.approx((5 / 6) * (4 / 49), rel=1e-12)
        assert r.deltas[1] == pytest.approx(0.068027, abs=1e-6)

    @pytest.mark.parametrize("seed", range(30))
    def test_against_dense_factorization_and_product_formula(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        lam = np.linalg.eigvals(random_stable(rng, n))
        r = ba.cholesky_decay_estimates(lam)
        C = ba.cauchy_matrix(lam)
        order, deltas, L = dense_pivoted_ldl(C)
        # conjugate pairs tie on the pivot, so compare the picks up to conjugation
        picked = lambda o: np.c_[lam[o].real, np.abs(lam[o].imag)]
        np.testing.assert_allclose(picked(r.order), picked(order), atol=1e-12)
        np.testing.assert_allclose(r.deltas, deltas, rtol=1e-8, atol=1e-14 * deltas[0])
        porder, pdeltas = ba.delta_product_formula(lam)
        np.testing.assert_allclose(picked(r.order), picked(porder), atol=1e-12)
        np.testing.assert_allclose(r.deltas, pdeltas, rtol=1e-10)

    @pytest.mark.parametrize("seed", range(30))
    def test_factor_properties(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(2, 12))
        lam = np.linalg.eigvals(random_stable(rng, n))
        r = ba.cholesky_decay_estimates(lam)
        C = ba.cauchy_matrix(lam)
        np.testing.assert_allclose(C, C.conj().T, atol=1e-14 * np.abs(C).max())
        assert np.all(np.diff(r.deltas) <= 0)
        L = r.cholesky_factor_L
        np.testing.assert_allclose(np.max(np.abs(L), axis=0), 1.0, atol=1e-12)
        recon = L @ np.diag(r.deltas) @ L.conj().T
        assert np.max(np.sum(np.abs(recon - C), axis=1)) <= 1e-8 * np.max(np.sum(np.abs(C), axis=1))

    def test_repeated_eigenvalue_flushes(self):
        r = ba.cholesky_decay_estimates([0.5, 0.5, 0.1])
        assert r.flushed
        assert r.deltas[-1] == 0.0

    def test_unstable_rejected(self):
        with pytest.raises(NotStable):
            ba.cholesky_decay_estimates([1.2])


class TestBilinear:
    def test_eigenvalue_map(self):
        np.testing.assert_allclose(ba.continuous_eigenvalues([0.0, 0.5]), [-1.0, -1 / 3])

    @pytest.mark.parametrize("seed", range(100))
    def test_gramian_preserved(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        A = random_stable(rng, n, radius=rng.uniform(0.1, 0.95))
        B = rng.standard_normal((n, int(rng.integers(1, 3))))
        Ac, Bc = ba.bilinear_transform(A, B)
        G = la.solve_continuous_lyapunov(Ac, -Bc @ Bc.T)
        Wc = ba.controllability_gramian(A, B)
        assert np.max(np.abs(G - Wc)) <= 1e-8 * max(1.0, np.max(np.abs(Wc)))
        np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(Ac)),
                                   np.sort_complex(ba.continuous_eigenvalues(np.linalg.eigvals(A))),
                                   atol=1e-8)


class TestLowRank:
    def test_scalar(self):
        b = ba.lowrank_gramian_approx([[0.5]], [[1.0]], 1)
        assert b.W_hat[0, 0].real == pytest.approx(4 / 3, abs=1e-10)
        assert b.actual_error <= 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_full_rank_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        A = random_stable(rng, n)
        B = rng.standard_normal((n, int(rng.integers(1, 3))))
        b = ba.lowrank_gramian_approx(A, B, n)
        if b.kappa > 1e6:
            pytest.skip("eigenvector basis too ill-conditioned for the full-rank check")
        Wc = ba.controllability_gramian(A, B)
        assert b.actual_error <= 1e-6 * np.max(np.sum(np.abs(Wc), axis=1))
        assert b.imag_ratio <= 1e-8

    def test_rank_and_bound(self):
        rng = np.random.default_rng(42)
        A = random_stable(rng, 6)
        B = rng.standard_normal((6, 2))
        for l in range(1, 6):
            b = ba.lowrank_gramian_approx(A, B, l)
            assert b.numerical_rank <= b.rank_limit == 2 * l
            assert b.satisfied

    def test_analyze_stage_scalar(self):
        st = minimizer_initial(random_instance(2))
        a = ba.analyze_stage(st)
        assert len(a.gramians.hankel) == len(a.decay.deltas) == len(a.decay.gramian_ratios) == 1
        assert a.decay.gramian_ratios[0] == 1.0 and a.decay.delta_ratios[0] == 1.0

    def test_decay_rows(self, benchmark_max_k1):
        rows = ba.decay_rows(ba.analyze_stage(benchmark_max_k1, l_grid=[]))
        assert [r["index"] for r in rows] == [1, 2, 3, 4]
        assert set(rows[0]) == {"index", "eigenvalue_c", "eigenvalue_o", "hankel", "delta",
                                "delta_ratio", "gramian_ratio"}


def test_benchmark_minimizer_k5_decay():
    trace = run_best_response(paper_example(), max_k=5, stop_on_convergence=False)
    stage = next(s for s in trace.stages if s.player == 1 and s.k == 5)
    a = ba.analyze_stage(stage, l_grid=[9])
    g = a.decay.gramian_ratios
    assert math.log10(g[0] / g[-1]) >= 10
    mask = g >= 1e-12
    assert np.all(np.abs(np.log10(a.decay.delta_ratios[mask]) - np.log10(g[mask])) <= 2)
    assert a.bounds[0].satisfied
