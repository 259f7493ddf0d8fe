import numpy as np
import pytest

from proxilearn.kernels import KernelSpec, gram
from proxilearn.numerics import (
    khatri_rao_cols,
    nystrom,
    solve_psd,
    woodbury_regularized_inverse_apply,
)


class TestSolvePsd:
    def test_identity_system(self):
        e1 = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(solve_psd(np.eye(3), 1.0, e1), 0.5 * e1)

    def test_zero_matrix(self):
        v = np.array([2.0, -4.0])
        np.testing.assert_allclose(solve_psd(np.zeros((2, 2)), 0.5, v),
                                   v / 0.5)

    def test_matches_lu_oracle(self):
        rng = np.random.default_rng(0)
        b = rng.normal(size=(6, 6))
        m = b @ b.T
        rhs = rng.normal(size=(6, 2))
        expected = np.linalg.solve(m + 0.3 * np.eye(6), rhs)
        np.testing.assert_allclose(solve_psd(m, 0.3, rhs), expected,
                                   atol=1e-8)

    def test_residual_bound(self):
        rng = np.random.default_rng(1)
        b = rng.normal(size=(8, 8))
        m = b @ b.T
        rhs = rng.normal(size=8)
        r = solve_psd(m, 0.1, rhs)
        resid = (m + 0.1 * np.eye(8)) @ r - rhs
        assert np.abs(resid).max() <= 1e-6 * (1 + np.abs(rhs).max())

    def test_requires_positive_ridge(self):
        with pytest.raises(ValueError, match="ridge"):
            solve_psd(np.eye(2), 0.0, np.ones(2))

    def test_indefinite_input_fails(self):
        m = np.diag([1.0, -5.0])
        with pytest.raises(np.linalg.LinAlgError):
            solve_psd(m, 1e-3, np.ones(2))


class TestKhatriRao:
    def test_hand_expansion(self):
        a = np.array([[1.0], [2.0]])
        b = np.array([[3.0], [4.0]])
        np.testing.assert_array_equal(
            khatri_rao_cols(a, b), np.array([[3.0], [4.0], [6.0], [8.0]]))

    def test_ones_row_is_identity_like(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 5))
        np.testing.assert_array_equal(khatri_rao_cols(a, np.ones((1, 5))), a)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(2, 4))
        result = khatri_rao_cols(a, b)
        expected = np.empty((6, 4))
        for col in range(4):
            for i in range(3):
                for k in range(2):
                    expected[i * 2 + k, col] = a[i, col] * b[k, col]
        np.testing.assert_allclose(result, expected, atol=1e-15)

    def test_column_mismatch(self):
        with pytest.raises(ValueError, match="column count"):
            khatri_rao_cols(np.ones((2, 3)), np.ones((2, 4)))

    def test_gramian_identity(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            a = rng.normal(size=(4, 6))
            b = rng.normal(size=(3, 6))
            kr = khatri_rao_cols(a, b)
            np.testing.assert_allclose(kr.T @ kr, (a.T @ a) * (b.T @ b),
                                       atol=1e-10)


def _rbf_gram(points, sigma=1.0):
    return gram(points, points, KernelSpec([sigma]))


class TestNystrom:
    def test_full_rank_is_exact(self):
        rng = np.random.default_rng(5)
        k = _rbf_gram(rng.normal(size=(30, 1)))
        factors = nystrom(k, rank=30, landmark_seed=0)
        recon = 30.0**2 * factors.reconstruct()
        assert np.linalg.norm(k - recon) <= 1e-6
        scaled = k / 30.0**2
        rel = (np.linalg.norm(scaled - factors.reconstruct())
               / np.linalg.norm(scaled))
        assert rel <= 1e-8

    def test_rank_one_matrix(self):
        v = np.array([1.0, 2.0, -1.5, 0.7])
        k = np.outer(v, v)
        factors = nystrom(k, rank=1, landmark_seed=0)
        recon = 16.0 * factors.reconstruct()
        np.testing.assert_allclose(recon, k, atol=1e-10)

    def test_200_point_gram_at_rank_50(self):
        rng = np.random.default_rng(6)
        k = _rbf_gram(rng.normal(size=(200, 1)))
        factors = nystrom(k, rank=50, landmark_seed=1)
        scaled = k / 200.0**2
        rel = (np.linalg.norm(scaled - factors.reconstruct())
               / np.linalg.norm(scaled))
        assert rel < 1e-2

    def test_error_nonincreasing_in_rank(self):
        rng = np.random.default_rng(7)
        k = _rbf_gram(rng.normal(size=(200, 1)))
        scaled = k / 200.0**2
        norm = np.linalg.norm(scaled)
        means = []
        for rank in (10, 25, 50, 100):
            errs = [
                np.linalg.norm(scaled - nystrom(k, rank, seed).reconstruct())
                / norm
                for seed in range(5)
            ]
            means.append(np.mean(errs))
        assert all(means[i + 1] <= means[i] + 1e-12 for i in range(3))

    def test_rank_bounds(self):
        k = np.eye(4)
        with pytest.raises(ValueError, match="rank"):
            nystrom(k, 0)
        with pytest.raises(ValueError, match="rank"):
            nystrom(k, 5)

    def test_all_eigenvalues_below_floor(self):
        with pytest.raises(np.linalg.LinAlgError, match="floor"):
            nystrom(np.zeros((3, 3)), rank=2, landmark_seed=0)


class TestWoodburyApply:
    def test_zero_l_reduces_to_reconstruction(self):
        rng = np.random.default_rng(8)
        k = _rbf_gram(rng.normal(size=(12, 1)))
        factors = nystrom(k, rank=12, landmark_seed=0)
        rhs = rng.normal(size=12)
        out = woodbury_regularized_inverse_apply(
            np.zeros((12, 12)), factors, 1.0, rhs)
        np.testing.assert_allclose(out, factors.reconstruct() @ rhs,
                                   atol=1e-12)

    def test_zero_rhs(self):
        rng = np.random.default_rng(9)
        k = _rbf_gram(rng.normal(size=(10, 1)))
        factors = nystrom(k, rank=10, landmark_seed=0)
        out = woodbury_regularized_inverse_apply(
            np.eye(10), factors, 0.5, np.zeros(10))
        np.testing.assert_allclose(out, np.zeros(10), atol=1e-15)

    def test_exact_factors_match_closed_form(self):
        # With exact factors this applies (K'L + lam I)^{-1} K' where
        # K' = K/n^2; oracle is a dense LU solve of the same system.
        rng = np.random.default_rng(10)
        n = 10
        k = _rbf_gram(rng.normal(size=(n, 1)))
        l = _rbf_gram(rng.normal(size=(n, 1)), sigma=0.7)
        y = rng.normal(size=n)
        lam = 1e-2
        factors = nystrom(k, rank=n, landmark_seed=2)
        out = woodbury_regularized_inverse_apply(l, factors, lam, y)
        scaled = k / n**2
        expected = np.linalg.solve(scaled @ l + lam * np.eye(n), scaled @ y)
        np.testing.assert_allclose(out, expected, rtol=1e-6, atol=1e-10)

    def test_matches_exact_pmmr_coefficients(self):
        # ten-point problem: Algorithm output equals the closed-form fit
        from proxilearn.kernels import KernelSpecs
        from proxilearn.pmmr import pmmr_fit, instrument_gram, jittered_l, h_side_gram
        from tests.conftest import rng_dataset

        data = rng_dataset(11, 10)
        specs = KernelSpecs.from_data(data)
        lam = 0.05
        exact = pmmr_fit(data, specs, lam)
        w_gram = instrument_gram(data, data, specs)
        l_jit = jittered_l(h_side_gram(data, data, specs))
        factors = nystrom(w_gram, rank=10, landmark_seed=0)
        out = woodbury_regularized_inverse_apply(
            l_jit, factors, lam / 100.0, data.y)
        rel = np.linalg.norm(out - exact.alpha) / np.linalg.norm(exact.alpha)
        assert rel <= 1e-6

    def test_requires_positive_lam(self):
        rng = np.random.default_rng(12)
        k = _rbf_gram(rng.normal(size=(5, 1)))
        factors = nystrom(k, rank=5, landmark_seed=0)
        with pytest.raises(ValueError, match="lam"):
            woodbury_regularized_inverse_apply(np.eye(5), factors, 0.0,
                                               np.ones(5))
