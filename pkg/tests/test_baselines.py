import numpy as np
import pytest

from proxilearn.baselines import (
    adjusted_ate,
    fit_ridge_baseline,
    kernel_ridge_fit,
    kernel_ridge_predict,
    linear_two_stage,
    ridge_loo_scores,
    select_ridge_lambda,
)
from proxilearn.data import Dataset
from proxilearn.kernels import KernelSpec, gram
from tests.conftest import rng_dataset


class TestKernelRidge:
    def test_zero_targets_zero_predictor(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 1))
        model = kernel_ridge_fit(x, np.zeros(6), KernelSpec([1.0]), 0.1)
        np.testing.assert_allclose(kernel_ridge_predict(model, x),
                                   np.zeros(6), atol=1e-12)

    def test_single_point(self):
        model = kernel_ridge_fit(np.array([[0.0]]), np.array([2.0]),
                                 KernelSpec([1.0]), 0.5)
        pred = kernel_ridge_predict(model, np.array([[0.0]]))
        assert pred[0] == pytest.approx(2.0 / 1.5, rel=1e-10)

    def test_matches_lu_normal_equations(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(6, 2))
        y = rng.normal(size=6)
        spec = KernelSpec([0.8, 1.2])
        lam = 0.07
        model = kernel_ridge_fit(x, y, spec, lam)
        k = gram(x, x, spec)
        expected = np.linalg.solve(k + 6 * lam * np.eye(6), y)
        np.testing.assert_allclose(model.beta, expected, atol=1e-8)

    def test_interpolates_at_tiny_ridge(self):
        x = np.linspace(0, 18, 10)[:, None]
        rng = np.random.default_rng(2)
        y = rng.normal(size=10)
        model = kernel_ridge_fit(x, y, KernelSpec([1.0]), 1e-10)
        fit_error = np.abs(kernel_ridge_predict(model, x) - y).max()
        assert fit_error < 1e-4

    def test_loo_selection_is_argmin(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20, 1))
        y = np.sin(x[:, 0]) + 0.1 * rng.normal(size=20)
        spec = KernelSpec([1.0])
        grid = np.logspace(-6, 1, 8)
        lam = select_ridge_lambda(x, y, spec, grid)
        scores = ridge_loo_scores(x, y, spec, grid)
        assert scores[np.argmin(np.abs(grid - lam))] <= scores.min() + 1e-15


class TestAdjustedAte:
    def test_zero_predictor_gives_zero_curve(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(8, 3))
        model = kernel_ridge_fit(x, np.zeros(8), KernelSpec([1.0] * 3), 0.1)
        curve = adjusted_ate(model, [0.0, 0.5], rng.normal(size=(5, 2)))
        np.testing.assert_array_equal(curve.estimate, 0.0)

    def test_single_row_equals_pointwise_prediction(self):
        rng = np.random.default_rng(5)
        inputs = rng.normal(size=(10, 3))
        y = rng.normal(size=10)
        model = kernel_ridge_fit(inputs, y, KernelSpec([1.0] * 3), 0.05)
        row = np.array([0.4, -0.2])
        curve = adjusted_ate(model, [0.7], row[None, :])
        direct = kernel_ridge_predict(
            model, np.array([[0.7, 0.4, -0.2]]))
        assert curve.estimate[0] == pytest.approx(direct[0], rel=1e-12)

    def test_plain_ridge_uses_empty_adjustment(self):
        data = rng_dataset(6, 30)
        model, adjustment = fit_ridge_baseline(data, "", lam=0.1)
        assert adjustment.shape == (1, 0)
        curve = adjusted_ate(model, [0.0, 1.0], adjustment)
        direct = kernel_ridge_predict(model, np.array([[0.0], [1.0]]))
        np.testing.assert_allclose(curve.estimate, direct, atol=1e-12)

    def test_empty_adjustment_rejected(self):
        data = rng_dataset(7, 10)
        model, _ = fit_ridge_baseline(data, "w", lam=0.1)
        with pytest.raises(ValueError, match="empty"):
            adjusted_ate(model, [0.0], np.empty((0, 2)))

    def test_adjustment_blocks_match_model(self):
        data = rng_dataset(8, 15)
        model_w, adj_w = fit_ridge_baseline(data, "w", lam=0.1)
        assert model_w.inputs.shape[1] == 3 and adj_w.shape[1] == 2
        model_wz, adj_wz = fit_ridge_baseline(data, "wz", lam=0.1)
        assert model_wz.inputs.shape[1] == 5 and adj_wz.shape[1] == 4


class TestLinearTwoStage:
    def test_recovers_exact_linear_model(self):
        # noiseless scalar linear SEM solved analytically:
        # w = 1 + 2a - z, y = 3 + 0.5a + 2w
        rng = np.random.default_rng(9)
        n = 50
        a = rng.normal(size=n)
        z = rng.normal(size=n)
        w = 1.0 + 2.0 * a - z
        y = 3.0 + 0.5 * a + 2.0 * w
        data = Dataset(a=a, x=np.empty((n, 0)), z=z, w=w, y=y)
        grid = np.array([-1.0, 0.0, 1.0])
        curve = linear_two_stage(data, grid)
        expected = 3.0 + 0.5 * grid + 2.0 * np.mean(w)
        np.testing.assert_allclose(curve.estimate, expected, atol=1e-8)

    def test_zero_effect_gives_flat_curve(self):
        rng = np.random.default_rng(10)
        n = 60
        a = rng.normal(size=n)
        z = rng.normal(size=n)
        w = 0.5 * z + rng.normal(size=n)
        y = np.full(n, 2.5)
        data = Dataset(a=a, x=np.empty((n, 0)), z=z, w=w, y=y)
        curve = linear_two_stage(data, np.linspace(-2, 2, 5))
        np.testing.assert_allclose(curve.estimate, 2.5, atol=1e-8)

    def test_curve_is_affine_in_treatment(self):
        data = rng_dataset(11, 40)
        grid = np.linspace(-1, 2, 7)
        curve = linear_two_stage(data, grid)
        slopes = np.diff(curve.estimate) / np.diff(grid)
        np.testing.assert_allclose(slopes, slopes[0], atol=1e-10)

    def test_rank_deficiency_rejected(self):
        n = 30
        rng = np.random.default_rng(12)
        a = rng.normal(size=n)
        data = Dataset(a=a, x=np.empty((n, 0)),
                       z=np.column_stack([a, a]),  # collinear with a
                       w=rng.normal(size=(n, 1)), y=rng.normal(size=n))
        with pytest.raises(np.linalg.LinAlgError, match="rank deficient"):
            linear_two_stage(data, [0.0])

    def test_needs_enough_rows(self):
        data = rng_dataset(13, 3)
        with pytest.raises(ValueError, match="more rows"):
            linear_two_stage(data, [0.0])
