import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
from panelse.exceptions import ShapeMismatch, SingularDesign
from panelse.ols import FitResult, fit_ols, residual_matrix
from panelse.panel_data import PanelData


def test_exact_fit():
    fit = fit_ols(PanelData(y=[[2.0, 4.0]], x=[[[1.0], [2.0]]]))
    assert_allclose(fit.beta_hat, [2.0])
    assert_allclose(fit.residuals, 0, atol=1e-15)
    assert_allclose(residual_matrix(fit, (1, 2)), 0, atol=1e-15)
    assert fit.nt == 2


def test_noiseless_recovery(rng):
    x = rng.standard_normal((5, 6, 2))
    fit = fit_ols(PanelData(y=x @ np.array([1.0, -2.0]), x=x))
    assert_allclose(fit.beta_hat, [1.0, -2.0], atol=1e-10)


def test_matches_scalar_normal_equations(rng):
    x, y = oracles.random_panel(rng, 4, 8, 2)
    fit = fit_ols(PanelData(y=y, x=x))
    assert_allclose(fit.beta_hat, oracles.ols(x.tolist(), y.tolist()), rtol=1e-12)


def test_fit_invariants(rng):
    x, y = oracles.random_panel(rng, 6, 7, 3)
    fit = fit_ols(PanelData(y=y, x=x))
    assert_allclose(fit.v_x, fit.v_x.T, atol=1e-12)
    assert np.linalg.eigvalsh(fit.v_x).min() >= 0
    assert_allclose(fit.v_x, np.einsum("itk,itl->kl", x, x) / 42)
    assert np.array_equal(fit.residuals, y - x @ fit.beta_hat)
    score = np.einsum("itk,it->k", x, fit.residuals) / 42
    assert np.abs(score).max() <= 1e-8 * np.linalg.norm(fit.beta_hat)


def test_residual_slices(rng):
    x, y = oracles.random_panel(rng, 3, 5, 1)
    fit = fit_ols(PanelData(y=y, x=x))
    r = residual_matrix(fit, (3, 5))
    b = fit.beta_hat[0]
    for i in range(3):
        for t in range(5):
            assert r[i, t] == pytest.approx(y[i, t] - x[i, t, 0] * b, abs=1e-14)
    assert r[:, 2].shape == (3,) and r[1].shape == (5,)


def test_zero_coefficient_residuals_equal_y(rng):
    x, y = oracles.random_panel(rng, 2, 3, 1)
    fit = FitResult(beta_hat=np.zeros(1), residuals=y.copy(), v_x=np.eye(1), nt=6)
    assert_allclose(residual_matrix(fit, (2, 3)), y)


def test_residual_layout_mismatch(rng):
    x, y = oracles.random_panel(rng, 2, 3, 1)
    with pytest.raises(ShapeMismatch):
        residual_matrix(fit_ols(PanelData(y=y, x=x)), (3, 2))


def test_scale_equivariance(rng):
    x, y = oracles.random_panel(rng, 4, 5, 2)
    a = fit_ols(PanelData(y=y, x=x))
    b = fit_ols(PanelData(y=3.5 * y, x=x))
    assert_allclose(b.beta_hat, 3.5 * a.beta_hat, rtol=1e-12)
    assert_allclose(b.residuals, 3.5 * a.residuals, rtol=1e-10, atol=1e-13)


def test_regressor_permutation(rng):
    x, y = oracles.random_panel(rng, 4, 5, 3)
    a = fit_ols(PanelData(y=y, x=x))
    perm = [2, 0, 1]
    b = fit_ols(PanelData(y=y, x=x[:, :, perm]))
    assert_allclose(b.beta_hat, a.beta_hat[perm], rtol=1e-12)
    assert_allclose(b.residuals, a.residuals, atol=1e-12)


def test_singular_design_reports_direction(rng):
    x1 = rng.standard_normal((3, 4))
    x = np.stack([x1, 2 * x1], axis=2)
    with pytest.raises(SingularDesign) as err:
        fit_ols(PanelData(y=rng.standard_normal((3, 4)), x=x))
    d = np.asarray(err.value.direction)
    d = d / d[np.argmax(np.abs(d))]
    assert_allclose(d, [1.0, -0.5], atol=1e-6)
