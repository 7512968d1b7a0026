"""Pooled OLS on a balanced panel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import ShapeMismatch, SingularDesign
from .panel_data import PanelData

__all__ = ["FitResult", "fit_ols", "residual_matrix", "MAX_CONDITION"]

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FitResult:
    """Coefficients, residuals and the regressor second moment of a pooled fit.

    ``residuals[i, t]`` is the residual of unit i at period t, so column t
    is the cross-section vector and row i the unit's time series.
    """

    beta_hat: np.ndarray
    residuals: np.ndarray
    v_x: np.ndarray
    nt: int

    @property
    def n_units(self):
        return self.residuals.shape[0]

    @property
    def n_periods(self):
        return self.residuals.shape[1]


def _solve_normal_equations(xtx: np.ndarray, xty: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(xtx)
    top = evals[-1]
    cond = np.inf if evals[0] <= 0 else top / evals[0]
    if not np.isfinite(cond) or cond > MAX_CONDITION or top <= 0:
        direction = evecs[:, 0]
        raise SingularDesign(
            f"regressor cross-product matrix is singular (condition number {cond:.3g}); "
            f"near-null direction {np.array2string(direction, precision=4)}",
            direction=direction,
            condition=cond,
        )
    return linalg.cho_solve(linalg.cho_factor(xtx), xty)


def fit_ols(data: PanelData) -> FitResult:
    """Pooled least squares of ``y_it`` on ``x_it`` without intercept.

    Call :func:`~panelse.panel_data.within_transform` first to absorb
    unit and time effects.

    Raises
    ------
    SingularDesign
        If the k x k cross-product matrix has condition number above 1e12.
    """
    return _fit_arrays(data.x, data.y)


def _fit_arrays(x: np.ndarray, y: np.ndarray) -> FitResult:
    n, t, k = x.shape
    xf = x.reshape(n * t, k)
    xtx = xf.T @ xf
    xtx = (xtx + xtx.T) / 2
    beta = _solve_normal_equations(xtx, xf.T @ y.reshape(n * t))
    resid = y - x @ beta
    return FitResult(beta_hat=beta, residuals=resid, v_x=xtx / (n * t), nt=n * t)


def residual_matrix(fit: FitResult, layout: tuple[int, int]) -> np.ndarray:
    """Return the residuals as an (N, T) matrix, checking the layout."""
    n, t = layout
    if fit.residuals.shape != (n, t):
        raise ShapeMismatch(
            f"fit residuals have shape {fit.residuals.shape}, expected {(n, t)}"
        )
    return fit.residuals.copy()
