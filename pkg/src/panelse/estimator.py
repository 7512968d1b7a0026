"""scikit-learn compatible wrappers.

``WithinTransformer`` removes two-way fixed effects from (N, T[, k])
arrays; ``PanelOLS`` fits pooled OLS and attaches a robust covariance
estimate, so both slot into pipelines and ``clone``/``get_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_bandwidth, check_panel_arrays, check_panel_x
from .covariance import (
    ThresholdConfig,
    normalize_estimator,
    v_cluster_ct,
    v_cluster_cx,
    v_dk,
    v_hac,
    v_threshold,
    v_white,
)
from .exceptions import ShapeMismatch
from .inference import sandwich_variance, test_and_ci
from .kernels import KernelSpec, omega_nt
from .ols import _fit_arrays
from .panel_data import demean_array
from .tuning import CvConfig, cross_validate_m

__all__ = ["WithinTransformer", "PanelOLS", "estimate_covariance"]


class WithinTransformer(TransformerMixin, BaseEstimator):
    """Two-way within (unit and time demeaning) transform.

    The transform is a function of the panel it is applied to; ``fit``
    only records the (N, T) layout so later calls can be checked.
    """

    def fit(self, X, y=None):
        x = check_panel_x(X)
        self.n_units_, self.n_periods_ = x.shape[:2]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_units_")
        z = np.asarray(X, dtype=np.float64)
        if z.shape[:2] != (self.n_units_, self.n_periods_):
            raise ShapeMismatch(
                f"expected an ({self.n_units_}, {self.n_periods_}, ...) panel, got {z.shape}"
            )
        return demean_array(z)


def estimate_covariance(x, u, estimator, bandwidth=None, threshold=None,
                        psd_floor=False, cv=None):
    """Dispatch to one of the covariance estimators by name.

    ``threshold='cv'`` selects M by :func:`~panelse.tuning.cross_validate_m`;
    the returned tuple is ``(CovEstimate, CvResult or None)``.
    """
    est = normalize_estimator(estimator)
    n, t = u.shape
    if est == "White":
        return v_white(x, u), None
    if est == "CX":
        return v_cluster_cx(x, u), None
    if est == "CT":
        return v_cluster_ct(x, u), None
    bw = check_bandwidth(bandwidth, t)
    kernel = KernelSpec(bw)
    if est == "HAC":
        return v_hac(x, u, kernel), None
    if est == "DK":
        return v_dk(x, u, kernel), None
    cv_result = None
    if threshold is None or threshold == "cv":
        cv_cfg = cv or CvConfig(bandwidth=bw, mode=est)
        cv_result = cross_validate_m(x, u, cv_cfg)
        m = cv_result.m_star
    else:
        m = float(threshold)
    cfg = ThresholdConfig(m, est, omega_nt(bw, n, t), psd_floor=psd_floor)
    return v_threshold(x, u, kernel, cfg), cv_result


class PanelOLS(BaseEstimator):
    """Pooled OLS with two-way fixed effects and robust standard errors.

    Parameters
    ----------
    cov_type : {'hard', 'soft', 'dk', 'hac', 'ct', 'cx', 'white'}
        Covariance estimator for the score.
    bandwidth : int or 'auto'
        Bartlett bandwidth L; ``'auto'`` uses ``floor(4 (T/100)^(2/9))``.
    threshold : float or 'cv'
        Threshold constant M for ``hard``/``soft``.
    fixed_effects : bool
        Demean by unit and period before fitting.
    psd_floor : bool
        Clip negative eigenvalues of thresholded estimates to zero.
    level : float
        Significance level used by :meth:`inference`.

    Attributes
    ----------
    coef_ : ndarray of shape (k,)
    residuals_ : ndarray of shape (N, T)
    covariance_ : CovEstimate
    vcov_ : ndarray of shape (k, k)
        Sandwich variance of ``coef_``.
    bse_ : ndarray of shape (k,)
    cv_result_ : CvResult or None
    """

    def __init__(self, cov_type="hard", bandwidth="auto", threshold="cv",
                 fixed_effects=True, psd_floor=False, level=0.05):
        self.cov_type = cov_type
        self.bandwidth = bandwidth
        self.threshold = threshold
        self.fixed_effects = fixed_effects
        self.psd_floor = psd_floor
        self.level = level

    def fit(self, X, y=None):
        x, y = check_panel_arrays(X, y)
        if self.fixed_effects:
            x, y = demean_array(x), demean_array(y)
        fit = _fit_arrays(x, y)
        cov, cv_result = estimate_covariance(
            x, fit.residuals, self.cov_type, self.bandwidth, self.threshold, self.psd_floor
        )
        self.fit_result_ = fit
        self.coef_ = fit.beta_hat
        self.residuals_ = fit.residuals
        self.covariance_ = cov
        self.cv_result_ = cv_result
        self.vcov_ = sandwich_variance(fit, cov)
        diag = np.diag(self.vcov_)
        self.bse_ = np.sqrt(np.where(diag > 0, diag, np.nan))
        self.n_features_in_ = x.shape[2]
        return self

    def predict(self, X):
        """Linear index ``x_it' coef_`` as an (N, T) array."""
        check_is_fitted(self, "coef_")
        x = check_panel_x(X)
        if x.shape[2] != self.n_features_in_:
            raise ShapeMismatch(f"expected {self.n_features_in_} regressors, got {x.shape[2]}")
        return x @ self.coef_

    def inference(self, null_values=None, level=None):
        check_is_fitted(self, "coef_")
        return test_and_ci(
            self.fit_result_,
            self.vcov_,
            null_values,
            self.level if level is None else level,
            estimator_tag=self.covariance_.estimator,
        )
