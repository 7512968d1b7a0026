"""Sandwich variance, t-tests and normal confidence intervals."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .covariance import CovEstimate
from .exceptions import InvalidLevel, NonPositiveVariance, NonPsdWarning, ShapeMismatch, SingularVX
from .ols import MAX_CONDITION, FitResult

__all__ = [
    "InferenceReport",
    "normal_critical_value",
    "sandwich_variance",
    "test_and_ci",
    "format_table",
]


def normal_critical_value(level: float) -> float:
    """Two-sided standard normal critical value ``z_{1 - level/2}``."""
    if not 0 < level < 1:
        raise InvalidLevel(f"significance level must lie in (0, 1), got {level}")
    return float(ndtri(1.0 - level / 2.0))


@dataclass(frozen=True)
class InferenceReport:
    beta_hat: np.ndarray
    se: np.ndarray
    t_stats: np.ndarray
    reject: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    null_values: np.ndarray
    level: float
    critical_value: float
    estimator_tag: str
    sandwich: np.ndarray
    names: tuple = ()

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator_tag,
            "level": self.level,
            "critical_value": self.critical_value,
            "names": list(self.names),
            "beta_hat": self.beta_hat.tolist(),
            "se": self.se.tolist(),
            "t_stats": self.t_stats.tolist(),
            "reject": [bool(r) for r in self.reject],
            "null_values": self.null_values.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
            "sandwich": self.sandwich.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def sandwich_variance(fit: FitResult, cov: CovEstimate | np.ndarray) -> np.ndarray:
    """Variance of the OLS coefficients, ``V_X^{-1} V V_X^{-1} / NT``.

    A nonpositive diagonal entry (possible for thresholded estimates)
    triggers a :class:`~panelse.exceptions.NonPsdWarning`.
    """
    v = cov.v_hat if isinstance(cov, CovEstimate) else np.asarray(cov, dtype=np.float64)
    vx = fit.v_x
    if v.shape != vx.shape:
        raise ShapeMismatch(f"covariance {v.shape} does not match V_X {vx.shape}")
    if np.linalg.cond(vx) > MAX_CONDITION:
        raise SingularVX("regressor second-moment matrix V_X is singular")
    a = np.linalg.solve(vx, v)
    out = np.linalg.solve(vx, a.T).T / fit.nt
    out = (out + out.T) / 2
    if np.any(np.diag(out) <= 0):
        warnings.warn(
            "sandwich variance has a nonpositive diagonal entry", NonPsdWarning, stacklevel=2
        )
    return out


def test_and_ci(fit: FitResult, sandwich, null_values=None, level: float = 0.05,
                estimator_tag: str = "", names=()) -> InferenceReport:
    """Two-sided z-tests of ``beta_j = null_j`` and ``1 - level`` intervals.

    ``level`` is the significance level; critical values come from the
    standard normal distribution.
    """
    z = normal_critical_value(level)
    sandwich = np.asarray(sandwich, dtype=np.float64)
    beta = np.asarray(fit.beta_hat)
    k = beta.shape[0]
    null = np.zeros(k) if null_values is None else np.broadcast_to(
        np.asarray(null_values, dtype=np.float64), (k,)).copy()
    var = np.diag(sandwich)
    if np.any(var <= 0) or not np.all(np.isfinite(var)):
        bad = [int(j) for j in np.flatnonzero(~(var > 0))]
        raise NonPositiveVariance(
            f"{estimator_tag or 'sandwich'} variance is not positive for coefficient(s) {bad}"
        )
    se = np.sqrt(var)
    tstat = (beta - null) / se
    return InferenceReport(
        beta_hat=beta.copy(),
        se=se,
        t_stats=tstat,
        reject=np.abs(tstat) > z,
        ci_lower=beta - z * se,
        ci_upper=beta + z * se,
        null_values=null,
        level=float(level),
        critical_value=z,
        estimator_tag=estimator_tag,
        sandwich=sandwich,
        names=tuple(names) or tuple(f"x{j + 1}" for j in range(k)),
    )


def format_table(reports, names=None, failures=None, beta=None) -> str:
    """Coefficient column plus one SE column per estimator.

    Standard errors whose test rejects at the report's level carry ``*``.
    ``failures`` maps estimator tags to the reason no SE is available.
    """
    reports = list(reports)
    failures = dict(failures or {})
    if not reports and not failures:
        return ""
    first = reports[0] if reports else None
    if names is None:
        names = first.names if first else ()
    if beta is None and first is not None:
        beta = first.beta_hat
    tags = [r.estimator_tag for r in reports] + list(failures)
    header = ["", "beta"] + [f"se_{tag}" for tag in tags]
    rows = []
    for j, name in enumerate(names):
        row = [str(name), f"{beta[j]:.3f}" if beta is not None else "n/a"]
        for r in reports:
            row.append(f"{r.se[j]:.3f}" + ("*" if r.reject[j] else " "))
        row.extend("n/a " for _ in failures)
        rows.append(row)
    widths = [max(len(c) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in [header, *rows]]
    if reports:
        lines.append(f"* rejects beta = null at level {first.level:g} (normal critical value)")
    for tag, why in failures.items():
        lines.append(f"se_{tag}: {why}")
    return "\n".join(lines)


# not a test function, despite the name
test_and_ci.__test__ = False
