import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import oracles
from panelse.covariance import CovEstimate, v_white
from panelse.exceptions import InvalidLevel, NonPositiveVariance, NonPsdWarning, SingularVX
from panelse.inference import format_table, normal_critical_value, sandwich_variance, test_and_ci
from panelse.ols import FitResult, fit_ols
from panelse.panel_data import PanelData


def _fit(beta, vx=None, nt=100):
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    k = beta.size
    return FitResult(beta_hat=beta, residuals=np.zeros((1, 1)),
                     v_x=np.eye(k) if vx is None else np.asarray(vx, float), nt=nt)


def test_critical_values():
    assert normal_critical_value(0.05) == pytest.approx(1.959964, abs=1e-6)
    assert normal_critical_value(0.32) == pytest.approx(0.9945, abs=1e-4)
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(InvalidLevel):
            normal_critical_value(bad)


def test_textbook_interval():
    rep = test_and_ci(_fit(1.1), [[0.05 ** 2]], [1.0], 0.05)
    assert rep.t_stats[0] == pytest.approx(2.0, abs=1e-12)
    assert bool(rep.reject[0])
    assert rep.ci_lower[0] == pytest.approx(1.002, abs=5e-4)
    assert rep.ci_upper[0] == pytest.approx(1.198, abs=5e-4)
    assert rep.ci_upper[0] - rep.ci_lower[0] == pytest.approx(2 * rep.critical_value * 0.05, abs=1e-12)


def test_null_truth_never_rejects():
    rep = test_and_ci(_fit([0.7, -2.0]), np.diag([0.01, 4.0]), [0.7, -2.0])
    assert_allclose(rep.t_stats, 0)
    assert not rep.reject.any()
    assert_allclose((rep.ci_lower + rep.ci_upper) / 2, [0.7, -2.0])


def test_level_032_rejects_unit_t():
    rep = test_and_ci(_fit(1.0), [[1.0]], [0.0], 0.32)
    assert rep.t_stats[0] == 1.0 and bool(rep.reject[0])


def test_nonpositive_variance():
    with pytest.raises(NonPositiveVariance):
        test_and_ci(_fit([1.0, 2.0]), np.diag([1.0, -1e-3]))
    with pytest.raises(InvalidLevel):
        test_and_ci(_fit(1.0), [[1.0]], level=1.5)


def test_sandwich_cancellation(rng):
    a = rng.standard_normal((3, 3))
    vx = a @ a.T + 3 * np.eye(3)
    fit = _fit(np.zeros(3), vx, nt=60)
    assert_allclose(sandwich_variance(fit, vx), np.linalg.inv(vx) / 60, rtol=1e-12)


def test_sandwich_scalar():
    fit = _fit(0.0, [[2.0]], nt=100)
    assert sandwich_variance(fit, CovEstimate(np.array([[8.0]]), "White"))[0, 0] == pytest.approx(0.02)


def test_sandwich_cofactor_oracle(rng):
    a = rng.standard_normal((2, 2))
    vx = a @ a.T + np.eye(2)
    b = rng.standard_normal((2, 2))
    v = b @ b.T
    (p, q), (r, s) = vx
    det = p * s - q * r
    inv = [[s / det, -q / det], [-r / det, p / det]]
    ref = [[sum(inv[i][a_] * v[a_][b_] * inv[b_][j] for a_ in range(2) for b_ in range(2)) / 50
            for j in range(2)] for i in range(2)]
    assert_allclose(sandwich_variance(_fit(np.zeros(2), vx, nt=50), v), ref, rtol=0, atol=1e-12)


def test_sandwich_singular_vx():
    with pytest.raises(SingularVX):
        sandwich_variance(_fit([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]]), np.eye(2))


def test_sandwich_warns_on_nonpositive_diagonal():
    with pytest.warns(NonPsdWarning):
        sandwich_variance(_fit([0.0, 0.0]), np.diag([1.0, -1.0]))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 50) | st.floats(-50, -0.1), st.integers(0, 2**32 - 1))
def test_rejection_scale_invariant(c, seed):
    rng = np.random.default_rng(seed)
    x, u = oracles.random_panel(rng, 4, 6, 2)
    y = x @ np.array([0.3, -0.2]) + u
    null = np.array([0.25, -0.1])
    reps = []
    for scale in (1.0, c):
        fit = fit_ols(PanelData(y=scale * y, x=x))
        sw = sandwich_variance(fit, v_white(x, fit.residuals))
        reps.append(test_and_ci(fit, sw, scale * null, 0.1))
    assert_allclose(reps[1].t_stats, np.sign(c) * reps[0].t_stats, rtol=1e-8, atol=1e-10)
    if np.all(np.abs(np.abs(reps[0].t_stats) - reps[0].critical_value) > 1e-6):
        assert np.array_equal(reps[0].reject, reps[1].reject)


def test_report_serialization_and_table():
    rep = test_and_ci(_fit([1.1, 0.2]), np.diag([0.05 ** 2, 0.5 ** 2]), [1.0, 0.0],
                      estimator_tag="Hard", names=("x1", "x2"))
    d = json.loads(rep.to_json())
    assert d["estimator"] == "Hard" and d["reject"] == [True, False]
    assert_allclose(np.sqrt(np.diag(rep.sandwich)), rep.se, rtol=1e-15)
    text = format_table([rep], failures={"Soft": "not positive"})
    lines = text.splitlines()
    assert lines[0].split() == ["beta", "se_Hard", "se_Soft"]
    assert lines[1].split() == ["x1", "1.100", "0.050*", "n/a"]
    assert lines[2].split() == ["x2", "0.200", "0.500", "n/a"]
