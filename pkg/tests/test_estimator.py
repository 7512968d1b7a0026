import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from panelse.covariance import v_dk
from panelse.estimator import PanelOLS, WithinTransformer, estimate_covariance
from panelse.exceptions import InvalidConfig, ShapeMismatch
from panelse.mc import DgpSpec, simulate_panel
from panelse.panel_data import demean_array


@pytest.fixture
def panel():
    return simulate_panel(DgpSpec(n=20, t=40, rho=0.3, gamma=1.0), 4)


def test_params_round_trip():
    est = PanelOLS(cov_type="dk", bandwidth=3)
    assert est.get_params()["cov_type"] == "dk"
    c = clone(est.set_params(threshold=0.2))
    assert c.get_params()["threshold"] == 0.2 and c is not est


def test_within_transformer(panel):
    tr = WithinTransformer().fit(panel.x)
    assert_allclose(tr.transform(panel.x), demean_array(np.asarray(panel.x)))
    with pytest.raises(ShapeMismatch):
        tr.transform(np.zeros((3, 3, 1)))


def test_fit_attributes(panel):
    est = PanelOLS(cov_type="hard", bandwidth=3, threshold=0.1).fit(panel.x, panel.y)
    assert est.coef_.shape == (1,)
    assert est.vcov_.shape == (1, 1)
    assert est.bse_[0] == pytest.approx(np.sqrt(est.vcov_[0, 0]))
    assert est.covariance_.estimator == "Hard" and est.cv_result_ is None
    rep = est.inference(null_values=[1.0])
    assert rep.estimator_tag == "Hard"
    assert est.predict(panel.x).shape == (20, 40)


def test_fit_accepts_panel_data_and_runs_cv(panel):
    est = PanelOLS().fit(panel)
    assert est.cv_result_ is not None
    assert est.covariance_.threshold_m == est.cv_result_.m_star


def test_pipeline_matches_manual(panel):
    x, y = demean_array(np.asarray(panel.x)), demean_array(np.asarray(panel.y))
    pipe = make_pipeline(WithinTransformer(), PanelOLS(cov_type="dk", fixed_effects=False, bandwidth=3))
    pipe.fit(panel.x, y)
    ref = PanelOLS(cov_type="dk", bandwidth=3).fit(panel.x, panel.y)
    assert_allclose(pipe[-1].coef_, ref.coef_, rtol=1e-12)
    u = y - x @ ref.coef_
    assert_allclose(ref.covariance_.v_hat, v_dk(x, u, 3).v_hat, rtol=1e-12)


def test_bad_inputs(panel):
    with pytest.raises(ShapeMismatch):
        PanelOLS().fit(panel.x, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PanelOLS().fit(np.full((2, 5, 1), np.nan), np.zeros((2, 5)))
    with pytest.raises(InvalidConfig):
        estimate_covariance(np.asarray(panel.x), np.zeros((20, 40)), "banded")
