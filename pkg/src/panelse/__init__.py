"""Panel OLS standard errors robust to serial and cross-sectional correlation.

The covariance of the score is estimated by thresholding pairwise
Driscoll-Kraay style block moments, with the threshold constant chosen by
block cross-validation.  White, one-way cluster, per-unit HAC and
Driscoll-Kraay estimators are provided for comparison.
"""

from .covariance import (
    CovEstimate,
    ThresholdConfig,
    block_moment,
    block_moments,
    dump_sparsity,
    threshold_from_blocks,
    v_cluster_ct,
    v_cluster_cx,
    v_dk,
    v_hac,
    v_threshold,
    v_white,
)
from .estimator import PanelOLS, WithinTransformer, estimate_covariance
from .exceptions import NonPsdWarning, PanelSEError
from .inference import format_table, normal_critical_value, sandwich_variance, test_and_ci
from .kernels import KernelSpec, auto_bandwidth, bartlett_weight, omega_nt
from .mc import DgpSpec, ExperimentGrid, run_experiment, simulate_panel
from .ols import FitResult, fit_ols
from .panel_data import PanelData, load_csv, within_transform, write_csv
from .tuning import CvConfig, CvResult, cross_validate_m

__version__ = "0.1.0"

__all__ = [
    "CovEstimate", "ThresholdConfig", "block_moment", "block_moments", "dump_sparsity",
    "threshold_from_blocks", "v_cluster_ct", "v_cluster_cx", "v_dk", "v_hac", "v_threshold",
    "v_white", "PanelOLS", "WithinTransformer", "estimate_covariance", "NonPsdWarning",
    "PanelSEError", "format_table", "normal_critical_value", "sandwich_variance", "test_and_ci",
    "KernelSpec", "auto_bandwidth", "bartlett_weight", "omega_nt", "DgpSpec", "ExperimentGrid",
    "run_experiment", "simulate_panel", "FitResult", "fit_ols", "PanelData", "load_csv",
    "within_transform", "write_csv", "CvConfig", "CvResult", "cross_validate_m",
]
