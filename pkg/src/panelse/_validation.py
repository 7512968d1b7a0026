"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatch
from .panel_data import PanelData


def check_panel_x(X, *, name="X") -> np.ndarray:
    """Return ``X`` as a finite float array of shape (N, T, k)."""
    if isinstance(X, PanelData):
        return np.asarray(X.x)
    x = np.asarray(X, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ShapeMismatch(f"{name} must have shape (N, T) or (N, T, k), got {x.shape}")
    if 0 in x.shape:
        raise ShapeMismatch(f"{name} has an empty dimension: {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return x


def check_panel_arrays(X, y=None):
    """Validate a regressor array and an (N, T) outcome against each other.

    ``X`` may be a :class:`~panelse.panel_data.PanelData`, in which case
    ``y`` defaults to its outcome.
    """
    if isinstance(X, PanelData) and y is None:
        y = X.y
    x = check_panel_x(X)
    if y is None:
        raise ValueError("y is required")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != x.shape[:2]:
        raise ShapeMismatch(f"y has shape {y.shape}, expected {x.shape[:2]} to match X")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains NaN or infinite values")
    return x, y


def check_bandwidth(bandwidth, t):
    from .kernels import auto_bandwidth

    if bandwidth is None or bandwidth == "auto":
        return auto_bandwidth(t)
    if int(bandwidth) != bandwidth or bandwidth < 0:
        raise ValueError(f"bandwidth must be 'auto' or a nonnegative integer, got {bandwidth!r}")
    return int(bandwidth)
