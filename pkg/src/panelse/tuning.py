"""Block cross-validation of the threshold constant M."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import (
    ThresholdConfig,
    _check,
    block_moments,
    normalize_mode,
    threshold_from_blocks,
    v_dk,
)
from .exceptions import FoldTooShort, InvalidConfig, TooShort
from .kernels import KernelSpec, auto_bandwidth, omega_nt

__all__ = [
    "CvConfig",
    "CvResult",
    "default_folds",
    "default_grid",
    "fold_boundaries",
    "cross_validate_m",
]


def default_folds(t: int) -> int:
    """Number of validation blocks, ``round(log T)`` but at least 2."""
    if t < 8:
        raise TooShort(f"cross-validation needs T >= 8, got T={t}")
    return max(2, int(math.floor(math.log(t) + 0.5)))


def default_grid(m0: float = 1.0, size: int = 100) -> tuple:
    return tuple(float(v) for v in np.round(np.linspace(m0 / size, m0, size), 12))


def fold_boundaries(t: int, folds: int) -> list[tuple[int, int]]:
    """Consecutive ``[start, end)`` blocks; the remainder goes to the last one."""
    if folds < 1 or folds > t:
        raise InvalidConfig(f"cannot split {t} periods into {folds} folds")
    size = t // folds
    bounds = [(p * size, (p + 1) * size) for p in range(folds)]
    bounds[-1] = (bounds[-1][0], t)
    return bounds


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation settings.

    ``folds=None`` uses :func:`default_folds`, ``grid=None`` the 100-point
    grid ``m0/100, 2 m0/100, ..., m0`` and ``bandwidth=None`` the automatic
    bandwidth rule.
    """

    folds: int | None = None
    grid: tuple | None = None
    m0: float = 1.0
    bandwidth: int | None = None
    mode: str = "Hard"

    def __post_init__(self):
        if not self.m0 > 0:
            raise InvalidConfig("m0 must be positive")
        grid = default_grid(self.m0) if self.grid is None else tuple(float(g) for g in self.grid)
        if not grid:
            raise InvalidConfig("grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidConfig("grid must be strictly increasing")
        if grid[0] <= 0 or grid[-1] > self.m0:
            raise InvalidConfig(f"grid values must lie in (0, {self.m0}]")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mode", normalize_mode(self.mode))


@dataclass(frozen=True)
class CvResult:
    m_star: float
    objective: tuple
    fold_boundaries: tuple
    bandwidth: int = 0
    mode: str = "Hard"
    fold_estimates: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "m_star": self.m_star,
            "mode": self.mode,
            "bandwidth": self.bandwidth,
            "grid_losses": [{"M": m, "loss": loss} for m, loss in self.objective],
            "fold_boundaries": [list(b) for b in self.fold_boundaries],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def cross_validate_m(x, u, cfg: CvConfig | None = None) -> CvResult:
    """Choose M by minimizing ``mean_p ||V_s(M) - V^p||_F^2``.

    ``V_s(M)`` is the thresholded estimator on the full sample and ``V^p``
    the unthresholded blockwise sum (Driscoll-Kraay) on validation block
    p alone, both with the same bandwidth.  Residuals come from one
    full-sample fit.  Ties go to the smallest M.
    """
    cfg = cfg or CvConfig()
    x, u = _check(x, u)
    n, t, _ = x.shape
    folds = cfg.folds if cfg.folds is not None else default_folds(t)
    bandwidth = cfg.bandwidth if cfg.bandwidth is not None else auto_bandwidth(t)
    bounds = fold_boundaries(t, folds)
    shortest = min(e - s for s, e in bounds)
    if shortest < bandwidth + 2:
        raise FoldTooShort(
            f"validation blocks of {shortest} periods cannot support bandwidth L={bandwidth} "
            f"(need at least L+2={bandwidth + 2}); use fewer folds or a smaller bandwidth"
        )
    kernel = KernelSpec(bandwidth)
    scale = omega_nt(bandwidth, n, t)
    fold_est = [v_dk(x[:, s:e], u[:, s:e], kernel).v_hat for s, e in bounds]
    blocks = block_moments(x, u, kernel)

    objective = []
    for m in cfg.grid:
        v = threshold_from_blocks(blocks, ThresholdConfig(m, cfg.mode, scale), kernel, warn=False).v_hat
        loss = float(np.mean([np.sum((v - vp) ** 2) for vp in fold_est]))
        objective.append((m, loss))
    losses = np.array([loss for _, loss in objective])
    best = int(np.flatnonzero(losses == losses.min())[0])
    return CvResult(
        m_star=objective[best][0],
        objective=tuple(objective),
        fold_boundaries=tuple(bounds),
        bandwidth=bandwidth,
        mode=cfg.mode,
        fold_estimates=tuple(fold_est),
    )
