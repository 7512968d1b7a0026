"""Monte Carlo designs and the null-rejection experiment.

The regression is ``y_it = alpha_i + mu_t + beta0 x_it + u_it``.  Regressors
and errors have AR(1) dynamics over t and a moving-average structure over
neighbouring units, a spatial autoregression, or a factor structure.
Each replication draws regressors, errors and fixed effects from three
disjoint substreams of a seed derived from ``(base_seed, replication)``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .covariance import (
    ThresholdConfig,
    block_moments,
    normalize_estimator,
    normalize_mode,
    threshold_from_blocks,
    v_cluster_ct,
    v_cluster_cx,
    v_white,
)
from .exceptions import InvalidConfig, SingularDesign, SingularSpatialSystem
from .inference import normal_critical_value
from .kernels import KernelSpec, omega_nt
from .ols import _fit_arrays
from .panel_data import PanelData, demean_array

__all__ = [
    "DgpSpec",
    "ExperimentGrid",
    "ExperimentRow",
    "ExperimentTable",
    "generate_regressors",
    "generate_errors",
    "generate_errors_case1",
    "generate_errors_case2",
    "generate_errors_case3",
    "spatial_weights",
    "simulate_panel",
    "replication_streams",
    "run_experiment",
]

logger = logging.getLogger(__name__)

STREAM_REGRESSORS, STREAM_ERRORS, STREAM_FE = 1, 2, 3
DEFAULT_ESTIMATORS = ("Hard", "HAC", "DK", "CX", "CT", "White")


@dataclass(frozen=True)
class DgpSpec:
    """Design of one Monte Carlo cell.

    ``rho``/``gamma`` drive Case 1 errors, ``psi`` the Case 2 spatial
    autoregression and ``r``/``rho_f``/``rho_lambda`` the Case 3 factors.
    ``fe_scale`` is the variance of the unit and time effects.
    """

    case: int = 1
    n: int = 50
    t: int = 100
    beta0: float = 1.0
    rho_x: float = 0.3
    gamma_x: float = 1.0
    rho: float = 0.0
    gamma: float = 0.0
    psi: float = 0.5
    r: int = 2
    rho_f: float = 0.9
    rho_lambda: float = 0.3
    burn_in: int = 100
    fe_scale: float = 0.5
    lattice: str = "rook"

    def __post_init__(self):
        if self.case not in (1, 2, 3):
            raise InvalidConfig(f"case must be 1, 2 or 3, got {self.case}")
        if self.n < 1 or self.t < 1:
            raise InvalidConfig("n and t must be positive")
        for name in ("rho_x", "rho", "psi", "rho_f", "rho_lambda"):
            value = getattr(self, name)
            if not abs(value) < 1:
                raise InvalidConfig(
                    f"{name}={value} violates the stationarity bound |{name}| < 1"
                )
        if self.gamma_x < 0 or self.gamma < 0:
            raise InvalidConfig("gamma and gamma_x are Uniform(0, gamma) bounds and must be >= 0")
        if self.r < 0 or self.burn_in < 0 or self.fe_scale < 0:
            raise InvalidConfig("r, burn_in and fe_scale must be nonnegative")
        if self.lattice not in ("rook", "chain"):
            raise InvalidConfig(f"lattice must be 'rook' or 'chain', got {self.lattice!r}")


def _ar1(rng, rho, shape, burn_in, axis=1):
    """AR(1) with N(0,1) innovations started at zero; burn-in dropped."""
    shape = list(shape)
    shape[axis] += burn_in
    e = rng.standard_normal(shape)
    out = lfilter([1.0], [1.0, -rho], e, axis=axis) if rho else e
    return np.take(out, np.arange(burn_in, shape[axis]), axis=axis)


def _neighbour_ma(v, lead, lag):
    """``lead_i v_{i+1,t} + v_it + lag_i v_{i-1,t}``, zero outside 1..N."""
    out = v.copy()
    out[:-1] += lead[:-1, None] * v[1:]
    out[1:] += lag[1:, None] * v[:-1]
    return out


def generate_regressors(spec: DgpSpec, rng) -> np.ndarray:
    nu = _ar1(rng, spec.rho_x, (spec.n, spec.t), spec.burn_in)
    a = rng.uniform(0.0, spec.gamma_x, spec.n)
    b = rng.uniform(0.0, spec.gamma_x, spec.n)
    return _neighbour_ma(nu, a, b)


def generate_errors_case1(spec: DgpSpec, rng) -> np.ndarray:
    m = _ar1(rng, spec.rho, (spec.n, spec.t), spec.burn_in)
    c = rng.uniform(0.0, spec.gamma, spec.n)
    d = rng.uniform(0.0, spec.gamma, spec.n)
    return _neighbour_ma(m, c, d)


def spatial_weights(n: int, lattice: str = "rook") -> np.ndarray:
    """Row-standardized contiguity matrix with zero diagonal.

    ``rook`` places units row by row on a ceil(sqrt(n))-wide grid (the last
    row may be partial) and links horizontal and vertical neighbours;
    ``chain`` links i to i-1 and i+1.
    """
    w = np.zeros((n, n))
    if lattice == "chain":
        idx = np.arange(n - 1)
        w[idx, idx + 1] = w[idx + 1, idx] = 1.0
    else:
        side = math.ceil(math.sqrt(n))
        for i in range(n):
            row, col = divmod(i, side)
            for j in (i - side, i + side):
                if 0 <= j < n:
                    w[i, j] = 1.0
            if col > 0:
                w[i, i - 1] = 1.0
            if col < side - 1 and i + 1 < n:
                w[i, i + 1] = 1.0
    rs = w.sum(axis=1, keepdims=True)
    return np.divide(w, rs, out=np.zeros_like(w), where=rs > 0)


def generate_errors_case2(spec: DgpSpec, rng, weights=None) -> np.ndarray:
    """Spatial AR(1) errors ``u_t = (I - psi W)^{-1} eta_t``, independent over t."""
    w = spatial_weights(spec.n, spec.lattice) if weights is None else weights
    a = np.eye(spec.n) - spec.psi * w
    if np.linalg.cond(a) > 1e12:
        raise SingularSpatialSystem(f"I - psi W is singular for psi={spec.psi}")
    eta = rng.standard_normal((spec.n, spec.t))
    return np.linalg.solve(a, eta)


def generate_errors_case3(spec: DgpSpec, rng) -> np.ndarray:
    """Factor errors ``u_it = sum_k lambda_ik F_tk + e_it``.

    Factors are AR(1) over t and loadings AR(1) over units.
    """
    e = rng.standard_normal((spec.n, spec.t))
    if spec.r == 0:
        return e
    f = _ar1(rng, spec.rho_f, (spec.t, spec.r), spec.burn_in, axis=0)
    lam = _ar1(rng, spec.rho_lambda, (spec.n, spec.r), spec.burn_in, axis=0)
    return lam @ f.T + e


def generate_errors(spec: DgpSpec, rng, weights=None) -> np.ndarray:
    if spec.case == 1:
        return generate_errors_case1(spec, rng)
    if spec.case == 2:
        return generate_errors_case2(spec, rng, weights)
    return generate_errors_case3(spec, rng)


def replication_streams(base_seed: int, rep: int):
    """Independent generators for regressors, errors and fixed effects."""
    return tuple(
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(base_seed), spawn_key=(int(rep), tag))))
        for tag in (STREAM_REGRESSORS, STREAM_ERRORS, STREAM_FE)
    )


def _streams(rng):
    if isinstance(rng, tuple):
        return rng
    if isinstance(rng, np.random.Generator):
        return tuple(rng.spawn(3))
    return replication_streams(int(rng), 0)


def simulate_panel(spec: DgpSpec, rng, weights=None) -> PanelData:
    """Draw one panel.

    ``rng`` is a seed, a Generator (split into three substreams) or a
    ``(regressors, errors, fixed_effects)`` tuple of Generators.
    """
    gx, gu, gfe = _streams(rng)
    x = generate_regressors(spec, gx)
    u = generate_errors(spec, gu, weights)
    sd = math.sqrt(spec.fe_scale)
    alpha = gfe.normal(0.0, sd, spec.n) if sd else np.zeros(spec.n)
    mu = gfe.normal(0.0, sd, spec.t) if sd else np.zeros(spec.t)
    y = alpha[:, None] + mu[None, :] + spec.beta0 * x + u
    return PanelData(y=y, x=x[:, :, None], time_labels=tuple(range(1, spec.t + 1)))


# -- experiment --------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentGrid:
    dgp: DgpSpec = field(default_factory=DgpSpec)
    bandwidths: tuple = (3, 7, 11)
    thresholds: tuple = (0.10, 0.15, 0.20, 0.25)
    estimators: tuple = DEFAULT_ESTIMATORS
    reps: int = 1000
    level: float = 0.05
    base_seed: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidConfig("reps must be at least 1")
        if not 0 < self.level < 1:
            raise InvalidConfig("level must lie in (0, 1)")
        ests = tuple(normalize_estimator(e) for e in self.estimators)
        object.__setattr__(self, "estimators", ests)
        object.__setattr__(self, "bandwidths", tuple(int(b) for b in self.bandwidths))
        object.__setattr__(self, "thresholds", tuple(float(m) for m in self.thresholds))
        if any(b < 0 for b in self.bandwidths):
            raise InvalidConfig("bandwidths must be nonnegative")
        if any(m < 0 for m in self.thresholds):
            raise InvalidConfig("thresholds must be nonnegative")
        if {"Hard", "Soft"} & set(ests):
            if any(b < 1 for b in self.bandwidths):
                raise InvalidConfig("thresholded estimators need bandwidth >= 1")
            if not self.thresholds:
                raise InvalidConfig("thresholded estimators need at least one M value")

    def cells(self):
        """(bandwidth, M, estimator) cells in output order."""
        out = []
        for est in self.estimators:
            if est in ("White", "CX", "CT"):
                out.append((None, None, est))
            elif est in ("HAC", "DK"):
                out.extend((bw, None, est) for bw in self.bandwidths)
            else:
                out.extend((bw, m, est) for bw in self.bandwidths for m in self.thresholds)
        return out


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    t: int
    bandwidth: int | None
    m: float | None
    estimator: str
    reject_rate: float
    reps: int
    mc_se: float
    failed: int = 0

    @property
    def flagged(self) -> bool:
        total = self.reps + self.failed
        return total > 0 and self.failed > 0.01 * total


@dataclass(frozen=True)
class ExperimentTable:
    rows: tuple
    grid: ExperimentGrid | None = None
    # outcome[rep, cell]: 1 reject, 0 accept, -1 failed
    outcomes: np.ndarray | None = field(default=None, repr=False, compare=False)
    beta_hat: np.ndarray | None = field(default=None, repr=False, compare=False)

    CSV_HEADER = ("N", "T", "L", "M", "estimator", "reject_rate", "reps", "mc_se")

    def lookup(self, estimator, bandwidth=None, m=None) -> ExperimentRow:
        est = normalize_estimator(estimator)
        for row in self.rows:
            if row.estimator == est and row.bandwidth == bandwidth and (
                (row.m is None and m is None) or (row.m is not None and m is not None and math.isclose(row.m, m))
            ):
                return row
        raise KeyError((estimator, bandwidth, m))

    def rate(self, estimator, bandwidth=None, m=None) -> float:
        return self.lookup(estimator, bandwidth, m).reject_rate

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([
                r.n, r.t,
                "" if r.bandwidth is None else r.bandwidth,
                "" if r.m is None else repr(r.m),
                r.estimator, repr(r.reject_rate), r.reps, repr(r.mc_se),
            ])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "columns": list(self.CSV_HEADER) + ["failed"],
            "rows": [
                [r.n, r.t, r.bandwidth, r.m, r.estimator, r.reject_rate, r.reps, r.mc_se, r.failed]
                for r in self.rows
            ],
        }

    def to_text(self) -> str:
        """Rows per bandwidth; Hard columns by M, then the other estimators."""
        def cell(v):
            return f"{v:.3f}".replace("0.", ".", 1) if v is not None else "-"

        rows = self.rows
        n, t = (rows[0].n, rows[0].t) if rows else (0, 0)
        ms = sorted({r.m for r in rows if r.m is not None})
        bws = sorted({r.bandwidth for r in rows if r.bandwidth is not None}) or [None]
        thr = [e for e in ("Hard", "Soft") if any(r.estimator == e for r in rows)]
        fixed = [e for e in ("HAC", "DK", "CX", "CT", "White", "Soft") if e not in thr
                 and any(r.estimator == e for r in rows)]
        index = {(r.estimator, r.bandwidth, r.m): r for r in rows}
        header = ["N", "T", "L"] + [f"{e}({m:g})" for e in thr for m in ms] + fixed
        body = []
        for i, bw in enumerate(bws):
            line = [str(n) if i == 0 else "", str(t) if i == 0 else "", "" if bw is None else str(bw)]
            for e in thr:
                for m in ms:
                    r = index.get((e, bw, m))
                    line.append(cell(r.reject_rate if r else None))
            for e in fixed:
                r = index.get((e, bw, None)) or index.get((e, None, None))
                line.append(cell(r.reject_rate if r else None))
            body.append(line)
        widths = [max(len(c) for c in col) for col in zip(header, *body)]
        out = ["  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in [header, *body]]
        reps = max((r.reps + r.failed for r in rows), default=0)
        out.append(f"null rejection probabilities over {reps} replications")
        for r in rows:
            if r.flagged:
                out.append(
                    f"warning: {r.estimator} L={r.bandwidth} M={r.m} failed in {r.failed} replications"
                )
        return "\n".join(out)


def _replicate(grid: ExperimentGrid, rep: int, weights=None):
    spec = grid.dgp
    panel = simulate_panel(spec, replication_streams(grid.base_seed, rep), weights)
    x = demean_array(panel.x)
    y = demean_array(panel.y)
    cells = grid.cells()
    out = np.full(len(cells), -1, dtype=np.int8)
    try:
        fit = _fit_arrays(x, y)
    except SingularDesign:
        return out, np.nan
    u = fit.residuals
    z = normal_critical_value(grid.level)
    vx_inv = np.linalg.inv(fit.v_x)
    beta = fit.beta_hat
    null = np.full_like(beta, spec.beta0)

    def decide(v):
        var = (vx_inv @ v @ vx_inv)[0, 0] / fit.nt
        if not (var > 0 and np.isfinite(var)):
            return -1
        return int(abs(beta[0] - null[0]) / math.sqrt(var) > z)

    fixed = {"White": v_white, "CX": v_cluster_cx, "CT": v_cluster_ct}
    by_bw = {}
    n = spec.n
    for c, (bw, m, est) in enumerate(cells):
        if est in fixed:
            out[c] = decide(fixed[est](x, u).v_hat)
            continue
        if bw not in by_bw:
            kernel = KernelSpec(bw)
            blocks = block_moments(x, u, kernel)
            diag = blocks[np.arange(n), np.arange(n)]
            scale = omega_nt(bw, n, spec.t) if bw >= 1 else None
            by_bw[bw] = (kernel, blocks, diag, scale)
        kernel, blocks, diag, scale = by_bw[bw]
        if est == "HAC":
            v = diag.sum(axis=0) / n
        elif est == "DK":
            # same reduction as the thresholded sum so M=0 matches bit for bit
            v = threshold_from_blocks(blocks, ThresholdConfig(0.0, "Hard", scale), kernel, warn=False).v_hat \
                if scale is not None else blocks.sum(axis=(0, 1)) / n
        else:
            cfg = ThresholdConfig(m, normalize_mode(est), scale)
            v = threshold_from_blocks(blocks, cfg, kernel, warn=False).v_hat
        out[c] = decide(v)
    return out, float(beta[0])


def _replicate_range(grid: ExperimentGrid, start: int, stop: int):
    weights = spatial_weights(grid.dgp.n, grid.dgp.lattice) if grid.dgp.case == 2 else None
    res = [_replicate(grid, rep, weights) for rep in range(start, stop)]
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])


def run_experiment(grid: ExperimentGrid, threads: int = 1, chunk: int = 25) -> ExperimentTable:
    """Simulate ``grid.reps`` panels and tabulate null rejection rates.

    Work is split into fixed replication ranges; results are reassembled in
    replication order, so the table does not depend on ``threads``.
    """
    ranges = [(s, min(grid.reps, s + chunk)) for s in range(0, grid.reps, chunk)]
    if threads > 1 and len(ranges) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_replicate_range, [grid] * len(ranges), *zip(*ranges)))
    else:
        parts = [_replicate_range(grid, s, e) for s, e in ranges]
    outcomes = np.concatenate([p[0] for p in parts], axis=0)
    betas = np.concatenate([p[1] for p in parts])

    rows = []
    spec = grid.dgp
    for c, (bw, m, est) in enumerate(grid.cells()):
        col = outcomes[:, c]
        ok = col >= 0
        good = int(ok.sum())
        failed = int(len(col) - good)
        p = float(col[ok].mean()) if good else float("nan")
        se = math.sqrt(p * (1 - p) / good) if good else float("nan")
        row = ExperimentRow(spec.n, spec.t, bw, m, est, p, good, se, failed)
        if row.flagged:
            logger.warning("%s (L=%s, M=%s): %d of %d replications failed",
                           est, bw, m, failed, len(col))
        rows.append(row)
    return ExperimentTable(rows=tuple(rows), grid=grid, outcomes=outcomes, beta_hat=betas)


def with_dgp(grid: ExperimentGrid, **changes) -> ExperimentGrid:
    return replace(grid, dgp=replace(grid.dgp, **changes))
