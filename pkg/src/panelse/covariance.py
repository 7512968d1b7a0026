"""Estimators of the long-run variance of the OLS score.

All estimators take the regressor array ``x`` of shape (N, T, k) and the
residual matrix ``u`` of shape (N, T) and return a k x k estimate of

    V = Var( (NT)^{-1/2} sum_i sum_t x_it u_it ).

No degrees-of-freedom corrections are applied.

The thresholded estimators work on the blockwise Newey-West moments
``S_ij`` (k x k), the kernel-weighted cross-covariance of the score series
of units i and j.  Summing all blocks over N gives Driscoll-Kraay, summing
only the diagonal gives the panel HAC estimator, and thresholding keeps
the diagonal plus the off-diagonal blocks that are large relative to
``M * omega_NT * sqrt(||S_ii|| ||S_jj||)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import IndexOutOfRange, InvalidConfig, NonPsdWarning, ShapeMismatch
from .kernels import KernelSpec, ThresholdScale, omega_nt

__all__ = [
    "BlockMoment",
    "CovEstimate",
    "ThresholdConfig",
    "ESTIMATORS",
    "normalize_estimator",
    "v_white",
    "v_cluster_cx",
    "v_cluster_ct",
    "v_hac",
    "v_dk",
    "block_moment",
    "block_moments",
    "v_threshold",
    "threshold_from_blocks",
    "dump_sparsity",
]

ESTIMATORS = ("White", "CX", "CT", "HAC", "DK", "Hard", "Soft")


@dataclass(frozen=True)
class CovEstimate:
    v_hat: np.ndarray
    estimator: str
    bandwidth: int | None = None
    threshold_m: float | None = None
    kept_blocks: int | None = None
    psd_floor_applied: bool = False
    # materialized (i, j, norm, kept) records, only when requested
    sparsity: tuple = field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class BlockMoment:
    i: int
    j: int
    s: np.ndarray
    norm: float


_EST_NAMES = {
    "white": "White", "w": "White", "cx": "CX", "ct": "CT", "hac": "HAC",
    "dk": "DK", "hard": "Hard", "soft": "Soft",
}


def normalize_estimator(name: str) -> str:
    try:
        return _EST_NAMES[str(name).lower()]
    except KeyError:
        raise InvalidConfig(
            f"unknown estimator {name!r}; choose from {sorted(set(_EST_NAMES.values()))}"
        ) from None


def normalize_mode(mode: str) -> str:
    out = str(mode).capitalize()
    if out not in ("Hard", "Soft"):
        raise InvalidConfig(f"mode must be 'hard' or 'soft', got {mode!r}")
    return out


@dataclass(frozen=True)
class ThresholdConfig:
    """Thresholding constant M, mode and the rate omega_NT it multiplies."""

    m: float
    mode: str
    scale: ThresholdScale
    psd_floor: bool = False

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m < 0:
            raise InvalidConfig(f"threshold constant M must be >= 0, got {self.m}")
        object.__setattr__(self, "mode", normalize_mode(self.mode))

    @classmethod
    def for_panel(cls, m, mode, bandwidth, n, t, psd_floor=False):
        return cls(m=m, mode=mode, scale=omega_nt(bandwidth, n, t), psd_floor=psd_floor)


# -- helpers -----------------------------------------------------------------


def _check(x, u):
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if u.ndim != 2 or x.ndim != 3 or x.shape[:2] != u.shape:
        raise ShapeMismatch(
            f"regressors {x.shape} and residuals {u.shape} do not share an (N, T) layout"
        )
    return x, u


def _scores(x, u):
    x, u = _check(x, u)
    return x * u[:, :, None]


def _sym(a):
    return (a + a.T) / 2


def _kernel(kernel) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    return KernelSpec(int(kernel))


def _lag_sum(series, weights):
    """Kernel-weighted long-run sum of a (T, k) series (unnormalized)."""
    out = series.T @ series
    for h, w in enumerate(weights, start=1):
        if h >= series.shape[0]:
            break
        g = series[h:].T @ series[:-h]
        out += w * (g + g.T)
    return out


def _spectral_norms(blocks):
    if blocks.shape[-1] == 1:
        return np.abs(blocks[..., 0, 0])
    return np.linalg.norm(blocks, ord=2, axis=(-2, -1))


def _warn_if_not_psd(v, name):
    if v.shape[0] and np.linalg.eigvalsh(v)[0] < 0:
        warnings.warn(
            f"{name} covariance estimate is not positive semidefinite",
            NonPsdWarning,
            stacklevel=3,
        )


# -- classical estimators ----------------------------------------------------


def v_white(x, u) -> CovEstimate:
    """Heteroskedasticity-robust ``(1/NT) sum x_it x_it' u_it^2``."""
    g = _scores(x, u)
    n, t, k = g.shape
    gf = g.reshape(n * t, k)
    return CovEstimate(_sym(gf.T @ gf) / (n * t), "White")


def v_cluster_cx(x, u) -> CovEstimate:
    """Cluster by unit: arbitrary serial dependence, no cross-section correlation."""
    g = _scores(x, u)
    n, t, _ = g.shape
    s = g.sum(axis=1)
    return CovEstimate(_sym(s.T @ s) / (n * t), "CX")


def v_cluster_ct(x, u) -> CovEstimate:
    """Cluster by period: arbitrary cross-section correlation, no serial dependence."""
    g = _scores(x, u)
    n, t, _ = g.shape
    s = g.sum(axis=0)
    return CovEstimate(_sym(s.T @ s) / (n * t), "CT")


def v_hac(x, u, kernel) -> CovEstimate:
    """Panel Newey-West: unit-by-unit HAC sums, cross-sectional independence."""
    kernel = _kernel(kernel)
    g = _scores(x, u)
    n, t, k = g.shape
    v = np.einsum("itk,itl->kl", g, g)
    for h, w in enumerate(kernel.weights(), start=1):
        if h >= t:
            break
        gh = np.einsum("itk,itl->kl", g[:, h:], g[:, :-h])
        v += w * (gh + gh.T)
    return CovEstimate(_sym(v) / (n * t), "HAC", bandwidth=kernel.bandwidth)


def v_dk(x, u, kernel) -> CovEstimate:
    """Driscoll-Kraay: Newey-West on the cross-sectional sums ``x_t' u_t``."""
    kernel = _kernel(kernel)
    g = _scores(x, u)
    n, t, _ = g.shape
    v = _lag_sum(g.sum(axis=0), kernel.weights())
    return CovEstimate(_sym(v) / (n * t), "DK", bandwidth=kernel.bandwidth)


# -- block moments -----------------------------------------------------------


def _block_rows(G, rows, weights, k):
    """Blocks S_ij for units ``i`` in ``rows`` and all j.

    ``G`` is the (T, N*k) score matrix with unit-major columns.  Returns an
    array of shape (len(rows), N, k, k).
    """
    t, nk = G.shape
    n = nk // k
    cols = np.concatenate([np.arange(i * k, (i + 1) * k) for i in rows])
    Gr = G[:, cols]
    out = Gr.T @ G
    for h, w in enumerate(weights, start=1):
        if h >= t:
            break
        # sum_t g_{i,t} g_{j,t-h}'  +  sum_t g_{i,t-h} g_{j,t}'
        out += w * (Gr[h:].T @ G[:-h] + Gr[:-h].T @ G[h:])
    out /= t
    return out.reshape(len(rows), k, n, k).transpose(0, 2, 1, 3)


def _score_matrix(x, u):
    g = _scores(x, u)
    n, t, k = g.shape
    return g.transpose(1, 0, 2).reshape(t, n * k), (n, t, k)


def block_moment(x, u, i, j, kernel) -> BlockMoment:
    """Blockwise Newey-West moment S_ij of units ``i`` and ``j``."""
    kernel = _kernel(kernel)
    G, (n, t, k) = _score_matrix(x, u)
    for idx in (i, j):
        if not 0 <= idx < n:
            raise IndexOutOfRange(f"unit index {idx} outside 0..{n - 1}")
    gi = G[:, i * k:(i + 1) * k]
    gj = G[:, j * k:(j + 1) * k]
    s = gi.T @ gj
    for h, w in enumerate(kernel.weights(), start=1):
        if h >= t:
            break
        s += w * (gi[h:].T @ gj[:-h] + gi[:-h].T @ gj[h:])
    s /= t
    return BlockMoment(i=i, j=j, s=s, norm=float(_spectral_norms(s[None])[0]))


def block_moments(x, u, kernel) -> np.ndarray:
    """All N x N blocks S_ij as an array of shape (N, N, k, k)."""
    kernel = _kernel(kernel)
    G, (n, t, k) = _score_matrix(x, u)
    return _block_rows(G, range(n), kernel.weights(), k)


def _diag_blocks(G, weights, k):
    t, nk = G.shape
    n = nk // k
    g = G.reshape(t, n, k)
    d = np.einsum("tik,til->ikl", g, g)
    for h, w in enumerate(weights, start=1):
        if h >= t:
            break
        gh = np.einsum("tik,til->ikl", g[h:], g[:-h])
        d += w * (gh + gh.transpose(0, 2, 1))
    return d / t


def _threshold_chunk(blocks, rows, diag, diag_norms, m_omega, mode):
    """Thresholded sum over one row chunk; returns (sum, kept, kept mask)."""
    rows = np.asarray(rows)
    norms = _spectral_norms(blocks)
    lam = m_omega * np.sqrt(np.outer(diag_norms[rows], diag_norms))
    keep = norms > lam
    own = rows[:, None] == np.arange(diag.shape[0])[None, :]
    kept = int(np.count_nonzero(keep & ~own))
    if mode == "Hard":
        keep = keep | own
        total = np.einsum("ij,ijkl->kl", keep.astype(np.float64), blocks)
        return total, kept, keep, norms
    absd = np.abs(diag)
    eta = m_omega * np.sqrt(absd[rows][:, None] * absd[None, :])
    mag = np.abs(blocks)
    shrunk = np.where(mag > eta, np.sign(blocks) * (mag - eta), 0.0)
    shrunk = np.where((keep & ~own)[:, :, None, None], shrunk, 0.0)
    shrunk = np.where(own[:, :, None, None], blocks, shrunk)
    return shrunk.sum(axis=(0, 1)), kept, keep | own, norms


def _finish(total, n, cfg, kernel, kept, sparsity=(), warn=True):
    v = _sym(total / n)
    floored = False
    if cfg.psd_floor:
        evals, evecs = np.linalg.eigh(v)
        if evals[0] < 0:
            v = _sym((evecs * np.clip(evals, 0, None)) @ evecs.T)
            floored = True
    elif warn:
        _warn_if_not_psd(v, cfg.mode)
    return CovEstimate(
        v,
        cfg.mode,
        bandwidth=kernel.bandwidth,
        threshold_m=float(cfg.m),
        kept_blocks=kept,
        psd_floor_applied=floored,
        sparsity=sparsity,
    )


def threshold_from_blocks(blocks, cfg: ThresholdConfig, kernel, warn=True) -> CovEstimate:
    """Thresholded estimate from materialized (N, N, k, k) blocks."""
    kernel = _kernel(kernel)
    n = blocks.shape[0]
    diag = blocks[np.arange(n), np.arange(n)]
    total, kept, _, _ = _threshold_chunk(
        blocks, np.arange(n), diag, _spectral_norms(diag), cfg.m * cfg.scale.omega_nt, cfg.mode
    )
    return _finish(total, n, cfg, kernel, kept, warn=warn)


def v_threshold(
    x,
    u,
    kernel,
    cfg: ThresholdConfig,
    *,
    chunk_size: int = 64,
    record_sparsity: bool = False,
) -> CovEstimate:
    """Hard- or soft-thresholded blockwise Newey-West estimator.

    Blocks are produced ``chunk_size`` units at a time and reduced in unit
    order, so memory is O(chunk_size * N * k^2) and the result does not
    depend on how the work is scheduled.

    With ``M = 0`` the hard estimator equals :func:`v_dk`; for very large
    ``M`` both modes reduce to :func:`v_hac`.
    """
    kernel = _kernel(kernel)
    G, (n, t, k) = _score_matrix(x, u)
    sc = cfg.scale
    if (sc.l, sc.t) != (kernel.bandwidth, t) or sc.n != n:
        raise InvalidConfig(
            f"threshold scale was computed for (L={sc.l}, N={sc.n}, T={sc.t}) "
            f"but the data give (L={kernel.bandwidth}, N={n}, T={t})"
        )
    weights = kernel.weights()
    diag = _diag_blocks(G, weights, k)
    diag_norms = _spectral_norms(diag)
    m_omega = cfg.m * sc.omega_nt
    total = np.zeros((k, k))
    kept = 0
    records = []
    for start in range(0, n, max(1, chunk_size)):
        rows = np.arange(start, min(n, start + chunk_size))
        blocks = _block_rows(G, rows, weights, k)
        # diagonal from the dedicated pass so both code paths agree exactly
        blocks[np.arange(len(rows)), rows] = diag[rows]
        part, kc, mask, norms = _threshold_chunk(blocks, rows, diag, diag_norms, m_omega, cfg.mode)
        total += part
        kept += kc
        if record_sparsity:
            for a, i in enumerate(rows):
                for j in range(n):
                    records.append((int(i), int(j), float(norms[a, j]), bool(mask[a, j])))
    return _finish(total, n, cfg, kernel, kept, tuple(records))


def dump_sparsity(estimate: CovEstimate, path, kept_only: bool = True) -> None:
    """Write the block sparsity pattern as ``i,j,norm`` CSV triples."""
    if not estimate.sparsity:
        raise InvalidConfig("estimate carries no sparsity record; use record_sparsity=True")
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("i,j,norm\n")
        for i, j, norm, kept in estimate.sparsity:
            if kept or not kept_only:
                fh.write(f"{i},{j},{norm!r}\n")
