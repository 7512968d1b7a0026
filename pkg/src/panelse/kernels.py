"""Bartlett lag weights, the automatic bandwidth rule and the threshold rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InvalidConfig

__all__ = [
    "KernelSpec",
    "ThresholdScale",
    "bartlett_weight",
    "auto_bandwidth",
    "omega_nt",
]


def bartlett_weight(h: int, l: int) -> float:
    """Bartlett weight ``1 - h / (l + 1)`` for ``h <= l``, zero beyond."""
    if h < 0 or l < 0:
        raise DomainError("lag and bandwidth must be nonnegative")
    if h > l:
        return 0.0
    return 1.0 - h / (l + 1.0)


@dataclass(frozen=True)
class KernelSpec:
    """Lag window used by every HAC-type estimator.

    Lag-0 terms are never weighted; :meth:`weights` returns the weights
    for lags ``1..bandwidth``.
    """

    bandwidth: int
    kind: str = "bartlett"

    def __post_init__(self):
        if self.kind != "bartlett":
            raise InvalidConfig(f"unsupported kernel {self.kind!r}; only 'bartlett'")
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 0:
            raise InvalidConfig(f"bandwidth must be a nonnegative integer, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", int(self.bandwidth))

    def weight(self, h: int) -> float:
        return bartlett_weight(h, self.bandwidth)

    def weights(self) -> np.ndarray:
        lags = np.arange(1, self.bandwidth + 1)
        return 1.0 - lags / (self.bandwidth + 1.0)


def auto_bandwidth(t: int) -> int:
    """Rule-of-thumb bandwidth ``floor(4 (T/100)^(2/9))``, at least 1."""
    if t < 2:
        raise DomainError("need at least two periods")
    return max(1, int(math.floor(4.0 * (t / 100.0) ** (2.0 / 9.0))))


@dataclass(frozen=True)
class ThresholdScale:
    """Threshold rate ``L * sqrt(log(L N) / T)`` together with its inputs."""

    omega_nt: float
    l: int
    n: float
    t: int


def omega_nt(l: int, n: float, t: int) -> ThresholdScale:
    """Compute the thresholding rate for bandwidth ``l`` on an ``n`` x ``t`` panel.

    ``log`` is the natural logarithm.
    """
    if l < 1:
        raise DomainError(f"bandwidth must be at least 1 for thresholding, got {l}")
    if t < 1:
        raise DomainError(f"number of periods must be positive, got {t}")
    if l * n < 2:
        raise DomainError(f"L*N = {l * n} < 2 makes log(L*N) too small")
    return ThresholdScale(omega_nt=l * math.sqrt(math.log(l * n) / t), l=l, n=n, t=t)
