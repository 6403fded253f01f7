"""Long-run covariance estimation for serially dependent scores.

Kernel-weighted autocovariance sums with the Bartlett kernel, computed jointly
for the lower-regime scores, the upper-regime scores, and their cross terms
with one shared bandwidth.  The regime-shift sandwich combines the three
matrices with the nodewise noise levels into the asymptotic variance of any
contrast of debiased coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BandwidthError, ContractError, InputError

__all__ = [
    "HacConfig",
    "LongRunCov",
    "auto_bandwidth",
    "bartlett_weight",
    "long_run_cov",
    "psi_variance",
]


@dataclass(frozen=True)
class HacConfig:
    """Bandwidth 0 means the automatic rule ``floor(4 (n/100)^(2/9))``."""

    bandwidth: int = 0
    kernel: str = "bartlett"

    def __post_init__(self):
        if self.bandwidth < 0:
            raise InputError(f"bandwidth must be >= 0, got {self.bandwidth}")
        if self.kernel != "bartlett":
            raise InputError(f"unsupported kernel {self.kernel!r}")


def auto_bandwidth(n: int) -> int:
    """Automatic truncation lag ``floor(4 (n/100)^(2/9))``, at least 1."""
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    return max(1, math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def bartlett_weight(lag: int, k_n: int) -> float:
    """Bartlett kernel weight ``1 - lag/k_n`` for ``0 <= lag < k_n``."""
    if k_n < 1:
        raise ContractError(f"k_n must be >= 1, got {k_n}")
    if lag < 0 or lag >= k_n:
        raise ContractError(f"lag must satisfy 0 <= lag < k_n={k_n}, got {lag}")
    return 1.0 - lag / k_n


@dataclass(frozen=True)
class LongRunCov:
    """Kernel estimates: within-lower ``omega``, within-upper ``omega_tilde``,
    and the cross matrix ``omega_bar`` (upper-score rows, lower-score columns
    so it sits between the upper and lower scale inverses); all share ``k_n``."""

    omega: np.ndarray
    omega_tilde: np.ndarray
    omega_bar: np.ndarray
    k_n: int


def _lagged_cross(a: np.ndarray, b: np.ndarray, lag: int) -> np.ndarray:
    # (1/(n-lag)) sum_{i=lag+1..n} a_i b_{i-lag}'
    n = a.shape[0]
    return a[lag:].T @ b[: n - lag] / (n - lag)


def _kernel_sum(a: np.ndarray, b: np.ndarray, k_n: int) -> np.ndarray:
    out = _lagged_cross(a, b, 0)
    for lag in range(1, k_n):
        gamma = _lagged_cross(a, b, lag)
        out = out + bartlett_weight(lag, k_n) * (gamma + gamma.T)
    return out


def long_run_cov(
    scores_lower: np.ndarray,
    scores_upper: np.ndarray,
    cfg: HacConfig | None = None,
) -> LongRunCov:
    """Bartlett long-run covariance of the two regime score processes.

    Scores are n x m arrays in time order (rows outside a regime are zero by
    construction of the regime residuals).
    """
    cfg = cfg or HacConfig()
    lo = np.atleast_2d(np.asarray(scores_lower, dtype=float))
    hi = np.atleast_2d(np.asarray(scores_upper, dtype=float))
    if lo.ndim != 2 or hi.ndim != 2:
        raise InputError("scores must be 2-dimensional (n x m)")
    if lo.shape != hi.shape:
        raise InputError(
            f"score shapes differ: lower {lo.shape}, upper {hi.shape}"
        )
    n = lo.shape[0]
    k_n = cfg.bandwidth if cfg.bandwidth > 0 else auto_bandwidth(n)
    if k_n > n:
        raise BandwidthError(f"bandwidth k_n={k_n} exceeds sample size n={n}")

    omega = _kernel_sum(lo, lo, k_n)
    omega_tilde = _kernel_sum(hi, hi, k_n)
    omega_bar = _lagged_cross(hi, lo, 0)
    for lag in range(1, k_n):
        gamma = _lagged_cross(hi, lo, lag)
        omega_bar = omega_bar + bartlett_weight(lag, k_n) * (gamma + gamma.T)

    omega = (omega + omega.T) / 2.0
    omega_tilde = (omega_tilde + omega_tilde.T) / 2.0
    return LongRunCov(omega=omega, omega_tilde=omega_tilde, omega_bar=omega_bar, k_n=k_n)


def psi_variance(
    g: np.ndarray,
    z_sq_lower: np.ndarray,
    z_sq_upper: np.ndarray,
    cov: LongRunCov,
) -> float:
    """Regime-shift sandwich quadratic form for a contrast ``g``.

    ``g`` stacks the upper-regime part (first m entries) over the shift part
    (last m entries); ``z_sq_*`` are the nodewise noise levels for the m
    tracked coordinates in each regime.
    """
    g = np.asarray(g, dtype=float)
    z_lo = np.asarray(z_sq_lower, dtype=float)
    z_hi = np.asarray(z_sq_upper, dtype=float)
    m = z_lo.shape[0]
    if z_hi.shape != (m,):
        raise InputError("z_sq_lower and z_sq_upper must have equal length")
    if g.shape != (2 * m,):
        raise InputError(f"g must have length {2 * m}, got {g.shape}")
    if cov.omega.shape != (m, m):
        raise InputError(
            f"long-run covariance is {cov.omega.shape}, expected ({m}, {m})"
        )
    support = np.flatnonzero(g)
    needed = np.unique(support % m)
    if np.any(~np.isfinite(z_lo[needed])) or np.any(~np.isfinite(z_hi[needed])):
        raise ContractError(
            "contrast support touches coordinates without nodewise noise levels"
        )

    d_lo = np.where(np.isfinite(z_lo), 1.0 / z_lo, 0.0)
    d_hi = np.where(np.isfinite(z_hi), 1.0 / z_hi, 0.0)

    def sandwich(left, mid, right):
        return (left[:, None] * mid) * right[None, :]

    t_hh = sandwich(d_hi, cov.omega_tilde, d_hi)
    t_ll = sandwich(d_lo, cov.omega, d_lo)
    cross = sandwich(d_hi, cov.omega_bar, d_lo)

    block = np.empty((2 * m, 2 * m))
    block[:m, :m] = t_hh
    block[:m, m:] = cross - t_hh
    block[m:, :m] = cross - t_hh
    block[m:, m:] = t_ll + t_hh - 2.0 * cross
    return float(g @ block @ g)
