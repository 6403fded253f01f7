"""Sample container and threshold-augmented design construction.

The estimation target is a two-regime linear model: the response loads on the
covariates with one slope vector when the threshold variable sits below a
cutoff tau (strictly) and with a shifted slope vector otherwise.  Stacking the
raw covariates next to their lower-regime masked copies turns the model into a
single n x 2p linear regression indexed by tau, which is what every estimator
in this package consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGridError, InputError


def _validated_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Sample:
    """Estimation input: response ``y``, covariates ``x``, threshold variable ``q``.

    ``time_ordered`` marks the rows as a time series; it is informational for
    cross-sectional estimators and required by the local-projection tools.
    """

    y: np.ndarray
    x: np.ndarray
    q: np.ndarray
    time_ordered: bool = False

    def __post_init__(self):
        y = _validated_array(self.y, "y", 1)
        x = _validated_array(self.x, "x", 2)
        q = _validated_array(self.q, "q", 1)
        n = y.shape[0]
        if n < 2:
            raise InputError(f"need at least 2 observations, got {n}")
        if x.shape[0] != n or q.shape[0] != n:
            raise InputError(
                f"length mismatch: y has {n} rows, x has {x.shape[0]}, q has {q.shape[0]}"
            )
        if x.shape[1] < 1:
            raise InputError("x must have at least one column")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class ThresholdDesign:
    """Augmented design at a fixed cutoff: ``xaug = [x, x * 1{q < tau}]``.

    ``weights`` holds the empirical root-mean-square norm of every column;
    columns that vanish in the lower regime get weight zero and are pinned to
    zero by the solver.
    """

    tau: float
    xaug: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.xaug.shape[0]

    @property
    def two_p(self) -> int:
        return self.xaug.shape[1]


def build_design(sample: Sample, tau: float) -> ThresholdDesign:
    """Build the n x 2p threshold-augmented design at cutoff ``tau``.

    The lower-regime indicator is strict: row i contributes to the second
    block iff ``q[i] < tau``.
    """
    tau = float(tau)
    if not math.isfinite(tau):
        raise InputError(f"tau must be finite, got {tau}")
    lower = (sample.q < tau).astype(float)
    xaug = np.hstack([sample.x, sample.x * lower[:, None]])
    weights = np.sqrt(np.mean(xaug**2, axis=0))
    xaug.setflags(write=False)
    weights.setflags(write=False)
    return ThresholdDesign(tau=tau, xaug=xaug, weights=weights)


@dataclass(frozen=True)
class RegimeGrid:
    """Candidate cutoffs for the threshold search, all regime-safe."""

    candidates: np.ndarray
    lo_quantile: float
    hi_quantile: float

    def __post_init__(self):
        arr = _validated_array(self.candidates, "candidates", 1)
        object.__setattr__(self, "candidates", arr)

    def __len__(self) -> int:
        return self.candidates.shape[0]


def min_regime_count(n: int) -> int:
    """Smallest admissible number of observations per regime."""
    return max(2, math.ceil(0.05 * n))


def make_grid(
    sample: Sample,
    lo: float = 0.15,
    hi: float = 0.85,
    mode: str = "quantile-count",
    count: int = 71,
    step: float = 0.01,
) -> RegimeGrid:
    """Construct the cutoff grid inside the [lo, hi] quantile band of ``q``.

    Modes
    -----
    ``"quantile-count"``
        ``count`` candidates at equispaced quantile levels between lo and hi.
    ``"observed-values"``
        every distinct observed q value inside the band.
    ``"fixed-step"``
        integer multiples of ``step`` covering the band.

    Candidates that would leave fewer than ``min_regime_count(n)`` observations
    in either regime are dropped.
    """
    if not (0.0 < lo < hi < 1.0):
        raise InputError(f"require 0 < lo < hi < 1, got lo={lo}, hi={hi}")
    q = sample.q
    band_lo, band_hi = np.quantile(q, [lo, hi])
    in_band = q[(q >= band_lo) & (q <= band_hi)]
    if np.unique(in_band).size < 2:
        raise DegenerateGridError(
            f"quantile band [{band_lo:.6g}, {band_hi:.6g}] holds fewer than 2 distinct q values"
        )

    if mode == "quantile-count":
        if count < 1:
            raise InputError(f"count must be >= 1, got {count}")
        levels = np.linspace(lo, hi, count)
        cand = np.quantile(q, levels)
    elif mode == "observed-values":
        cand = np.unique(in_band)
    elif mode == "fixed-step":
        if not (step > 0 and math.isfinite(step)):
            raise InputError(f"step must be positive and finite, got {step}")
        # Anchor candidates at integer multiples of the step so the grid does
        # not drift with sampling noise in the band edges.
        tol = 1e-9 * max(1.0, abs(band_lo), abs(band_hi))
        k0 = math.ceil((band_lo - tol) / step)
        k1 = math.floor((band_hi + tol) / step)
        if k1 < k0:
            raise DegenerateGridError(
                f"no multiple of step={step} lies in [{band_lo:.6g}, {band_hi:.6g}]"
            )
        cand = np.arange(k0, k1 + 1) * step
    else:
        raise InputError(f"unknown grid mode {mode!r}")

    cand = np.unique(cand)
    q_sorted = np.sort(q)
    m = min_regime_count(sample.n)
    lower_counts = np.searchsorted(q_sorted, cand, side="left")
    keep = (lower_counts >= m) & (sample.n - lower_counts >= m)
    cand = cand[keep]
    if cand.size == 0:
        raise DegenerateGridError(
            "no grid candidate leaves enough observations in both regimes "
            f"(need {m} per regime)"
        )
    return RegimeGrid(candidates=cand, lo_quantile=lo, hi_quantile=hi)


def objective(design: ThresholdDesign, y: np.ndarray, alpha: np.ndarray, lam: float) -> float:
    """Penalized criterion: mean squared residual plus weighted l1 penalty."""
    y = np.asarray(y, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if y.shape[0] != design.n:
        raise InputError(f"y has {y.shape[0]} rows, design has {design.n}")
    if alpha.shape != (design.two_p,):
        raise InputError(f"alpha must have shape ({design.two_p},), got {alpha.shape}")
    if lam < 0:
        raise InputError(f"lambda must be non-negative, got {lam}")
    resid = y - design.xaug @ alpha
    return float(np.mean(resid**2) + lam * np.sum(design.weights * np.abs(alpha)))


@dataclass(frozen=True)
class GramPair:
    """Regime-split second-moment matrices at a cutoff.

    ``m_hat`` averages x x' over the lower regime (q < tau), ``n_hat`` over the
    upper regime; both use the full-sample 1/n normalization so they sum to the
    unsplit Gram matrix.
    """

    tau: float
    m_hat: np.ndarray
    n_hat: np.ndarray

    @property
    def sigma_hat(self) -> np.ndarray:
        """Augmented-design Gram matrix [[m+n, m], [m, m]]."""
        m, nn = self.m_hat, self.n_hat
        top = np.hstack([m + nn, m])
        bot = np.hstack([m, m])
        return np.vstack([top, bot])


def gram(sample: Sample, tau: float) -> GramPair:
    """Compute the regime-split Gram matrices at cutoff ``tau``."""
    tau = float(tau)
    if not math.isfinite(tau):
        raise InputError(f"tau must be finite, got {tau}")
    mask = sample.q < tau
    n = sample.n
    x_lo = sample.x[mask]
    x_hi = sample.x[~mask]
    m_hat = x_lo.T @ x_lo / n
    n_hat = x_hi.T @ x_hi / n
    m_hat = (m_hat + m_hat.T) / 2.0
    n_hat = (n_hat + n_hat.T) / 2.0
    return GramPair(tau=tau, m_hat=m_hat, n_hat=n_hat)
