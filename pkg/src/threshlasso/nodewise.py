"""Nodewise-regression precision matrices for the augmented design.

Each regime's Gram matrix is approximately inverted by regressing every column
on the remaining columns of the same regime with a weighted Lasso.  The two
regime inverses are assembled into the 2p x 2p relaxed inverse of the
augmented Gram via its block structure: rows for upper-regime coefficients use
the upper-regime inverse, rows for regime shifts combine both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import GramPair, Sample, gram
from .errors import ContractError, DegenerateColumnError, InputError
from .solver import LassoConfig, solve_gram

__all__ = ["NodewiseFit", "PrecisionEstimate", "nodewise_fit", "assemble_theta", "kkt_residual"]

# Relative floor applied to the nodewise noise level z^2 before inversion.
Z_FLOOR_REL = 1e-10

_REGIMES = ("lower", "upper")


@dataclass(frozen=True)
class NodewiseFit:
    """One nodewise regression: column ``j`` on the others within a regime."""

    j: int
    regime: str
    gamma: np.ndarray
    z_sq: float
    lambda_node: float
    max_weight: float
    floored: bool
    kkt_violation: float
    converged: bool
    iterations: int

    @property
    def kkt_bound(self) -> float:
        """Analytic row bound ``lambda_node * max_weight / z_sq``."""
        return self.lambda_node * self.max_weight / self.z_sq


def _nodewise_from_gram(greg: np.ndarray, j: int, lambda_node: float, regime: str,
                        cfg: LassoConfig | None) -> NodewiseFit:
    p = greg.shape[0]
    if greg[j, j] <= 0.0:
        raise DegenerateColumnError(
            f"column {j} is identically zero in the {regime} regime"
        )
    weights = np.sqrt(np.maximum(np.diag(greg), 0.0))
    pinned = np.zeros(p, dtype=bool)
    pinned[j] = True
    sol = solve_gram(
        greg, greg[:, j].copy(), float(greg[j, j]), lambda_node, weights,
        cfg=cfg, pinned=pinned,
    )
    # The solver objective is exactly |X_j - X_{-j} gamma|_n^2 + lam |Gamma gamma|_1,
    # which is the nodewise noise level z^2.
    floor = Z_FLOOR_REL * (float(greg[j, j]) + 1.0)
    z_sq = float(sol.objective)
    floored = z_sq < floor
    if floored:
        z_sq = floor
    others = np.arange(p) != j
    max_weight = float(np.max(weights[others])) if p > 1 else 0.0
    return NodewiseFit(
        j=j,
        regime=regime,
        gamma=sol.coef[others].copy(),
        z_sq=z_sq,
        lambda_node=float(lambda_node),
        max_weight=max_weight,
        floored=floored,
        kkt_violation=sol.kkt_violation,
        converged=sol.converged,
        iterations=sol.iterations,
    )


def _inverse_row(fit: NodewiseFit, p: int) -> np.ndarray:
    """Row of the relaxed regime inverse: (e_j - gamma placed off-diagonal) / z^2."""
    row = np.zeros(p)
    row[fit.j] = 1.0
    others = np.arange(p) != fit.j
    row[others] = -fit.gamma
    return row / fit.z_sq


def nodewise_fit(
    sample: Sample,
    tau: float,
    j: int,
    regime: str,
    lambda_node: float,
    cfg: LassoConfig | None = None,
) -> NodewiseFit:
    """Run the nodewise regression for column ``j`` within one regime at ``tau``."""
    if regime not in _REGIMES:
        raise InputError(f"regime must be one of {_REGIMES}, got {regime!r}")
    if not 0 <= j < sample.p:
        raise InputError(f"column index {j} out of range for p={sample.p}")
    if lambda_node < 0:
        raise InputError(f"lambda_node must be non-negative, got {lambda_node}")
    gp = gram(sample, tau)
    greg = gp.m_hat if regime == "lower" else gp.n_hat
    return _nodewise_from_gram(greg, j, lambda_node, regime, cfg)


@dataclass(frozen=True)
class PrecisionEstimate:
    """Assembled relaxed inverse of the augmented Gram matrix.

    ``theta`` holds NaN in rows that were not requested.  ``a_hat`` rows invert
    the lower-regime Gram, ``b_hat`` rows the upper-regime Gram; ``z_sq_*`` are
    the nodewise noise levels those rows divide by.
    """

    tau: float
    lambda_node: float
    theta: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray
    z_sq_lower: np.ndarray
    z_sq_upper: np.ndarray
    kkt_bounds: np.ndarray
    rows_computed: np.ndarray
    fits_lower: dict
    fits_upper: dict

    @property
    def p(self) -> int:
        return self.a_hat.shape[0]

    def covers(self, rows) -> bool:
        return bool(np.all(np.isin(np.asarray(rows, dtype=int), self.rows_computed)))


def assemble_theta(
    sample: Sample,
    tau: float,
    lambda_node: float,
    rows="all",
    cfg: LassoConfig | None = None,
) -> PrecisionEstimate:
    """Assemble the 2p x 2p relaxed inverse at ``tau`` for the requested rows.

    ``rows`` is either ``"all"`` or an iterable of coordinate indices into the
    augmented vector (0-based: ``j < p`` addresses the upper-regime slope,
    ``p + j`` the regime shift of covariate ``j``).
    """
    p = sample.p
    two_p = 2 * p
    if rows == "all":
        row_idx = np.arange(two_p)
    else:
        row_idx = np.unique(np.asarray(list(rows), dtype=int))
        if row_idx.size == 0:
            raise InputError("rows must be non-empty")
        if row_idx.min() < 0 or row_idx.max() >= two_p:
            raise InputError(f"row indices must lie in [0, {two_p}), got {row_idx}")
    if lambda_node < 0:
        raise InputError(f"lambda_node must be non-negative, got {lambda_node}")

    gp = gram(sample, tau)
    need_b = sorted({int(r) if r < p else int(r) - p for r in row_idx})
    need_a = sorted({int(r) - p for r in row_idx if r >= p})

    fits_upper = {
        j: _nodewise_from_gram(gp.n_hat, j, lambda_node, "upper", cfg) for j in need_b
    }
    fits_lower = {
        j: _nodewise_from_gram(gp.m_hat, j, lambda_node, "lower", cfg) for j in need_a
    }

    theta = np.full((two_p, two_p), np.nan)
    a_hat = np.full((p, p), np.nan)
    b_hat = np.full((p, p), np.nan)
    z_lo = np.full(p, np.nan)
    z_hi = np.full(p, np.nan)
    bounds = np.full(two_p, np.nan)

    for j, fit in fits_upper.items():
        b_hat[j] = _inverse_row(fit, p)
        z_hi[j] = fit.z_sq
    for j, fit in fits_lower.items():
        a_hat[j] = _inverse_row(fit, p)
        z_lo[j] = fit.z_sq

    for r in row_idx:
        r = int(r)
        if r < p:
            fit_b = fits_upper[r]
            theta[r, :p] = b_hat[r]
            theta[r, p:] = -b_hat[r]
            bounds[r] = fit_b.kkt_bound
        else:
            j = r - p
            fit_a, fit_b = fits_lower[j], fits_upper[j]
            theta[r, :p] = -b_hat[j]
            theta[r, p:] = a_hat[j] + b_hat[j]
            bounds[r] = fit_a.kkt_bound + fit_b.kkt_bound

    return PrecisionEstimate(
        tau=float(tau),
        lambda_node=float(lambda_node),
        theta=theta,
        a_hat=a_hat,
        b_hat=b_hat,
        z_sq_lower=z_lo,
        z_sq_upper=z_hi,
        kkt_bounds=bounds,
        rows_computed=row_idx,
        fits_lower=fits_lower,
        fits_upper=fits_upper,
    )


def kkt_residual(estimate: PrecisionEstimate, gram_pair: GramPair) -> np.ndarray:
    """Row-wise sup-norm of ``theta sigma_hat - I`` for the computed rows.

    Rows that were not computed come back NaN.  Each computed entry should sit
    below the matching ``kkt_bounds`` value (the analytic nodewise KKT bound).
    """
    if abs(gram_pair.tau - estimate.tau) > 0:
        raise ContractError(
            f"gram pair built at tau={gram_pair.tau}, estimate at tau={estimate.tau}"
        )
    two_p = estimate.theta.shape[0]
    out = np.full(two_p, np.nan)
    rows = estimate.rows_computed
    if rows.size == 0:
        return out
    sigma = gram_pair.sigma_hat
    prod = estimate.theta[rows] @ sigma
    prod[np.arange(rows.size), rows] -= 1.0
    out[rows] = np.max(np.abs(prod), axis=1)
    return out
