"""Debiased estimation and uniform inference for the threshold Lasso.

The Lasso estimate is corrected by one relaxed-inverse Newton step, which makes
every coordinate asymptotically normal.  Standard errors come from the
heteroskedasticity-robust sandwich built from the augmented design and the
Lasso residuals; the same covariance feeds per-coordinate confidence intervals,
chi-square joint tests, and a Bonferroni family test across all 2p coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .design import Sample, build_design
from .errors import ContractError, InputError, SingularBlockError
from .nodewise import PrecisionEstimate
from .search import ThresholdFit

__all__ = [
    "JointTest",
    "InferenceReport",
    "debias",
    "sigma_xu_matrix",
    "variance_of_contrast",
    "confidence_interval",
    "chi2_joint_test",
    "bonferroni_family_test",
    "build_report",
]

# Eigenvalue floor (relative to trace/h) below which a joint-test block is
# declared singular.
EIG_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class JointTest:
    coords: np.ndarray
    statistic: float
    dof: int
    p_value: float
    null_values: np.ndarray


@dataclass(frozen=True)
class InferenceReport:
    """Per-coordinate debiased estimates with uncertainty.

    Arrays are full length 2p; coordinates outside ``rows`` are NaN.  ``cov``
    is the sandwich restricted to ``rows`` (ordered as in ``rows``).
    """

    tau_hat: float
    lam: float
    alpha_level: float
    coef: np.ndarray
    a_hat: np.ndarray
    se: np.ndarray
    z: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    degenerate: np.ndarray
    rows: np.ndarray
    cov: np.ndarray
    sigma_xu: np.ndarray
    residuals: np.ndarray
    reject_bonferroni: np.ndarray | None
    bonferroni_threshold: float | None
    joint_tests: list[JointTest] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    def to_json_dict(self) -> dict:
        def listify(arr):
            return [None if not np.isfinite(v) else float(v) for v in arr]

        out = {
            "tau_hat": self.tau_hat,
            "lambda": self.lam,
            "alpha_level": self.alpha_level,
            "coef": [float(v) for v in self.coef],
            "debiased": listify(self.a_hat),
            "se": listify(self.se),
            "ci_lo": listify(self.ci_lo),
            "ci_hi": listify(self.ci_hi),
            "z": [None if not np.isfinite(v) else float(v) for v in self.z],
            "reject_bonferroni": (
                None
                if self.reject_bonferroni is None
                else [bool(v) for v in self.reject_bonferroni]
            ),
            "joint_tests": [
                {
                    "coords": [int(c) for c in t.coords],
                    "statistic": float(t.statistic),
                    "dof": int(t.dof),
                    "p_value": float(t.p_value),
                }
                for t in self.joint_tests
            ],
        }
        return out


def debias(fit: ThresholdFit, theta: PrecisionEstimate, sample: Sample) -> np.ndarray:
    """One-step correction: ``a = alpha_hat + Theta X' (y - X alpha_hat) / n``.

    Only the rows carried by ``theta`` are corrected; the rest come back NaN.
    """
    if theta.tau != fit.tau_hat:
        raise ContractError(
            f"theta assembled at tau={theta.tau}, fit selected tau={fit.tau_hat}"
        )
    design = build_design(sample, fit.tau_hat)
    resid = sample.y - design.xaug @ fit.alpha_hat
    score = design.xaug.T @ resid / sample.n
    rows = theta.rows_computed
    out = np.full(fit.alpha_hat.shape, np.nan)
    out[rows] = fit.alpha_hat[rows] + theta.theta[rows] @ score
    return out


def sigma_xu_matrix(sample: Sample, fit: ThresholdFit) -> np.ndarray:
    """Outer-product covariance ``(1/n) sum x_i(tau) x_i(tau)' u_i^2`` from Lasso residuals."""
    design = build_design(sample, fit.tau_hat)
    resid = sample.y - design.xaug @ fit.alpha_hat
    scaled = design.xaug * (resid**2)[:, None]
    sxu = scaled.T @ design.xaug / sample.n
    return (sxu + sxu.T) / 2.0


def variance_of_contrast(g: np.ndarray, theta: PrecisionEstimate,
                         sigma_xu: np.ndarray) -> float:
    """Quadratic form ``g' Theta Sigma_xu Theta' g`` for a contrast vector ``g``.

    The support of ``g`` must be covered by the rows carried in ``theta``.
    """
    g = np.asarray(g, dtype=float)
    support = np.flatnonzero(g)
    if not theta.covers(support):
        raise ContractError(
            "contrast support includes coordinates without computed nodewise rows"
        )
    t = g[support] @ theta.theta[support]
    return max(float(t @ sigma_xu @ t), 0.0)


def confidence_interval(center: float, sigma: float, n: int,
                        alpha_level: float) -> tuple[float, float]:
    """Two-sided normal interval ``center +- z_{1-alpha/2} sigma / sqrt(n)``."""
    if not (0.0 < alpha_level < 1.0):
        raise InputError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    if sigma < 0:
        raise InputError(f"sigma must be non-negative, got {sigma}")
    half = stats.norm.ppf(1.0 - alpha_level / 2.0) * sigma / np.sqrt(n)
    return float(center - half), float(center + half)


def chi2_joint_test(
    coords,
    a_hat: np.ndarray,
    cov: np.ndarray,
    rows: np.ndarray,
    n: int,
    null_values=0.0,
) -> JointTest:
    """Chi-square test of ``a[coords] = null_values`` using the sandwich block.

    ``cov`` is the sandwich restricted to ``rows`` (as stored on the report);
    ``coords`` must be a subset of ``rows``.
    """
    coords = np.asarray(list(coords), dtype=int)
    if coords.size == 0:
        raise InputError("joint test needs at least one coordinate")
    if np.unique(coords).size != coords.size:
        raise InputError("joint test coordinates must be distinct")
    rows = np.asarray(rows, dtype=int)
    pos_of = {int(r): i for i, r in enumerate(rows)}
    try:
        pos = np.array([pos_of[int(c)] for c in coords])
    except KeyError as exc:
        raise ContractError(f"coordinate {exc} has no computed inference row") from exc

    h = coords.size
    null = np.broadcast_to(np.asarray(null_values, dtype=float), (h,)).copy()
    block = cov[np.ix_(pos, pos)]
    block = (block + block.T) / 2.0
    eigval, eigvec = np.linalg.eigh(block)
    floor = EIG_FLOOR_REL * max(float(np.trace(block)), 0.0) / h
    if eigval.min() <= floor:
        cond = float(eigval.max() / max(eigval.min(), np.finfo(float).tiny))
        raise SingularBlockError(
            f"joint-test block is numerically singular "
            f"(min eigenvalue {eigval.min():.3e}, condition number {cond:.3e})",
            cond=cond,
        )
    dev = np.sqrt(n) * (a_hat[coords] - null)
    stat = float(np.sum((eigvec.T @ dev) ** 2 / eigval))
    return JointTest(
        coords=coords,
        statistic=stat,
        dof=h,
        p_value=float(stats.chi2.sf(stat, h)),
        null_values=null,
    )


def bonferroni_family_test(z: np.ndarray, alpha_level: float,
                           n_tests: int | None = None) -> tuple[np.ndarray, float]:
    """Reject coordinate j iff ``|z_j|`` exceeds the Bonferroni normal quantile."""
    z = np.asarray(z, dtype=float)
    if not (0.0 < alpha_level < 1.0):
        raise InputError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    m = z.shape[0] if n_tests is None else int(n_tests)
    if m < 1:
        raise InputError("n_tests must be positive")
    threshold = float(stats.norm.ppf(1.0 - alpha_level / (2.0 * m)))
    with np.errstate(invalid="ignore"):
        reject = np.abs(z) > threshold
    return reject, threshold


def build_report(
    sample: Sample,
    fit: ThresholdFit,
    theta: PrecisionEstimate,
    alpha_level: float = 0.05,
    joint=None,
) -> InferenceReport:
    """Run the full debiased-inference pipeline for the rows carried by ``theta``.

    ``joint`` is an optional list of coordinate sets, each tested against zero
    with the chi-square statistic.  The Bonferroni family test over all 2p
    coordinates is run only when every row is available.
    """
    if not (0.0 < alpha_level < 1.0):
        raise InputError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    n = sample.n
    two_p = fit.alpha_hat.shape[0]
    rows = theta.rows_computed

    a_hat = debias(fit, theta, sample)
    sigma_xu = sigma_xu_matrix(sample, fit)
    t_rows = theta.theta[rows]
    cov = t_rows @ sigma_xu @ t_rows.T
    cov = (cov + cov.T) / 2.0

    var = np.clip(np.diag(cov), 0.0, None)
    sigma = np.sqrt(var)
    se = np.full(two_p, np.nan)
    se[rows] = sigma / np.sqrt(n)

    degenerate = np.zeros(two_p, dtype=bool)
    degenerate[rows] = sigma == 0.0

    z = np.full(two_p, np.nan)
    ci_lo = np.full(two_p, np.nan)
    ci_hi = np.full(two_p, np.nan)
    zq = stats.norm.ppf(1.0 - alpha_level / 2.0)
    for i, r in enumerate(rows):
        center = a_hat[r]
        if sigma[i] == 0.0:
            # Degenerate variance: point interval, flagged rather than NaN.
            ci_lo[r] = ci_hi[r] = center
            z[r] = 0.0 if center == 0.0 else np.inf * np.sign(center)
        else:
            half = zq * sigma[i] / np.sqrt(n)
            ci_lo[r] = center - half
            ci_hi[r] = center + half
            z[r] = np.sqrt(n) * center / sigma[i]

    reject = None
    bonf_threshold = None
    if rows.size == two_p:
        reject, bonf_threshold = bonferroni_family_test(z, alpha_level, n_tests=two_p)

    joint_tests = []
    if joint:
        for coords in joint:
            joint_tests.append(chi2_joint_test(coords, a_hat, cov, rows, n))

    design = build_design(sample, fit.tau_hat)
    resid = sample.y - design.xaug @ fit.alpha_hat

    return InferenceReport(
        tau_hat=fit.tau_hat,
        lam=fit.lam,
        alpha_level=alpha_level,
        coef=fit.alpha_hat.copy(),
        a_hat=a_hat,
        se=se,
        z=z,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        degenerate=degenerate,
        rows=rows.copy(),
        cov=cov,
        sigma_xu=sigma_xu,
        residuals=resid,
        reject_bonferroni=reject,
        bonferroni_threshold=bonf_threshold,
        joint_tests=joint_tests,
    )
