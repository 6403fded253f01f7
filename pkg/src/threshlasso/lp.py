"""Threshold local projections with debiased impulse responses.

Each horizon h regresses the h-step-ahead response on the contemporaneous
shock, optional own level and controls, and their lags, all interacted with the
threshold regime.  Only control coefficients are penalized; the shock
coefficients in both regimes stay unpenalized and are debiased through their
nodewise rows.  Confidence bands use the regime-shift sandwich with a Bartlett
long-run covariance, so serial dependence in the projection residuals is
covered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .design import RegimeGrid, Sample, build_design, make_grid
from .errors import InputError
from .hac import HacConfig, long_run_cov, psi_variance
from .inference import debias
from .nodewise import assemble_theta
from .search import ThresholdFit, profile_fit, refit_at
from .solver import LassoConfig, nodewise_lambda, select_lambda

__all__ = ["LpSpec", "IrfReport", "LpResult", "build_lp_design", "lp_fit"]


@dataclass(frozen=True)
class LpSpec:
    """Projection layout: horizons 0..h_max, K lags, and column roles.

    ``shock_index`` addresses the shock inside ``sample.x``; the remaining x
    columns are controls and enter both contemporaneously and lagged, in the
    order supplied by the caller (the engine does not reorder).  When
    ``include_response`` is set, the current response level joins the
    regressors at horizons h >= 1; it never enters at h = 0, where the target
    would coincide with it and the impact coefficient would be unidentified.
    """

    h_max: int
    lags: int = 4
    shock_index: int = 0
    include_intercept: bool = True
    include_response: bool = False

    def __post_init__(self):
        if self.h_max < 0:
            raise InputError(f"h_max must be >= 0, got {self.h_max}")
        if self.lags < 0:
            raise InputError(f"lags must be >= 0, got {self.lags}")
        if self.shock_index < 0:
            raise InputError(f"shock_index must be >= 0, got {self.shock_index}")


def build_lp_design(sample: Sample, spec: LpSpec, h: int):
    """Lagged design for horizon ``h``.

    Returns ``(target, x, q, shock_pos, names)`` where rows run over usable
    time points and ``shock_pos`` is the shock's column inside ``x``.
    """
    if not sample.time_ordered:
        raise InputError("local projections need a time-ordered sample")
    if spec.shock_index >= sample.p:
        raise InputError(
            f"shock_index {spec.shock_index} out of range for {sample.p} columns"
        )
    n, px = sample.n, sample.p
    k = spec.lags
    m = n - k - h
    guard = max(20, 4 * 2 + 4)
    if m < guard:
        raise InputError(
            f"only {m} usable observations after {k} lags at horizon {h}; need {guard}"
        )
    t = np.arange(k, n - h)

    cols = []
    names = []
    if spec.include_intercept:
        cols.append(np.ones(m))
        names.append("const")
    for j in range(px):
        cols.append(sample.x[t, j])
        names.append(f"x{j}")
    if spec.include_response and h >= 1:
        cols.append(sample.y[t])
        names.append("y_t")
    for lag in range(1, k + 1):
        cols.append(sample.y[t - lag])
        names.append(f"y_lag{lag}")
        for j in range(px):
            cols.append(sample.x[t - lag, j])
            names.append(f"x{j}_lag{lag}")

    x = np.column_stack(cols)
    target = sample.y[t + h]
    q = sample.q[t]
    shock_pos = (1 if spec.include_intercept else 0) + spec.shock_index
    return target, x, q, shock_pos, names


@dataclass(frozen=True)
class IrfReport:
    """Debiased impulse responses per horizon and regime with sandwich bands."""

    horizons: np.ndarray
    lower_est: np.ndarray
    lower_se: np.ndarray
    lower_ci_lo: np.ndarray
    lower_ci_hi: np.ndarray
    upper_est: np.ndarray
    upper_se: np.ndarray
    upper_ci_lo: np.ndarray
    upper_ci_hi: np.ndarray
    shift_est: np.ndarray
    shift_se: np.ndarray
    tau_hat: float
    lam: float
    bandwidths: np.ndarray
    alpha_level: float

    def to_rows(self) -> list[dict]:
        rows = []
        for i, h in enumerate(self.horizons):
            rows.append(
                {
                    "horizon": int(h),
                    "regime": "lower",
                    "estimate": float(self.lower_est[i]),
                    "se": float(self.lower_se[i]),
                    "ci_lo": float(self.lower_ci_lo[i]),
                    "ci_hi": float(self.lower_ci_hi[i]),
                }
            )
            rows.append(
                {
                    "horizon": int(h),
                    "regime": "upper",
                    "estimate": float(self.upper_est[i]),
                    "se": float(self.upper_se[i]),
                    "ci_lo": float(self.upper_ci_lo[i]),
                    "ci_hi": float(self.upper_ci_hi[i]),
                }
            )
        return rows


@dataclass(frozen=True)
class LpResult:
    irf: IrfReport
    tau_fit: ThresholdFit
    fits: list
    spec: LpSpec


def _wrap_fit(coef: np.ndarray, tau: float, lam: float, sol) -> ThresholdFit:
    return ThresholdFit(
        alpha_hat=coef,
        tau_hat=float(tau),
        lam=float(lam),
        profile=np.array([sol.objective]),
        candidates=np.array([tau]),
        argmin_set=np.array([0]),
        kkt_violations=np.array([sol.kkt_violation]),
        converged=np.array([sol.converged]),
        iterations=np.array([sol.iterations]),
    )


def lp_fit(
    sample: Sample,
    spec: LpSpec,
    grid: RegimeGrid | None = None,
    lam: float | None = None,
    lambda_node: float | None = None,
    cfg: LassoConfig | None = None,
    hac_cfg: HacConfig | None = None,
    alpha_level: float = 0.05,
    grid_lo: float = 0.15,
    grid_hi: float = 0.85,
    grid_count: int = 71,
) -> LpResult:
    """Estimate the threshold local projections for horizons 0..h_max.

    The cutoff is searched once on the horizon-0 design and reused at every
    later horizon; the penalty level is chosen there as well unless supplied.
    """
    cfg = cfg or LassoConfig()
    hac_cfg = hac_cfg or HacConfig()
    n_h = spec.h_max + 1

    target0, x0, q0, shock_pos, _ = build_lp_design(sample, spec, 0)
    s0 = Sample(y=target0, x=x0, q=q0, time_ordered=True)
    unpen0 = [shock_pos, s0.p + shock_pos]

    if grid is None:
        grid = make_grid(s0, grid_lo, grid_hi, mode="quantile-count", count=grid_count)
    if lam is None:
        mid = float(grid.candidates[len(grid) // 2])
        d_mid = build_design(s0, mid)
        w_mid = d_mid.weights.copy()
        w_mid[unpen0] = 0.0
        lam = select_lambda(d_mid.xaug, s0.y, rule="plugin", weights=w_mid, cfg=cfg)
    lam = float(lam)

    tau_fit = profile_fit(s0, grid, lam, cfg=cfg, unpenalized=unpen0)
    tau_hat = tau_fit.tau_hat

    zq = stats.norm.ppf(1.0 - alpha_level / 2.0)
    lower_est = np.empty(n_h)
    lower_se = np.empty(n_h)
    upper_est = np.empty(n_h)
    upper_se = np.empty(n_h)
    shift_est = np.empty(n_h)
    shift_se = np.empty(n_h)
    bandwidths = np.empty(n_h, dtype=int)
    fits = []

    for h in range(n_h):
        if h == 0:
            s_h, coef, sol = s0, tau_fit.alpha_hat, None
        else:
            target, x, q, _, _ = build_lp_design(sample, spec, h)
            s_h = Sample(y=target, x=x, q=q, time_ordered=True)
            sol = refit_at(
                s_h, tau_hat, lam, cfg=cfg, unpenalized=[shock_pos, s_h.p + shock_pos]
            )
            coef = sol.coef
        m, pcols = s_h.n, s_h.p
        unpen = [shock_pos, pcols + shock_pos]
        lam_node = lambda_node if lambda_node is not None else nodewise_lambda(m, pcols)

        theta = assemble_theta(s_h, tau_hat, lam_node, rows=unpen, cfg=cfg)
        if sol is None:
            fit_h = tau_fit
        else:
            fit_h = _wrap_fit(coef, tau_hat, lam, sol)
        a_hat = debias(fit_h, theta, s_h)
        fits.append(fit_h)

        resid = s_h.y - build_design(s_h, tau_hat).xaug @ coef
        fit_a = theta.fits_lower[shock_pos]
        fit_b = theta.fits_upper[shock_pos]
        others = np.arange(pcols) != shock_pos

        c_row_a = np.zeros(pcols)
        c_row_a[shock_pos] = 1.0
        c_row_a[others] = -fit_a.gamma
        mask_lo = (s_h.q < tau_hat).astype(float)
        v_lo = (s_h.x * mask_lo[:, None]) @ c_row_a

        c_row_b = np.zeros(pcols)
        c_row_b[shock_pos] = 1.0
        c_row_b[others] = -fit_b.gamma
        v_hi = (s_h.x * (1.0 - mask_lo)[:, None]) @ c_row_b

        cov = long_run_cov((v_lo * resid)[:, None], (v_hi * resid)[:, None], hac_cfg)
        z_lo = np.array([fit_a.z_sq])
        z_hi = np.array([fit_b.z_sq])

        psi_upper = psi_variance(np.array([1.0, 0.0]), z_lo, z_hi, cov)
        psi_lower = psi_variance(np.array([1.0, 1.0]), z_lo, z_hi, cov)
        psi_shift = psi_variance(np.array([0.0, 1.0]), z_lo, z_hi, cov)

        upper_est[h] = a_hat[shock_pos]
        shift_est[h] = a_hat[pcols + shock_pos]
        lower_est[h] = upper_est[h] + shift_est[h]
        upper_se[h] = np.sqrt(max(psi_upper, 0.0) / m)
        lower_se[h] = np.sqrt(max(psi_lower, 0.0) / m)
        shift_se[h] = np.sqrt(max(psi_shift, 0.0) / m)
        bandwidths[h] = cov.k_n

    irf = IrfReport(
        horizons=np.arange(n_h),
        lower_est=lower_est,
        lower_se=lower_se,
        lower_ci_lo=lower_est - zq * lower_se,
        lower_ci_hi=lower_est + zq * lower_se,
        upper_est=upper_est,
        upper_se=upper_se,
        upper_ci_lo=upper_est - zq * upper_se,
        upper_ci_hi=upper_est + zq * upper_se,
        shift_est=shift_est,
        shift_se=shift_se,
        tau_hat=tau_hat,
        lam=lam,
        bandwidths=bandwidths,
        alpha_level=alpha_level,
    )
    return LpResult(irf=irf, tau_fit=tau_fit, fits=fits, spec=spec)
