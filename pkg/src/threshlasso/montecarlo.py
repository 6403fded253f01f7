"""Simulation harness: regime-switching DGPs, replication runner, aggregation.

Generates samples with Toeplitz-correlated Gaussian covariates, a uniform
threshold variable (optionally Gaussian-copula-correlated with the second
covariate), and a sparse two-regime coefficient vector; runs the full
fit-then-debias pipeline per replication; and aggregates threshold error,
confidence-interval length/coverage, familywise error, power, pooled z-scores,
and remainder diagnostics.  Runs are deterministic given (seed, config),
whether replications execute serially or on a process pool.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, stats

from .design import (
    RegimeGrid,
    Sample,
    build_design,
    gram,
    min_regime_count,
)
from .errors import DegenerateGridError, EstimationError, InputError
from .inference import build_report
from .nodewise import assemble_theta, kkt_residual
from .search import profile_fit
from .solver import LassoConfig, nodewise_lambda, select_lambda

__all__ = [
    "McConfig",
    "McRecord",
    "McReport",
    "PRESETS",
    "gen_sample",
    "make_value_grid",
    "run_replication",
    "aggregate",
    "run_simulation",
    "write_outputs",
]


@dataclass(frozen=True)
class McConfig:
    """One simulation configuration.

    ``two_p`` is the total number of interacted coefficients (twice the number
    of covariate columns).  The first ``s0`` base coefficients equal ``b``; the
    regime shift puts ``b1`` on coordinates s0..2*s0-1.  ``rho_qx`` correlates
    the threshold variable's latent normal with the second covariate column.
    ``noise_var`` is the error variance.
    """

    n: int = 400
    two_p: int = 600
    s0: int = 15
    b: float = 1.0
    b1: float = 0.5
    rho_qx: float = 0.0
    tau0: float = 0.5
    n_reps: int = 20
    seed: int = 1
    alpha_level: float = 0.05
    noise_var: float = 0.25
    grid_lo: float = 0.15
    grid_hi: float = 0.85
    grid_step: float = 0.01

    def __post_init__(self):
        p = self.two_p // 2
        if self.two_p % 2 != 0 or self.two_p < 2:
            raise InputError(f"two_p must be a positive even count, got {self.two_p}")
        if not 0 < self.s0 <= p:
            raise InputError(f"s0 must be in 1..{p}, got {self.s0}")
        if 2 * self.s0 > p and self.b1 != 0.0:
            raise InputError(
                f"shift support needs 2*s0 <= p when b1 != 0; got s0={self.s0}, p={p}"
            )
        if not 0.0 < self.tau0 < 1.0:
            raise InputError(f"tau0 must be in (0, 1), got {self.tau0}")
        if self.n_reps < 1:
            raise InputError(f"n_reps must be >= 1, got {self.n_reps}")
        if not abs(self.rho_qx) < 1.0:
            raise InputError(f"rho_qx must be in (-1, 1), got {self.rho_qx}")
        if self.noise_var <= 0:
            raise InputError(f"noise_var must be positive, got {self.noise_var}")
        if self.n < 4:
            raise InputError(f"n must be at least 4, got {self.n}")

    @property
    def p(self) -> int:
        return self.two_p // 2

    def truth(self) -> tuple[np.ndarray, np.ndarray]:
        beta = np.zeros(self.p)
        beta[: self.s0] = self.b
        delta = np.zeros(self.p)
        if self.b1 != 0.0:
            delta[self.s0 : 2 * self.s0] = self.b1
        return beta, delta


# Table-style presets: (n, 2p, s0, b, b1, rho_qx) plus tau0 where it deviates.
_T1 = [
    (400, 600, 15, 1.0, 0.5, 0.0, 0.5),
    (400, 600, 15, 1.0, 0.0, 0.0, 0.5),
    (400, 600, 45, 1.0, 0.5, 0.0, 0.5),
    (400, 600, 45, 1.0, 0.0, 0.0, 0.5),
    (400, 600, 15, 0.5, 0.25, 0.0, 0.5),
    (400, 600, 15, 0.5, 0.0, 0.0, 0.5),
    (400, 600, 15, 1.0, 0.5, 0.5, 0.5),
    (400, 600, 15, 1.0, 0.0, 0.5, 0.5),
    (400, 600, 15, 1.0, 0.5, 0.0, 0.4),
    (400, 600, 15, 1.0, 0.0, 0.0, 0.4),
]
_T2 = [
    (400, 600, 15, 0.5, 0.25, 0.0, 0.5),
    (400, 600, 30, 0.5, 0.25, 0.0, 0.5),
    (400, 600, 15, 0.5, 0.1, 0.0, 0.5),
    (1000, 1200, 15, 0.5, 0.25, 0.0, 0.5),
    (1000, 1200, 30, 0.5, 0.25, 0.0, 0.5),
    (1000, 1200, 15, 0.5, 0.1, 0.0, 0.5),
]

PRESETS: dict[str, McConfig] = {}
for _i, (_n, _tp, _s0, _b, _b1, _rho, _tau) in enumerate(_T1, start=1):
    PRESETS[f"table1-row{_i}"] = McConfig(
        n=_n, two_p=_tp, s0=_s0, b=_b, b1=_b1, rho_qx=_rho, tau0=_tau
    )
for _i, (_n, _tp, _s0, _b, _b1, _rho, _tau) in enumerate(_T2, start=1):
    PRESETS[f"table2-row{_i}"] = McConfig(
        n=_n, two_p=_tp, s0=_s0, b=_b, b1=_b1, rho_qx=_rho, tau0=_tau
    )
PRESETS["smoke"] = McConfig(n=200, two_p=200, s0=8, b=1.0, b1=0.5, n_reps=10)


def gen_sample(cfg: McConfig, rep: int) -> tuple[Sample, np.ndarray, np.ndarray, float]:
    """Draw one replication's sample; deterministic in (cfg.seed, rep).

    Returns ``(sample, beta0, delta0, tau0)``.
    """
    p = cfg.p
    rng = np.random.default_rng([cfg.seed, rep])
    cov = 0.9 ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    chol = linalg.cholesky(cov, lower=True)
    x = rng.standard_normal((cfg.n, p)) @ chol.T
    eps = rng.standard_normal(cfg.n)
    u = rng.standard_normal(cfg.n) * np.sqrt(cfg.noise_var)

    if p >= 2 and cfg.rho_qx != 0.0:
        latent = cfg.rho_qx * x[:, 1] + np.sqrt(1.0 - cfg.rho_qx**2) * eps
    else:
        latent = eps
    q = stats.norm.cdf(latent)

    beta, delta = cfg.truth()
    y = x @ beta + (x @ delta) * (q < cfg.tau0) + u
    return Sample(y=y, x=x, q=q), beta, delta, cfg.tau0


def make_value_grid(sample: Sample, lo: float, hi: float, step: float) -> RegimeGrid:
    """Fixed-step cutoff grid on raw threshold values, regime-count filtered."""
    k_lo = int(round(lo / step))
    k_hi = int(round(hi / step))
    candidates = np.arange(k_lo, k_hi + 1) * step
    qs = np.sort(sample.q)
    m = min_regime_count(sample.n)
    n_below = np.searchsorted(qs, candidates, side="left")
    keep = (n_below >= m) & (sample.n - n_below >= m)
    candidates = candidates[keep]
    if candidates.size == 0:
        raise DegenerateGridError(
            f"no cutoff in [{lo}, {hi}] leaves {m} observations per regime"
        )
    return RegimeGrid(candidates=candidates, lo_quantile=lo, hi_quantile=hi)


@dataclass(frozen=True)
class McRecord:
    """Everything one replication contributes to the aggregates."""

    rep: int
    failed: bool = False
    fail_reason: str = ""
    tau_hat: float = np.nan
    tau_err: float = np.nan
    lam: float = np.nan
    hits: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    lengths: np.ndarray = field(default_factory=lambda: np.empty(0))
    z_centered: np.ndarray = field(default_factory=lambda: np.empty(0))
    reject: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    prediction_norm: float = np.nan
    delta_over_se: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_fits: int = 0
    n_nonconverged: int = 0
    max_kkt_converged: float = 0.0
    max_nodewise_gap: float = -np.inf
    max_theta_gap: float = -np.inf
    profile: np.ndarray = field(default_factory=lambda: np.empty(0))
    candidates: np.ndarray = field(default_factory=lambda: np.empty(0))


def run_replication(cfg: McConfig, rep: int, cfg_lasso: LassoConfig | None = None) -> McRecord:
    """Run the full pipeline on one generated sample and collect metrics."""
    cfg_lasso = cfg_lasso or LassoConfig()
    sample, beta, delta, tau0 = gen_sample(cfg, rep)
    alpha0 = np.concatenate([beta, delta])
    p, two_p = cfg.p, cfg.two_p

    try:
        grid = make_value_grid(sample, cfg.grid_lo, cfg.grid_hi, cfg.grid_step)
        mid = float(grid.candidates[len(grid) // 2])
        d_mid = build_design(sample, mid)
        lam = select_lambda(d_mid.xaug, sample.y, rule="plugin", cfg=cfg_lasso)
        fit = profile_fit(sample, grid, lam, cfg=cfg_lasso)

        lam_node = nodewise_lambda(sample.n, p)
        theta = assemble_theta(sample, fit.tau_hat, lam_node, rows="all", cfg=cfg_lasso)
        report = build_report(sample, fit, theta, alpha_level=cfg.alpha_level)
    except (EstimationError, DegenerateGridError) as exc:
        return McRecord(rep=rep, failed=True, fail_reason=f"{type(exc).__name__}: {exc}")

    n_fits = len(fit.converged) + len(theta.fits_lower) + len(theta.fits_upper)
    n_bad = int(np.sum(~fit.converged))
    kkts = [float(v) for v, ok in zip(fit.kkt_violations, fit.converged) if ok]
    gap = -np.inf
    for fits in (theta.fits_lower, theta.fits_upper):
        for nf in fits.values():
            if nf.converged:
                kkts.append(float(nf.kkt_violation))
            else:
                n_bad += 1
            gap = max(gap, float(nf.kkt_violation) - nf.kkt_bound)

    idx = int(np.searchsorted(fit.candidates, fit.tau_hat))
    fit_ok = bool(fit.converged[min(idx, len(fit.converged) - 1)])
    if not fit_ok:
        return McRecord(
            rep=rep,
            failed=True,
            fail_reason="solver did not converge at the selected cutoff",
            n_fits=n_fits,
            n_nonconverged=n_bad,
        )

    # report.se is on the estimate scale (sigma_j / sqrt(n)), so dividing the
    # centered estimate by it gives the asymptotically standard-normal score
    # sqrt(n) (a_j - alpha_0j) / sigma_j.
    se = report.se
    safe_se = np.where(se > 0, se, np.inf)
    z_centered = (report.a_hat - alpha0) / safe_se
    hits = (report.ci_lo <= alpha0) & (alpha0 <= report.ci_hi)
    lengths = report.ci_hi - report.ci_lo

    f0 = sample.x @ beta + (sample.x @ delta) * (sample.q < tau0)
    f_hat = build_design(sample, fit.tau_hat).xaug @ fit.alpha_hat
    prediction_norm = float(np.sqrt(np.mean((f_hat - f0) ** 2)))

    gram_pair = gram(sample, fit.tau_hat)
    # Certify the analytic row bound |theta_r Sigma - e_r|_inf <= kkt_bounds[r]
    # on this replication's assembled inverse.
    row_resid = kkt_residual(theta, gram_pair)
    theta_gap = float(np.nanmax(row_resid - theta.kkt_bounds))

    sigma_full = gram_pair.sigma_hat
    dev = fit.alpha_hat - alpha0
    delta_rem = np.sqrt(sample.n) * (theta.theta @ (sigma_full @ dev) - dev)
    # Normalize the remainder by sigma_j = sqrt(n) * se so the ratio is the
    # remainder's contribution to the standardized score.
    delta_over_se = np.abs(delta_rem) / (np.sqrt(sample.n) * safe_se)

    return McRecord(
        rep=rep,
        tau_hat=float(fit.tau_hat),
        tau_err=abs(float(fit.tau_hat) - tau0),
        lam=float(lam),
        hits=hits,
        lengths=lengths,
        z_centered=z_centered,
        reject=report.reject_bonferroni,
        prediction_norm=prediction_norm,
        delta_over_se=delta_over_se,
        n_fits=n_fits,
        n_nonconverged=n_bad,
        max_kkt_converged=float(max(kkts)) if kkts else 0.0,
        max_nodewise_gap=gap,
        max_theta_gap=theta_gap,
        profile=fit.profile,
        candidates=fit.candidates,
    )


@dataclass(frozen=True)
class McReport:
    """Aggregated simulation metrics in the layout of the result tables."""

    config: McConfig
    n_success: int
    n_excluded: int
    mean_abs_tau_err: float | None
    ell: float
    ell_s: float
    ell_sc: float
    cov: float
    cov_s: float
    cov_sc: float
    fwer: float
    power: float
    z_pool: np.ndarray
    prediction_norm: list[float]
    delta_over_se_mean: float
    total_fits: int
    total_nonconverged: int
    max_kkt_converged: float
    max_nodewise_gap: float
    max_theta_gap: float
    fail_reasons: list[str]

    def to_json_dict(self) -> dict:
        out = {
            "config": asdict(self.config),
            "n_success": self.n_success,
            "n_excluded": self.n_excluded,
            "mean_abs_tau_err": self.mean_abs_tau_err,
            "ell": self.ell,
            "ell_s": self.ell_s,
            "ell_sc": self.ell_sc,
            "cov": self.cov,
            "cov_s": self.cov_s,
            "cov_sc": self.cov_sc,
            "fwer": self.fwer,
            "power": self.power,
            "z_pool": [float(v) for v in self.z_pool],
            "prediction_norm": self.prediction_norm,
            "delta_over_se_mean": self.delta_over_se_mean,
            "total_fits": self.total_fits,
            "total_nonconverged": self.total_nonconverged,
            "max_kkt_converged": self.max_kkt_converged,
            "max_nodewise_gap": self.max_nodewise_gap,
            "max_theta_gap": self.max_theta_gap,
            "fail_reasons": self.fail_reasons,
        }
        return out


def aggregate(records: list[McRecord], cfg: McConfig) -> McReport:
    """Reduce per-replication records to the reported table metrics.

    Interval metrics run over the base-coefficient block only; the familywise
    error and power run over the full two-regime family of zero nulls.  The
    pooled z-scores keep only the zero coefficients — the coordinates whose
    truth-centered scores target the standard normal without a bias term.
    """
    records = sorted(records, key=lambda r: r.rep)
    good = [r for r in records if not r.failed]
    if not good:
        raise EstimationError("all replications failed; nothing to aggregate")
    p, s0 = cfg.p, cfg.s0
    beta, delta = cfg.truth()
    alpha0 = np.concatenate([beta, delta])
    null_mask = alpha0 == 0.0

    hits = np.stack([r.hits for r in good])
    lengths = np.stack([r.lengths for r in good])
    rejects = np.stack([r.reject for r in good])

    cov_coord = hits.mean(axis=0)
    len_coord = lengths.mean(axis=0)
    act = slice(0, s0)
    inact = slice(s0, p)

    fwer = float(np.mean(rejects[:, null_mask].any(axis=1)))
    power = float(np.mean(rejects[:, act])) if s0 > 0 else 0.0

    tau_err = None
    if cfg.b1 != 0.0:
        tau_err = float(np.mean([r.tau_err for r in good]))

    return McReport(
        config=cfg,
        n_success=len(good),
        n_excluded=len(records) - len(good),
        mean_abs_tau_err=tau_err,
        ell=float(len_coord[:p].mean()),
        ell_s=float(len_coord[act].mean()),
        ell_sc=float(len_coord[inact].mean()),
        cov=float(cov_coord[:p].mean()),
        cov_s=float(cov_coord[act].mean()),
        cov_sc=float(cov_coord[inact].mean()),
        fwer=fwer,
        power=power,
        z_pool=np.concatenate([r.z_centered[null_mask] for r in good]),
        prediction_norm=[r.prediction_norm for r in good],
        delta_over_se_mean=float(np.mean([r.delta_over_se.mean() for r in good])),
        total_fits=int(sum(r.n_fits for r in records)),
        total_nonconverged=int(sum(r.n_nonconverged for r in records)),
        max_kkt_converged=float(max((r.max_kkt_converged for r in good), default=0.0)),
        max_nodewise_gap=float(max((r.max_nodewise_gap for r in good), default=-np.inf)),
        max_theta_gap=float(max((r.max_theta_gap for r in good), default=-np.inf)),
        fail_reasons=[r.fail_reason for r in records if r.failed],
    )


def _run_one(args) -> McRecord:
    cfg, rep = args
    return run_replication(cfg, rep)


def run_simulation(
    cfg: McConfig,
    threads: int = 1,
    keep_records: bool = True,
) -> tuple[McReport, list[McRecord]]:
    """Run all replications (serially or on a process pool) and aggregate.

    The result is identical for any ``threads`` value because every
    replication seeds its own generator from (seed, rep).
    """
    reps = range(cfg.n_reps)
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_one, [(cfg, r) for r in reps]))
    else:
        records = [run_replication(cfg, r) for r in reps]
    report = aggregate(records, cfg)
    return report, records if keep_records else []


def write_outputs(
    report: McReport,
    records: list[McRecord],
    out_dir,
    dump_profiles: bool = False,
) -> list[str]:
    """Write ``mc_report.json``, ``zscores.csv``, ``ci_lengths.csv`` (and
    optional per-replication profile dumps) into ``out_dir``; returns paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "mc_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)

    path = os.path.join(out_dir, "zscores.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rep,coord,z\n")
        for rec in records:
            if rec.failed:
                continue
            for j, z in enumerate(rec.z_centered):
                fh.write(f"{rec.rep},{j},{float(z)!r}\n")
    paths.append(path)

    path = os.path.join(out_dir, "ci_lengths.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("coord,mean_length,coverage\n")
        good = [r for r in records if not r.failed]
        if good:
            lengths = np.stack([r.lengths for r in good]).mean(axis=0)
            hits = np.stack([r.hits for r in good]).mean(axis=0)
            for j in range(lengths.size):
                fh.write(f"{j},{float(lengths[j])!r},{float(hits[j])!r}\n")
    paths.append(path)

    if dump_profiles:
        for rec in records:
            if rec.failed or rec.profile.size == 0:
                continue
            path = os.path.join(out_dir, f"profile_{rec.rep}.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("tau,objective\n")
                for t, v in zip(rec.candidates, rec.profile):
                    fh.write(f"{float(t)!r},{float(v)!r}\n")
            paths.append(path)
    return paths
