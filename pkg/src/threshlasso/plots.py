"""Figure rendering for the command-line report paths.

All functions draw to files through the non-interactive Agg backend and return
the written path, so they are safe in headless environments.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

__all__ = ["profile_plot", "ci_plot", "qq_plot", "irf_plot"]


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def profile_plot(candidates, profile, tau_hat: float, path: str) -> str:
    """Penalized objective across candidate cutoffs with the pick marked."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(candidates, profile, lw=1.2, color="#1f77b4")
    ax.axvline(tau_hat, color="#d62728", ls="--", lw=1.0, label=f"cutoff = {tau_hat:g}")
    ax.set_xlabel("candidate cutoff")
    ax.set_ylabel("penalized objective")
    ax.legend(loc="best")
    return _save(fig, path)


def ci_plot(
    centers,
    lo,
    hi,
    path: str,
    truth=None,
    max_coords: int = 200,
) -> str:
    """Per-coordinate confidence intervals, optionally against true values."""
    centers = np.asarray(centers, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m = min(centers.size, max_coords)
    idx = np.arange(m)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.vlines(idx, lo[:m], hi[:m], color="#1f77b4", lw=1.0, alpha=0.7)
    ax.plot(idx, centers[:m], ".", ms=3, color="#1f77b4", label="debiased estimate")
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        ax.plot(idx, truth[:m], "x", ms=4, color="#d62728", label="true value")
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.set_xlabel("coordinate")
    ax.set_ylabel("interval")
    ax.legend(loc="best")
    return _save(fig, path)


def qq_plot(z_scores, path: str) -> str:
    """Sample quantiles of pooled z-scores against standard normal quantiles."""
    z = np.sort(np.asarray(z_scores, dtype=float))
    n = z.size
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = stats.norm.ppf(probs)
    slope, intercept = np.polyfit(theo, z, 1)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(theo, z, ".", ms=2, color="#1f77b4")
    lim = [min(theo[0], z[0]), max(theo[-1], z[-1])]
    ax.plot(lim, lim, color="#d62728", lw=1.0, label="slope 1")
    ax.set_xlabel("normal quantiles")
    ax.set_ylabel("sample quantiles")
    ax.set_title(f"slope {slope:.3f}, intercept {intercept:.3f}")
    ax.legend(loc="best")
    return _save(fig, path)


def irf_plot(irf, path: str) -> str:
    """Lower/upper-regime impulse responses with confidence bands."""
    h = np.asarray(irf.horizons)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, name, est, lo, hi in (
        (axes[0], "lower regime", irf.lower_est, irf.lower_ci_lo, irf.lower_ci_hi),
        (axes[1], "upper regime", irf.upper_est, irf.upper_ci_lo, irf.upper_ci_hi),
    ):
        ax.fill_between(h, lo, hi, alpha=0.25, color="#1f77b4")
        ax.plot(h, est, "-o", ms=3, color="#1f77b4")
        ax.axhline(0.0, color="gray", lw=0.6)
        ax.set_xlabel("horizon")
        ax.set_title(name)
    axes[0].set_ylabel("response")
    return _save(fig, path)
