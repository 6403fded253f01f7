"""Shared fixtures: small deterministic samples and fitted pipelines."""

import numpy as np
import pytest

from threshlasso import (
    LassoConfig,
    Sample,
    assemble_theta,
    make_grid,
    profile_fit,
)


def toy_sample(n=80, p=4, tau0=0.5, beta=None, delta=None, noise=0.1, seed=0,
               time_ordered=False):
    """Low-dimensional threshold sample with known truth."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    q = rng.uniform(size=n)
    if beta is None:
        beta = np.zeros(p)
        beta[0] = 1.5
    if delta is None:
        delta = np.zeros(p)
        delta[1] = 1.0
    u = noise * rng.standard_normal(n)
    y = x @ beta + (x @ delta) * (q < tau0) + u
    sample = Sample(y=y, x=x, q=q, time_ordered=time_ordered)
    return sample, np.asarray(beta, float), np.asarray(delta, float), tau0


@pytest.fixture(scope="session")
def fitted_toy():
    """One profiled fit plus assembled inverse, reused by read-only tests."""
    sample, beta, delta, tau0 = toy_sample(n=200, p=4, seed=3)
    grid = make_grid(sample, 0.15, 0.85, mode="quantile-count", count=36)
    fit = profile_fit(sample, grid, lam=0.05, cfg=LassoConfig())
    theta = assemble_theta(sample, fit.tau_hat, lambda_node=0.05)
    return sample, fit, theta, np.concatenate([beta, delta]), tau0


def dense_theta_oracle(sigma_hat):
    """Exact inverse of the augmented Gram, for nodewise comparisons."""
    return np.linalg.inv(sigma_hat)
