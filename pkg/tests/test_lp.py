"""Local projections: lagged designs, shared cutoff, debiased responses."""

import numpy as np
import pytest

from threshlasso import (
    HacConfig,
    InputError,
    LpSpec,
    RegimeGrid,
    Sample,
    build_lp_design,
    lp_fit,
)


def shock_system(n, rho=0.5, b=1.0, noise=0.5, seed=0, burn=100):
    """y_t = rho*y_{t-1} + b*s_t + e_t with an exogenous shock s_t.

    The response to a unit shock at horizon h is b*rho^h once lagged y is
    controlled for, identically in both regimes (q is independent noise).
    """
    rng = np.random.default_rng(seed)
    total = n + burn
    s = rng.standard_normal(total)
    e = noise * rng.standard_normal(total)
    y = np.zeros(total)
    for t in range(1, total):
        y[t] = rho * y[t - 1] + b * s[t] + e[t]
    q = rng.uniform(size=total)
    return Sample(y=y[burn:], x=s[burn:][:, None], q=q[burn:],
                  time_ordered=True)


class TestLpSpec:
    def test_validation(self):
        with pytest.raises(InputError, match="h_max"):
            LpSpec(h_max=-1)
        with pytest.raises(InputError, match="lags"):
            LpSpec(h_max=2, lags=-1)
        with pytest.raises(InputError, match="shock_index"):
            LpSpec(h_max=2, shock_index=-1)


class TestBuildLpDesign:
    @staticmethod
    def _deterministic_sample(n=30, p=2):
        t = np.arange(n, dtype=float)
        x = 100.0 * t[:, None] + np.arange(p)[None, :]
        return Sample(y=t.copy(), x=x, q=(t + 1) / (n + 1), time_ordered=True)

    def test_layout_hand_verified(self):
        sample = self._deterministic_sample()
        spec = LpSpec(h_max=1, lags=2, shock_index=1, include_intercept=True,
                      include_response=True)
        target, x, q, shock_pos, names = build_lp_design(sample, spec, 1)
        t = np.arange(2, 29)
        assert x.shape == (27, 10)
        assert names == [
            "const", "x0", "x1", "y_t",
            "y_lag1", "x0_lag1", "x1_lag1",
            "y_lag2", "x0_lag2", "x1_lag2",
        ]
        assert shock_pos == 2
        np.testing.assert_array_equal(target, sample.y[t + 1])
        np.testing.assert_array_equal(q, sample.q[t])
        np.testing.assert_array_equal(x[:, 0], 1.0)
        np.testing.assert_array_equal(x[:, 1], sample.x[t, 0])
        np.testing.assert_array_equal(x[:, 2], sample.x[t, 1])
        np.testing.assert_array_equal(x[:, 3], sample.y[t])
        np.testing.assert_array_equal(x[:, 4], sample.y[t - 1])
        np.testing.assert_array_equal(x[:, 6], sample.x[t - 1, 1])
        np.testing.assert_array_equal(x[:, 7], sample.y[t - 2])
        np.testing.assert_array_equal(x[:, 9], sample.x[t - 2, 1])

    def test_response_level_absent_at_impact(self):
        sample = self._deterministic_sample()
        spec = LpSpec(h_max=1, lags=2, include_response=True)
        *_, names0 = build_lp_design(sample, spec, 0)
        assert "y_t" not in names0
        *_, names1 = build_lp_design(sample, spec, 1)
        assert "y_t" in names1

    def test_no_intercept_shifts_shock_position(self):
        sample = self._deterministic_sample()
        spec = LpSpec(h_max=0, lags=1, shock_index=1, include_intercept=False)
        _, x, _, shock_pos, names = build_lp_design(sample, spec, 0)
        assert shock_pos == 1
        assert names[0] == "x0"
        np.testing.assert_array_equal(x[:, shock_pos],
                                      sample.x[1:, 1])

    def test_insufficient_usable_rows(self):
        sample = self._deterministic_sample(n=24)
        with pytest.raises(InputError, match="usable observations"):
            build_lp_design(sample, LpSpec(h_max=1, lags=4), 1)

    def test_requires_time_order(self):
        sample = self._deterministic_sample()
        plain = Sample(y=sample.y, x=sample.x, q=sample.q, time_ordered=False)
        with pytest.raises(InputError, match="time-ordered"):
            build_lp_design(plain, LpSpec(h_max=1), 0)

    def test_shock_index_out_of_range(self):
        sample = self._deterministic_sample(p=2)
        with pytest.raises(InputError, match="shock_index"):
            build_lp_design(sample, LpSpec(h_max=1, shock_index=2), 0)


class TestLpFit:
    def test_zero_penalty_equals_regime_split_ols(self):
        # With no lags and no penalty the projection at a fixed cutoff is
        # plain OLS, and full regime interaction makes the augmented OLS
        # coincide with separate per-regime regressions.
        rng = np.random.default_rng(1)
        n = 150
        s = rng.standard_normal(n)
        c = rng.standard_normal(n)
        q = rng.uniform(size=n)
        slope = np.where(q < 0.5, 2.0, 1.0)
        y = 0.3 + slope * s + 0.5 * c + 0.1 * rng.standard_normal(n)
        sample = Sample(y=y, x=np.column_stack([s, c]), q=q, time_ordered=True)
        spec = LpSpec(h_max=1, lags=0, shock_index=0)
        grid = RegimeGrid(candidates=np.array([0.5]), lo_quantile=0.15,
                          hi_quantile=0.85)
        res = lp_fit(sample, spec, grid=grid, lam=0.0)
        assert res.irf.tau_hat == 0.5

        for h in range(2):
            target, x, qh, shock_pos, _ = build_lp_design(sample, spec, h)
            lo = qh < 0.5
            beta_lo = np.linalg.lstsq(x[lo], target[lo], rcond=None)[0]
            beta_hi = np.linalg.lstsq(x[~lo], target[~lo], rcond=None)[0]
            assert res.irf.lower_est[h] == pytest.approx(
                beta_lo[shock_pos], abs=1e-5
            )
            assert res.irf.upper_est[h] == pytest.approx(
                beta_hi[shock_pos], abs=1e-5
            )
        assert res.irf.lower_est[0] == pytest.approx(2.0, abs=0.1)
        assert res.irf.upper_est[0] == pytest.approx(1.0, abs=0.1)

    def test_recovers_autoregressive_impulse_response(self):
        # Truth: response b*rho^h at every horizon, no regime difference.
        # A single draw suffers post-selection noise in the regime split, so
        # the check averages four independent systems and compares against
        # the combined standard error.
        rho, b = 0.5, 1.0
        seeds = (2, 3, 4, 5)
        ests, ses = [], []
        for seed in seeds:
            sample = shock_system(600, rho=rho, b=b, seed=seed)
            irf = lp_fit(sample, LpSpec(h_max=3, lags=2), grid_count=36).irf
            ests.append([irf.upper_est, irf.lower_est, irf.shift_est])
            ses.append([irf.upper_se, irf.lower_se, irf.shift_se])
        est = np.array(ests)    # (seed, series, horizon)
        se = np.array(ses)
        mean = est.mean(axis=0)
        comb = np.sqrt((se**2).mean(axis=0) / len(seeds))
        truth = np.array([b * rho**h for h in range(4)])
        for series, target in ((0, truth), (1, truth), (2, np.zeros(4))):
            z = (mean[series] - target) / comb[series]
            assert np.max(np.abs(z)) < 3.5
        # The averaged impact response decays geometrically.
        assert mean[0, 0] > mean[0, 1] > mean[0, 2]
        assert mean[0, 0] == pytest.approx(1.0, abs=0.15)

    def test_cutoff_and_penalty_shared_across_horizons(self):
        sample = shock_system(300, seed=3)
        res = lp_fit(sample, LpSpec(h_max=2, lags=1), grid_count=11)
        assert len(res.fits) == 3
        assert res.fits[0] is res.tau_fit
        for f in res.fits:
            assert f.tau_hat == res.irf.tau_hat
            assert f.lam == res.irf.lam

    def test_report_internal_consistency(self):
        from scipy import stats

        sample = shock_system(300, seed=4)
        res = lp_fit(sample, LpSpec(h_max=2, lags=1), grid_count=11,
                     alpha_level=0.10)
        irf = res.irf
        zq = stats.norm.ppf(0.95)
        np.testing.assert_allclose(irf.lower_ci_lo,
                                   irf.lower_est - zq * irf.lower_se,
                                   atol=1e-12)
        np.testing.assert_allclose(irf.upper_ci_hi,
                                   irf.upper_est + zq * irf.upper_se,
                                   atol=1e-12)
        np.testing.assert_allclose(irf.lower_est,
                                   irf.upper_est + irf.shift_est, atol=1e-12)
        assert np.all(irf.lower_se >= 0) and np.all(irf.upper_se >= 0)
        assert np.all(irf.bandwidths >= 1)

    def test_explicit_bandwidth_respected(self):
        sample = shock_system(300, seed=5)
        res = lp_fit(sample, LpSpec(h_max=1, lags=1), grid_count=11,
                     hac_cfg=HacConfig(bandwidth=3))
        assert np.all(res.irf.bandwidths == 3)

    def test_to_rows_schema(self):
        sample = shock_system(300, seed=6)
        res = lp_fit(sample, LpSpec(h_max=2, lags=1), grid_count=11)
        rows = res.irf.to_rows()
        assert len(rows) == 6
        assert [r["regime"] for r in rows[:2]] == ["lower", "upper"]
        assert [r["horizon"] for r in rows] == [0, 0, 1, 1, 2, 2]
        for r in rows:
            assert set(r) == {"horizon", "regime", "estimate", "se",
                              "ci_lo", "ci_hi"}
            assert r["ci_lo"] <= r["estimate"] <= r["ci_hi"]
