"""Coordinate-descent solver: correctness against independent minimizers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threshlasso import (
    InputError,
    LassoConfig,
    check_kkt,
    fit_weighted_lasso,
    nodewise_lambda,
    plugin_lambda,
    select_lambda,
    solve_gram,
)
from threshlasso.solver import NODEWISE_SCALE

cvxpy = pytest.importorskip("cvxpy")


def random_instance(seed, n=40, k=8, sparsity=3, noise=0.05):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, k))
    coef = np.zeros(k)
    coef[rng.choice(k, size=sparsity, replace=False)] = rng.uniform(0.5, 2.0, sparsity)
    y = a @ coef + noise * rng.standard_normal(n)
    return a, y, coef


def cvxpy_weighted_lasso(a, y, lam, weights):
    n, k = a.shape
    v = cvxpy.Variable(k)
    obj = cvxpy.sum_squares(y - a @ v) / n + lam * cvxpy.sum(
        cvxpy.multiply(weights, cvxpy.abs(v))
    )
    problem = cvxpy.Problem(cvxpy.Minimize(obj))
    problem.solve(solver=cvxpy.CLARABEL)
    return np.asarray(v.value).ravel(), float(problem.value)


class TestAgainstConvexSolver:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_matches_interior_point_minimizer(self, seed):
        a, y, _ = random_instance(seed)
        weights = np.sqrt(np.mean(a**2, axis=0))
        lam = 0.1
        sol = fit_weighted_lasso(a, y, lam, cfg=LassoConfig(tol=1e-10))
        ref_coef, ref_obj = cvxpy_weighted_lasso(a, y, lam, weights)
        assert sol.objective <= ref_obj + 1e-8
        np.testing.assert_allclose(sol.coef, ref_coef, atol=5e-6)

    def test_zero_lambda_equals_least_squares(self):
        a, y, _ = random_instance(7, n=60, k=5)
        sol = fit_weighted_lasso(a, y, 0.0, cfg=LassoConfig(tol=1e-12))
        ols, *_ = np.linalg.lstsq(a, y, rcond=None)
        np.testing.assert_allclose(sol.coef, ols, atol=1e-8)


class TestKktCertificate:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), lam=st.floats(0.001, 1.0))
    def test_converged_solutions_certify(self, seed, lam):
        a, y, _ = random_instance(seed, n=30, k=6)
        sol = fit_weighted_lasso(a, y, lam)
        assert sol.converged
        # Recomputing the violation from the raw design stays at certificate
        # scale: tolerance is relative to max(lam*w, 2|A'y/n|).
        weights = np.sqrt(np.mean(a**2, axis=0))
        scale = max(lam * weights.max(), 2 * np.max(np.abs(a.T @ y / a.shape[0])))
        assert check_kkt(sol, a, y) <= 1e-6 * scale

    def test_reported_violation_matches_recomputation(self):
        a, y, _ = random_instance(11)
        sol = fit_weighted_lasso(a, y, 0.05)
        assert check_kkt(sol, a, y) == pytest.approx(sol.kkt_violation, abs=1e-12)


class TestSolveGramMechanics:
    def test_gram_and_design_paths_agree(self):
        a, y, _ = random_instance(5)
        n = a.shape[0]
        g = a.T @ a / n
        c = a.T @ y / n
        w = np.sqrt(np.mean(a**2, axis=0))
        s1 = fit_weighted_lasso(a, y, 0.08)
        s2 = solve_gram(g, c, float(np.mean(y**2)), 0.08, w)
        np.testing.assert_allclose(s1.coef, s2.coef, atol=1e-12)
        assert s1.objective == pytest.approx(s2.objective, abs=1e-12)

    def test_pinned_coordinates_stay_zero(self):
        a, y, _ = random_instance(6)
        pinned = np.zeros(a.shape[1], dtype=bool)
        pinned[2] = True
        sol = fit_weighted_lasso(a, y, 0.01, pinned=pinned)
        assert sol.coef[2] == 0.0

    def test_zero_norm_column_auto_pinned(self):
        a, y, _ = random_instance(8)
        a = a.copy()
        a[:, 3] = 0.0
        sol = fit_weighted_lasso(a, y, 0.05)
        assert sol.coef[3] == 0.0
        assert sol.converged

    def test_standardize_toggle_same_answer(self):
        a, y, _ = random_instance(9)
        a = a * np.array([1.0, 10.0, 0.1, 1.0, 5.0, 1.0, 1.0, 2.0])
        s1 = fit_weighted_lasso(a, y, 0.05, cfg=LassoConfig(standardize=True, tol=1e-10))
        s2 = fit_weighted_lasso(a, y, 0.05, cfg=LassoConfig(standardize=False, tol=1e-10))
        np.testing.assert_allclose(s1.coef, s2.coef, atol=1e-6)

    def test_warm_start_reaches_same_fixpoint(self):
        a, y, _ = random_instance(10)
        cold = fit_weighted_lasso(a, y, 0.07)
        rng = np.random.default_rng(0)
        warm = fit_weighted_lasso(a, y, 0.07, x0=rng.standard_normal(a.shape[1]))
        np.testing.assert_allclose(cold.coef, warm.coef, atol=1e-7)

    def test_objective_trace_monotone(self):
        a, y, _ = random_instance(12)
        sol = fit_weighted_lasso(
            a, y, 0.05, cfg=LassoConfig(track_objective=True)
        )
        trace = sol.objective_trace
        assert trace is not None and trace.size >= 1
        assert np.all(np.diff(trace) <= 1e-12)

    def test_scale_equivariance(self):
        a, y, _ = random_instance(13)
        base = fit_weighted_lasso(a, y, 0.05, cfg=LassoConfig(tol=1e-11))
        scaled = fit_weighted_lasso(a, 3.0 * y, 0.15, cfg=LassoConfig(tol=1e-11))
        np.testing.assert_allclose(scaled.coef, 3.0 * base.coef, atol=1e-6)

    def test_shape_validation(self):
        a, y, _ = random_instance(14)
        with pytest.raises(InputError):
            fit_weighted_lasso(a, y[:-1], 0.1)
        with pytest.raises(InputError):
            fit_weighted_lasso(a, y, -0.1)
        with pytest.raises(InputError):
            fit_weighted_lasso(a, y, np.inf)

    def test_config_validation(self):
        with pytest.raises(InputError):
            LassoConfig(max_iter=0)
        with pytest.raises(InputError):
            LassoConfig(tol=0.0)
        with pytest.raises(InputError):
            LassoConfig(kkt_tol=-1.0)

    def test_n_active_counts_nonzeros(self):
        a, y, _ = random_instance(15)
        sol = fit_weighted_lasso(a, y, 0.05)
        assert sol.n_active == int(np.count_nonzero(sol.coef))


class TestPenaltyLevels:
    def test_plugin_lambda_formula(self):
        assert plugin_lambda(400, 600, 0.5) == pytest.approx(
            4 * 0.5 * math.sqrt(2 * math.log(600) / 400), rel=1e-12
        )

    def test_plugin_lambda_validation(self):
        with pytest.raises(InputError):
            plugin_lambda(0, 10, 1.0)
        with pytest.raises(InputError):
            plugin_lambda(10, 10, -1.0)

    def test_nodewise_lambda_default_scale(self):
        assert nodewise_lambda(400, 300) == pytest.approx(
            NODEWISE_SCALE * math.sqrt(math.log(300) / 400), rel=1e-12
        )

    def test_nodewise_lambda_bare_rate(self):
        assert nodewise_lambda(400, 300, scale=1.0) == pytest.approx(
            math.sqrt(math.log(300) / 400), rel=1e-12
        )

    def test_nodewise_lambda_validation(self):
        with pytest.raises(InputError):
            nodewise_lambda(0, 10)
        with pytest.raises(InputError):
            nodewise_lambda(10, 10, scale=-0.5)


class TestSelectLambda:
    def test_fixed_rule_passthrough(self):
        a, y, _ = random_instance(20)
        assert select_lambda(a, y, rule="fixed", value=0.33) == 0.33

    def test_fixed_rule_requires_value(self):
        a, y, _ = random_instance(20)
        with pytest.raises(InputError):
            select_lambda(a, y, rule="fixed")

    def test_unknown_rule_rejected(self):
        a, y, _ = random_instance(20)
        with pytest.raises(InputError, match="unknown lambda rule"):
            select_lambda(a, y, rule="magic")

    def test_path_rule_ladder(self):
        a, y, _ = random_instance(21)
        ladder = select_lambda(a, y, rule="path")
        assert ladder.shape == (100,)
        assert np.all(np.diff(ladder) < 0)
        # The top of the ladder kills every coefficient by construction.
        top = fit_weighted_lasso(a, y, float(ladder[0]))
        assert top.n_active == 0

    def test_plugin_sigma_iterates_to_noise_scale(self):
        # Strong sparse signal: the converged noise-scale estimate must land
        # near the true residual scale rather than at the pilot's level.
        rng = np.random.default_rng(42)
        n, k, sigma_true = 400, 20, 0.5
        a = rng.standard_normal((n, k))
        coef = np.zeros(k)
        coef[:3] = 3.0
        y = a @ coef + sigma_true * rng.standard_normal(n)
        lam, details = select_lambda(a, y, rule="plugin", return_details=True)
        assert details["rule"] == "plugin"
        assert len(details["fits"]) >= 2  # pilot plus at least one refit
        assert details["sigma"] == pytest.approx(sigma_true, rel=0.3)
        assert lam == pytest.approx(
            plugin_lambda(n, k, details["sigma"]), rel=1e-12
        )

    def test_plugin_zero_variance_falls_back(self):
        a = np.ones((20, 3))
        y = np.zeros(20)
        with pytest.warns(RuntimeWarning, match="noise scale"):
            lam = select_lambda(a, y, rule="plugin")
        assert lam == pytest.approx(math.sqrt(math.log(3) / 20))
