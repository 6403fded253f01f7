"""Kernel long-run covariances and the regime-shift variance sandwich."""

import numpy as np
import pytest

from threshlasso import (
    BandwidthError,
    ContractError,
    HacConfig,
    InputError,
    LongRunCov,
    auto_bandwidth,
    bartlett_weight,
    long_run_cov,
    psi_variance,
)


def ar1(n, rho, seed, burn=200):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + burn)
    x = np.zeros(n + burn)
    for t in range(1, n + burn):
        x[t] = rho * x[t - 1] + e[t]
    return x[burn:]


class TestKernelBasics:
    def test_bartlett_values(self):
        assert bartlett_weight(0, 1) == 1.0
        assert bartlett_weight(0, 7) == 1.0
        assert bartlett_weight(3, 4) == pytest.approx(0.25)
        assert bartlett_weight(1, 2) == pytest.approx(0.5)

    def test_bartlett_domain(self):
        with pytest.raises(ContractError, match="lag"):
            bartlett_weight(4, 4)
        with pytest.raises(ContractError, match="lag"):
            bartlett_weight(-1, 4)
        with pytest.raises(ContractError, match="k_n"):
            bartlett_weight(0, 0)

    def test_auto_bandwidth_values(self):
        assert auto_bandwidth(100) == 4
        assert auto_bandwidth(5000) == 9
        assert auto_bandwidth(1) == 1
        with pytest.raises(InputError):
            auto_bandwidth(0)

    def test_config_validation(self):
        with pytest.raises(InputError, match="bandwidth"):
            HacConfig(bandwidth=-1)
        with pytest.raises(InputError, match="kernel"):
            HacConfig(kernel="parzen")


class TestLongRunCov:
    def test_hand_enumerated_scalar_case(self):
        # n=5, k_n=2, worked out by hand from the lag-sum definition.
        lo = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
        hi = np.array([[2.0], [1.0], [0.0], [1.0], [3.0]])
        lrc = long_run_cov(lo, hi, HacConfig(bandwidth=2))
        assert lrc.k_n == 2
        assert lrc.omega[0, 0] == pytest.approx(21.0)        # 11 + 0.5*(10+10)
        assert lrc.omega_tilde[0, 0] == pytest.approx(4.25)  # 3 + 0.5*(1.25*2)
        assert lrc.omega_bar[0, 0] == pytest.approx(8.6)     # 4.6 + 0.5*(4+4)

    def test_bandwidth_one_is_lag_zero_only(self):
        rng = np.random.default_rng(0)
        lo = rng.standard_normal((60, 3))
        hi = rng.standard_normal((60, 3))
        lrc = long_run_cov(lo, hi, HacConfig(bandwidth=1))
        np.testing.assert_allclose(lrc.omega, lo.T @ lo / 60, atol=1e-12)
        np.testing.assert_allclose(lrc.omega_tilde, hi.T @ hi / 60, atol=1e-12)
        np.testing.assert_allclose(lrc.omega_bar, hi.T @ lo / 60, atol=1e-12)

    def test_auto_bandwidth_used_when_zero(self):
        rng = np.random.default_rng(1)
        lo = rng.standard_normal((400, 2))
        lrc = long_run_cov(lo, lo)
        assert lrc.k_n == auto_bandwidth(400)

    def test_iid_scores_match_sample_covariance(self):
        rng = np.random.default_rng(2)
        lo = rng.standard_normal((4000, 2))
        lrc = long_run_cov(lo, lo)
        target = lo.T @ lo / 4000
        assert np.max(np.abs(lrc.omega - target)) < 0.2

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_ar1_long_run_variance(self, seed):
        # AR(1) with rho=0.5 and unit innovations has long-run variance
        # 1/(1-rho)^2 = 4; the Bartlett estimate lands within 15% at n=5000.
        x = ar1(5000, 0.5, seed)[:, None]
        lrc = long_run_cov(x, x, HacConfig(bandwidth=20))
        assert lrc.omega[0, 0] == pytest.approx(4.0, rel=0.15)
        assert lrc.omega_tilde[0, 0] == pytest.approx(4.0, rel=0.15)

    def test_within_matrices_symmetric(self):
        rng = np.random.default_rng(3)
        lo = rng.standard_normal((300, 4))
        hi = rng.standard_normal((300, 4))
        lrc = long_run_cov(lo, hi, HacConfig(bandwidth=6))
        np.testing.assert_array_equal(lrc.omega, lrc.omega.T)
        np.testing.assert_array_equal(lrc.omega_tilde, lrc.omega_tilde.T)

    def test_near_positive_semidefinite(self):
        # Mildly dependent scores: eigenvalues may dip below zero only by the
        # small 1/(n-l) normalization excess.
        z = np.column_stack([ar1(800, 0.6, s) for s in (4, 5, 6)])
        lrc = long_run_cov(z, z, HacConfig(bandwidth=8))
        eigmin = np.linalg.eigvalsh(lrc.omega).min()
        assert eigmin > -1e-3 * np.trace(lrc.omega)

    def test_cross_orientation_upper_rows(self):
        # hi leads by construction: hi_t = lo_{t-1}, so the lag-1 cross term
        # dominates and the estimate is near 2 * w(1) * var(lo).
        rng = np.random.default_rng(7)
        base = rng.standard_normal(2001)
        lo = base[1:][:, None]
        hi = base[:-1][:, None]
        lrc = long_run_cov(lo, hi, HacConfig(bandwidth=2))
        assert lrc.omega_bar[0, 0] == pytest.approx(1.0, abs=0.1)

    def test_shape_and_bandwidth_errors(self):
        rng = np.random.default_rng(8)
        lo = rng.standard_normal((50, 2))
        with pytest.raises(InputError, match="shapes differ"):
            long_run_cov(lo, rng.standard_normal((50, 3)))
        with pytest.raises(InputError, match="2-dimensional"):
            long_run_cov(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)))
        with pytest.raises(BandwidthError, match="exceeds"):
            long_run_cov(lo, lo, HacConfig(bandwidth=51))


class TestPsiVariance:
    @staticmethod
    def _instance(m=3, n=400, seed=9):
        rng = np.random.default_rng(seed)
        lo = rng.standard_normal((n, m))
        hi = rng.standard_normal((n, m))
        lrc = long_run_cov(lo, hi, HacConfig(bandwidth=4))
        z_lo = rng.uniform(0.5, 2.0, m)
        z_hi = rng.uniform(0.5, 2.0, m)
        return lrc, z_lo, z_hi

    @staticmethod
    def _dense_block(lrc, z_lo, z_hi):
        d_lo, d_hi = 1.0 / z_lo, 1.0 / z_hi
        t_hh = d_hi[:, None] * lrc.omega_tilde * d_hi[None, :]
        t_ll = d_lo[:, None] * lrc.omega * d_lo[None, :]
        cross = d_hi[:, None] * lrc.omega_bar * d_lo[None, :]
        m = z_lo.size
        block = np.empty((2 * m, 2 * m))
        block[:m, :m] = t_hh
        block[:m, m:] = cross - t_hh
        block[m:, :m] = cross - t_hh
        block[m:, m:] = t_ll + t_hh - 2 * cross
        return block

    def test_matches_dense_assembly(self):
        lrc, z_lo, z_hi = self._instance()
        block = self._dense_block(lrc, z_lo, z_hi)
        rng = np.random.default_rng(10)
        for _ in range(10):
            g = rng.standard_normal(6)
            assert psi_variance(g, z_lo, z_hi, lrc) == pytest.approx(
                float(g @ block @ g), rel=1e-12
            )

    def test_unit_vectors_pick_diagonal(self):
        lrc, z_lo, z_hi = self._instance()
        block = self._dense_block(lrc, z_lo, z_hi)
        m = 3
        for j in range(m):
            e = np.zeros(2 * m)
            e[j] = 1.0
            assert psi_variance(e, z_lo, z_hi, lrc) == pytest.approx(
                lrc.omega_tilde[j, j] / z_hi[j] ** 2
            )
            assert psi_variance(e, z_lo, z_hi, lrc) == pytest.approx(
                block[j, j]
            )
            e2 = np.zeros(2 * m)
            e2[m + j] = 1.0
            assert psi_variance(e2, z_lo, z_hi, lrc) == pytest.approx(
                block[m + j, m + j]
            )

    def test_sum_contrast_recovers_lower_regime(self):
        # g selecting (upper_j + shift_j) targets the lower-regime coefficient,
        # whose variance only involves the lower-regime long-run matrix.
        lrc, z_lo, z_hi = self._instance()
        m = 3
        for j in range(m):
            g = np.zeros(2 * m)
            g[j] = 1.0
            g[m + j] = 1.0
            assert psi_variance(g, z_lo, z_hi, lrc) == pytest.approx(
                lrc.omega[j, j] / z_lo[j] ** 2, rel=1e-12
            )

    def test_identical_regimes_zero_shift_variance(self):
        # When both regimes share scores and noise levels, the shift block
        # collapses and shift contrasts carry zero variance.
        rng = np.random.default_rng(11)
        s = rng.standard_normal((200, 2))
        lrc = long_run_cov(s, s, HacConfig(bandwidth=3))
        z = np.array([1.3, 0.8])
        for j in range(2):
            g = np.zeros(4)
            g[2 + j] = 1.0
            assert psi_variance(g, z, z, lrc) == pytest.approx(0.0, abs=1e-12)

    def test_missing_noise_levels(self):
        lrc, z_lo, z_hi = self._instance()
        z_bad = z_lo.copy()
        z_bad[1] = np.nan
        g = np.zeros(6)
        g[4] = 1.0  # shift coordinate 1 needs z_lo[1]
        with pytest.raises(ContractError, match="noise levels"):
            psi_variance(g, z_bad, z_hi, lrc)
        # Off-support NaN is tolerated.
        g2 = np.zeros(6)
        g2[0] = 1.0
        psi_variance(g2, z_bad, z_hi, lrc)

    def test_shape_validation(self):
        lrc, z_lo, z_hi = self._instance()
        with pytest.raises(InputError, match="length"):
            psi_variance(np.zeros(5), z_lo, z_hi, lrc)
        with pytest.raises(InputError, match="equal length"):
            psi_variance(np.zeros(6), z_lo, z_hi[:2], lrc)
        small = LongRunCov(omega=np.eye(2), omega_tilde=np.eye(2),
                           omega_bar=np.zeros((2, 2)), k_n=1)
        with pytest.raises(InputError, match="long-run covariance"):
            psi_variance(np.zeros(6), z_lo, z_hi, small)
