import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcwae.gaussians import (
    DiagonalGaussian,
    gaussian_log_prob,
    gaussian_sample,
    kl_diag_gaussian_to_standard,
    standard_prior,
)
from tcwae.numerics import logsumexp
from tcwae.rng import RngState


class TestLogsumexp:
    def test_two_equal_terms(self):
        assert logsumexp([0.0, 0.0]) == pytest.approx(np.log(2), abs=1e-12)

    def test_shift_invariance(self):
        assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000.0 + np.log(2), abs=1e-9)

    def test_matches_direct_summation(self):
        vals = [0.3, -1.2, 2.0]
        direct = np.log(np.sum(np.exp(vals)))
        assert logsumexp(vals) == pytest.approx(direct, abs=1e-12)

    def test_empty_reduction(self):
        with pytest.raises(ValueError, match="empty reduction"):
            logsumexp([])

    def test_handles_minus_inf(self):
        assert logsumexp([-np.inf, 0.0]) == pytest.approx(0.0, abs=1e-12)
        assert logsumexp([-np.inf, -np.inf]) == -np.inf

    def test_huge_magnitudes_do_not_overflow(self):
        assert np.isfinite(logsumexp([1e300, 1e300 - 1]))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, values):
        out = logsumexp(values)
        assert out >= max(values) - 1e-9
        assert out <= max(values) + np.log(len(values)) + 1e-9


class TestGaussianLogProb:
    def test_standard_at_zero(self):
        g = DiagonalGaussian(np.zeros(1), np.zeros(1))
        assert gaussian_log_prob(g, np.zeros(1)) == pytest.approx(-0.9189385332046727, abs=1e-6)

    def test_standard_at_one(self):
        g = DiagonalGaussian(np.zeros(1), np.zeros(1))
        assert gaussian_log_prob(g, np.ones(1)) == pytest.approx(-1.4189385332046727, abs=1e-6)

    def test_two_dims_sum(self):
        g = DiagonalGaussian(np.zeros(2), np.zeros(2))
        assert gaussian_log_prob(g, np.zeros(2)) == pytest.approx(-1.8378770664093453, abs=1e-6)

    def test_shape_mismatch(self):
        g = DiagonalGaussian(np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            gaussian_log_prob(g, np.zeros(3))

    def test_density_integrates_to_one(self):
        g = DiagonalGaussian(np.array([0.3]), np.array([np.log(0.7)]))
        grid = np.linspace(-8, 8, 20001)
        dens = np.array([np.exp(gaussian_log_prob(g, np.array([z]))) for z in grid[::10]])
        integral = np.trapezoid(dens, grid[::10])
        assert integral == pytest.approx(1.0, abs=1e-3)


class TestGaussianSample:
    def test_vanishing_sigma_clamps(self):
        g = DiagonalGaussian(np.array([1.5]), np.array([-60.0]))
        z = gaussian_sample(g, RngState(0, 1))
        assert abs(z[0] - 1.5) < 1e-6

    def test_deterministic_given_state(self):
        g = DiagonalGaussian(np.zeros(4), np.zeros(4))
        a = gaussian_sample(g, RngState(7, 3))
        b = gaussian_sample(g, RngState(7, 3))
        np.testing.assert_array_equal(a, b)

    def test_law_of_large_numbers(self):
        g = DiagonalGaussian(np.zeros(100_000), np.zeros(100_000))
        z = gaussian_sample(g, RngState(1, 2))
        assert abs(z.mean()) < 0.02
        assert abs(z.var() - 1.0) < 0.05


class TestKl:
    def test_zero_for_standard(self):
        assert kl_diag_gaussian_to_standard(standard_prior(3)) == 0.0

    def test_unit_mean_shift(self):
        g = DiagonalGaussian(np.array([1.0]), np.array([0.0]))
        assert kl_diag_gaussian_to_standard(g) == pytest.approx(0.5, abs=1e-12)

    def test_variance_four_matches_monte_carlo(self):
        g = DiagonalGaussian(np.array([0.0]), np.array([np.log(4.0)]))
        closed = kl_diag_gaussian_to_standard(g)
        assert closed == pytest.approx(0.8068528194400547, abs=1e-6)
        # independent Monte-Carlo oracle: E_q[log q - log p]
        rng = RngState(5, 1)
        z = 2.0 * rng.normal((1_000_000,))
        log_q = -0.5 * np.log(2 * np.pi * 4.0) - z ** 2 / 8.0
        log_p = -0.5 * np.log(2 * np.pi) - z ** 2 / 2.0
        assert closed == pytest.approx(np.mean(log_q - log_p), abs=5e-3)

    @given(
        st.lists(st.floats(-3, 3), min_size=1, max_size=6),
        st.lists(st.floats(-3, 3), min_size=1, max_size=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_nonnegative(self, means, log_vars):
        d = min(len(means), len(log_vars))
        g = DiagonalGaussian(np.array(means[:d]), np.array(log_vars[:d]))
        kl = kl_diag_gaussian_to_standard(g)
        assert kl >= -1e-12
        if kl < 1e-12:
            np.testing.assert_allclose(g.mean, 0.0, atol=1e-5)
            np.testing.assert_allclose(g.log_var, 0.0, atol=1e-5)


class TestDiagonalGaussian:
    def test_log_var_clamped(self):
        g = DiagonalGaussian(np.zeros(2), np.array([-60.0, 60.0]))
        np.testing.assert_array_equal(g.log_var, [-30.0, 30.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            DiagonalGaussian(np.zeros(2), np.zeros(3))

    def test_batch_indexing(self):
        g = DiagonalGaussian(np.arange(6.0).reshape(3, 2), np.zeros((3, 2)))
        assert len(g) == 3
        np.testing.assert_array_equal(g[1].mean, [2.0, 3.0])


class TestRngState:
    def test_same_key_same_sequence(self):
        a = RngState(42, 7).normal((16,))
        b = RngState(42, 7).normal((16,))
        np.testing.assert_array_equal(a, b)

    def test_streams_are_independent(self):
        a = RngState(42, 1).normal((16,))
        b = RngState(42, 2).normal((16,))
        assert not np.array_equal(a, b)

    def test_split(self):
        base = RngState(3, 0)
        np.testing.assert_array_equal(base.split(5).normal((4,)), RngState(3, 5).normal((4,)))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            RngState(-1)
