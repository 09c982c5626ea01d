"""Smoother checks against a dense-matrix oracle, plus GCV and robustness."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gestkin.dynamics import Trajectory, analytic_step_response
from gestkin.smoothing import (
    GCV_GRID,
    gcv_curve,
    gcv_select,
    robust_smooth,
    smooth,
    velocity,
)


def dense_fit(y, s):
    """Reference solve of (I + s*D2'D2) x = y with an explicit matrix."""
    n = len(y)
    d2 = np.zeros((n - 2, n))
    for r in range(n - 2):
        d2[r, r : r + 3] = (1.0, -2.0, 1.0)
    return np.linalg.solve(np.eye(n) + s * d2.T @ d2, y)


def dense_gcv(y, grid):
    """GCV scores from the explicit hat matrix (trace included)."""
    n = len(y)
    d2 = np.zeros((n - 2, n))
    for r in range(n - 2):
        d2[r, r : r + 3] = (1.0, -2.0, 1.0)
    pen = d2.T @ d2
    out = []
    for s in grid:
        hat = np.linalg.inv(np.eye(n) + s * pen)
        x = hat @ y
        rss = float(np.sum((y - x) ** 2))
        out.append((rss / n) / (1.0 - np.trace(hat) / n) ** 2)
    return np.array(out)


class TestSmooth:
    def test_zero_penalty_is_identity(self):
        y = np.random.default_rng(0).normal(size=40)
        assert np.max(np.abs(smooth(y, 0.0) - y)) < 1e-9

    def test_constant_is_fixed_point(self):
        y = np.full(50, 7.25)
        for s in (0.01, 1.0, 1e6):
            assert np.max(np.abs(smooth(y, s) - y)) < 1e-9

    def test_line_is_fixed_point_and_matches_dense_solve(self):
        t = np.arange(32, dtype=float)
        line = 0.7 * t - 3.0
        for s in (0.01, 1.0, 1e6):
            x = smooth(line, s)
            assert np.max(np.abs(x - line)) < 1e-6
            assert np.max(np.abs(x - dense_fit(line, s))) < 1e-8

    def test_matches_dense_solve_on_rough_signal(self):
        rng = np.random.default_rng(7)
        y = np.cumsum(rng.normal(size=64))
        for s in (0.1, 3.0, 500.0):
            assert np.max(np.abs(smooth(y, s) - dense_fit(y, s))) < 1e-8

    def test_linearity(self):
        rng = np.random.default_rng(11)
        y1, y2 = rng.normal(size=48), rng.normal(size=48)
        lhs = smooth(2.5 * y1 - 0.75 * y2, 12.0)
        rhs = 2.5 * smooth(y1, 12.0) - 0.75 * smooth(y2, 12.0)
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_repeated_smoothing_contracts(self):
        rng = np.random.default_rng(5)
        y = rng.normal(size=50)
        for s in (0.5, 10.0, 1e4):
            once = smooth(y, s)
            twice = smooth(once, s)
            assert np.linalg.norm(twice - once) < np.linalg.norm(once - y)

    def test_rejects_negative_penalty(self):
        with pytest.raises(ValueError):
            smooth(np.zeros(10), -1.0)

    def test_rejects_non_finite_input(self):
        y = np.zeros(10)
        y[4] = np.nan
        with pytest.raises(ValueError):
            smooth(y, 1.0)

    @settings(max_examples=40)
    @given(
        slope=st.floats(-5.0, 5.0),
        intercept=st.floats(-20.0, 20.0),
        s=st.floats(1e-3, 1e5),
    )
    def test_every_line_is_a_fixed_point(self, slope, intercept, s):
        line = slope * np.arange(40, dtype=float) + intercept
        scale = max(1.0, float(np.max(np.abs(line))))
        assert np.max(np.abs(smooth(line, s) - line)) < 1e-6 * scale


class TestGcvSelection:
    def test_curve_matches_dense_hat_matrix(self):
        rng = np.random.default_rng(42)
        y = np.sin(np.linspace(0.0, 3 * math.pi, 64)) + rng.normal(0.0, 0.2, 64)
        mine = gcv_curve(y)
        oracle = dense_gcv(y, GCV_GRID)
        assert np.max(np.abs(mine - oracle) / oracle) < 1e-9

    def test_pure_noise_selects_heaviest_smoothing(self):
        for seed in (0, 1, 2):
            y = 5.0 + np.random.default_rng(seed).normal(0.0, 1.0, 128)
            assert gcv_select(y) == GCV_GRID[-1]

    def test_noiseless_sine_selects_lightest_smoothing(self):
        y = np.sin(np.linspace(0.0, 3 * math.pi, 128))
        assert gcv_select(y) <= GCV_GRID[1]

    def test_smoothing_beats_raw_noise_over_many_seeds(self):
        t = np.linspace(0.0, 3 * math.pi, 128)
        clean = np.sin(t)
        for seed in range(100):
            noisy = clean + np.random.default_rng(seed).normal(0.0, 0.2, len(clean))
            fitted = smooth(noisy, gcv_select(noisy))
            rmse_fit = np.sqrt(np.mean((fitted - clean) ** 2))
            rmse_raw = np.sqrt(np.mean((noisy - clean) ** 2))
            assert rmse_fit < 0.7 * rmse_raw

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            gcv_select(np.zeros(16), grid=[])


class TestRobustSmooth:
    def test_clean_signal_stays_close_to_plain_gcv_smooth(self):
        # bisquare gives inliers weight ~0.91, not 1, so the refit shifts a
        # little even with no outliers; the shift stays well under the noise sd
        rng = np.random.default_rng(9)
        y = np.sin(np.linspace(0.0, 2 * math.pi, 96)) + rng.normal(0.0, 0.05, 96)
        plain = smooth(y, gcv_select(y))
        assert np.max(np.abs(robust_smooth(y) - plain)) < 0.02

    def test_zero_residual_signal_matches_plain_smooth_exactly(self):
        line = 0.3 * np.arange(96, dtype=float) - 2.0
        plain = smooth(line, gcv_select(line))
        assert np.max(np.abs(robust_smooth(line) - plain)) < 1e-9

    def test_recovers_from_single_spike(self):
        sd = 0.1
        t = np.linspace(0.0, 3 * math.pi, 128)
        clean = np.sin(t)
        rng = np.random.default_rng(3)
        y = clean + rng.normal(0.0, sd, len(clean))
        y[64] += 20 * sd
        robust = robust_smooth(y)
        plain = smooth(y, gcv_select(y))
        dev_robust = abs(robust[64] - clean[64])
        dev_plain = abs(plain[64] - clean[64])
        assert dev_robust < 3 * sd
        assert dev_plain > dev_robust

    def test_constant_unchanged(self):
        y = np.full(64, -4.0)
        assert np.max(np.abs(robust_smooth(y) - y)) < 1e-9


class TestVelocity:
    def test_constant_gives_zero(self):
        traj = Trajectory("LA", 200.0, np.full(30, 2.0))
        assert np.max(np.abs(velocity(traj))) == 0.0

    def test_unit_ramp_gives_sample_rate(self):
        traj = Trajectory("LA", 200.0, np.arange(30, dtype=float))
        assert velocity(traj) == pytest.approx(np.full(30, 200.0))

    def test_peak_speed_of_step_response(self):
        delta, omega = -12.0, 20.0
        t = np.arange(0, 201) * 5.0
        pos, _ = analytic_step_response(delta, omega, t)
        traj = Trajectory("TB_CD", 200.0, pos)
        v = velocity(traj)
        expected = abs(delta) * omega * math.exp(-1)
        assert np.max(np.abs(v)) == pytest.approx(expected, rel=0.02)

    def test_rejects_too_short(self):
        with pytest.raises(ValueError):
            velocity(Trajectory("LA", 200.0, np.array([1.0, 2.0])))
