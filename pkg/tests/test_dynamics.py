"""Integrator checks against the closed-form critically damped step response."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gestkin.dynamics import (
    analytic_step_response,
    blend_parameters,
    integrate,
    integrate_many,
    read_trajectory_csv,
    write_trajectory_csv,
)
from gestkin.score import Gesture, GesturalScore, TractVariable


def _single_gesture_score(omega_n, neutral=15.0, target=0.0, sample_rate=200.0):
    k = omega_n * omega_n
    return GesturalScore(
        duration_ms=1500.0,
        sample_rate_hz=sample_rate,
        tract_variables=(TractVariable("LA", neutral),),
        gestures=(
            Gesture("g", "LA", target, k, 1.0, 1.0, 200.0, 1100.0, "clo labial"),
        ),
    )


def _two_gesture_score(w1, w2, k1=1600.0, k2=1600.0, t1=12.0, t2=-2.0):
    return GesturalScore(
        duration_ms=1200.0,
        sample_rate_hz=1000.0,
        tract_variables=(TractVariable("TB_CL", 0.0),),
        gestures=(
            Gesture("a", "TB_CL", t1, k1, 1.0, w1, 200.0, 700.0, "narrow palatal"),
            Gesture("b", "TB_CL", t2, k2, 1.0, w2, 200.0, 700.0, "crit velar"),
        ),
    )


class TestAnalyticStepResponse:
    def test_zero_time_is_at_rest(self):
        x, v = analytic_step_response(5.0, 20.0, 0.0)
        assert x == 0.0 and v == 0.0

    def test_velocity_peaks_at_reciprocal_omega(self):
        delta, omega = 5.0, 20.0
        t = np.linspace(0.0, 500.0, 20001)
        _, v = analytic_step_response(delta, omega, t)
        t_peak = t[np.argmax(np.abs(v))]
        assert t_peak == pytest.approx(1000.0 / omega, abs=0.05)
        assert np.max(np.abs(v)) == pytest.approx(delta * omega * math.exp(-1), rel=1e-6)

    def test_converges_to_target_displacement(self):
        delta, omega = -15.0, 20.0
        x, _ = analytic_step_response(delta, omega, 10_000.0 / omega)
        assert abs(x - delta) < 0.005 * abs(delta)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            analytic_step_response(1.0, 20.0, -1.0)


class TestBlendParameters:
    def test_single_gesture_is_identity(self):
        g = Gesture("a", "TB_CL", 12.0, 900.0, 1.0, 2.0, 0.0, 100.0, "")
        blended = blend_parameters([g])
        assert blended.target_mm == 12.0
        assert blended.stiffness_s2 == 900.0
        assert blended.damping_ratio == 1.0

    def test_symmetric_targets_cancel(self):
        a = Gesture("a", "TB_CL", 10.0, 1600.0, 1.0, 1.0, 0.0, 100.0, "")
        b = Gesture("b", "TB_CL", -10.0, 1600.0, 1.0, 1.0, 0.0, 100.0, "")
        assert blend_parameters([a, b]).target_mm == pytest.approx(0.0)

    def test_palatal_velar_pull(self):
        pal = Gesture("pal", "TB_CL", 12.0, 1600.0, 1.0, 1.0, 0.0, 100.0, "")
        vel = Gesture("vel", "TB_CL", -8.0, 2500.0, 1.0, 1.0, 0.0, 100.0, "")
        blended = blend_parameters([pal, vel])
        assert blended.target_mm == pytest.approx(2.0)
        assert blended.stiffness_s2 == pytest.approx(2050.0)

    def test_weighted_mean_respects_weights(self):
        pal = Gesture("pal", "TB_CL", 12.0, 1600.0, 1.0, 1.0, 0.0, 100.0, "")
        vel = Gesture("vel", "TB_CL", -8.0, 1600.0, 1.0, 3.0, 0.0, 100.0, "")
        assert blend_parameters([pal, vel]).target_mm == pytest.approx((12.0 - 24.0) / 4.0)

    def test_damping_takes_the_maximum(self):
        a = Gesture("a", "TB_CL", 1.0, 1600.0, 1.0, 1.0, 0.0, 100.0, "")
        b = Gesture("b", "TB_CL", 2.0, 1600.0, 1.5, 1.0, 0.0, 100.0, "")
        assert blend_parameters([a, b]).damping_ratio == 1.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            blend_parameters([])


class TestIntegrateOracle:
    def test_no_gestures_stays_at_neutral(self):
        score = GesturalScore(
            duration_ms=500.0,
            sample_rate_hz=200.0,
            tract_variables=(TractVariable("LA", 15.0), TractVariable("TB_CD", -1.0)),
            gestures=(),
        )
        trajs = integrate(score)
        assert np.all(trajs["LA"].samples == 15.0)
        assert np.all(trajs["TB_CD"].samples == -1.0)

    @pytest.mark.parametrize("omega_n", [10.0, 20.0, 40.0])
    def test_matches_closed_form_within_tolerance(self, omega_n):
        score = _single_gesture_score(omega_n)
        traj = integrate(score, dt_ms=0.5)["LA"]
        t = traj.times_ms
        active = (t >= 200.0) & (t <= 1100.0)
        dx, _ = analytic_step_response(-15.0, omega_n, t[active] - 200.0)
        err = np.max(np.abs(traj.samples[active] - (15.0 + dx)))
        assert err < 1e-3 * 15.0

    def test_position_fraction_at_50ms(self):
        # independent formula oracle: x(50 ms) = neutral + delta*(1 - 2/e) for omega=20
        score = _single_gesture_score(20.0, sample_rate=1000.0)
        traj = integrate(score, dt_ms=0.5)["LA"]
        idx = int(round((200.0 + 50.0 - traj.t0_ms) * traj.sample_rate_hz / 1000.0))
        expected = 15.0 + (-15.0) * (1.0 - 2.0 * math.exp(-1.0))
        assert abs(traj.samples[idx] - expected) < 1e-3 * 15.0

    def test_dt_above_one_ms_rejected(self):
        with pytest.raises(ValueError):
            integrate(_single_gesture_score(20.0), dt_ms=2.0)

    def test_dt_coarser_than_sample_rate_rejected(self):
        with pytest.raises(ValueError):
            integrate(_single_gesture_score(20.0, sample_rate=2000.0), dt_ms=1.0)


class TestBatching:
    def test_many_matches_single_bitwise(self):
        scores = [_two_gesture_score(1.0, 2.0), _two_gesture_score(0.5, 4.0, t2=-8.0)]
        singly = [integrate(s, dt_ms=0.5) for s in scores]
        batched = integrate_many(scores, dt_ms=0.5)
        for one, many in zip(singly, batched):
            assert set(one) == set(many)
            for ch in one:
                assert np.array_equal(one[ch].samples, many[ch].samples)

    def test_determinism_bitwise(self):
        a = integrate(_two_gesture_score(1.0, 0.5), dt_ms=0.5)["TB_CL"].samples
        b = integrate(_two_gesture_score(1.0, 0.5), dt_ms=0.5)["TB_CL"].samples
        assert np.array_equal(a, b)


class TestBlendingDynamics:
    @given(
        w1=st.floats(0.25, 4.0),
        w2=st.floats(0.25, 4.0),
        t1=st.floats(-12.0, 12.0),
        t2=st.floats(-12.0, 12.0),
    )
    def test_convexity_bounds(self, w1, w2, t1, t2):
        score = _two_gesture_score(w1, w2, t1=t1, t2=t2)
        samples = integrate(score, dt_ms=1.0)["TB_CL"].samples
        lo = min(0.0, t1, t2) - 1e-9
        hi = max(0.0, t1, t2) + 1e-9
        assert samples.min() >= lo and samples.max() <= hi

    def test_equal_stiffness_normalized_velocity_shape_invariant(self):
        profiles = []
        for w in (0.25, 1.0, 4.0):
            traj = integrate(_two_gesture_score(1.0, w), dt_ms=0.5)["TB_CL"]
            v = np.gradient(traj.samples, 1.0 / traj.sample_rate_hz)
            peak = np.max(np.abs(v))
            assert peak > 0
            profiles.append(v / peak)
        for other in profiles[1:]:
            assert np.allclose(profiles[0], other, atol=1e-9)


class TestTrajectoryFiles:
    def test_round_trip_preserves_values_to_six_decimals(self, tmp_path):
        trajs = integrate(_two_gesture_score(1.0, 1.0), dt_ms=0.5)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(trajs, path)
        header = path.read_text().splitlines()[0]
        assert header == "t_ms,TB_CL"
        back = read_trajectory_csv(path)
        assert np.allclose(back["TB_CL"].samples, trajs["TB_CL"].samples, atol=5e-7)
        assert back["TB_CL"].sample_rate_hz == trajs["TB_CL"].sample_rate_hz

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            read_trajectory_csv(tmp_path / "nope.csv")
