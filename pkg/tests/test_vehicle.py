import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magnav.errors import InvalidArgument, OutOfBounds
from magnav.vehicle import (ControlInput, NoiseConfig, Pose, measure, step_deterministic,
                            step_noisy, wrap_angle, wrap_angles)

from conftest import constant_map

angles = st.floats(-50.0, 50.0, allow_nan=False)


@given(angles)
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_seam():
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(math.pi) == math.pi
    np.testing.assert_array_equal(wrap_angles([0.5, -math.pi, 3 * math.pi]), [0.5, math.pi, math.pi])


class TestDeterministic:
    def test_unit_step_east(self):
        assert step_deterministic(Pose(0, 0, 0), ControlInput(1.0, 0.0), 1.0) == Pose(1.0, 0.0, 0.0)

    def test_north(self):
        p = step_deterministic(Pose(0, 0, math.pi / 2), ControlInput(0.2, 0.0), 1.0)
        assert p.x == pytest.approx(0.0, abs=1e-15)
        assert p.y == pytest.approx(0.2)
        assert p.theta == math.pi / 2

    def test_translates_with_pre_update_heading(self):
        p = step_deterministic(Pose(0, 0, 0), ControlInput(0.2, 0.1745), 1.0)
        assert (p.x, p.y, p.theta) == (0.2, 0.0, 0.1745)

    def test_turn_first_uses_new_heading(self):
        p = step_deterministic(Pose(0, 0, 0), ControlInput(1.0, math.pi / 2), 1.0, turn_first=True)
        assert p.x == pytest.approx(0.0, abs=1e-15)
        assert p.y == pytest.approx(1.0)

    def test_rejects_bad_dt_and_speed(self):
        with pytest.raises(InvalidArgument):
            step_deterministic(Pose(0, 0, 0), ControlInput(1.0, 0.0), 0.0)
        with pytest.raises(InvalidArgument):
            ControlInput(-0.1, 0.0)

    @given(angles, st.floats(0, 2), st.floats(-3, 3), st.floats(0.1, 2))
    def test_heading_stays_wrapped(self, th, v, om, dt):
        assert -math.pi < step_deterministic(Pose(0, 0, th), ControlInput(v, om), dt).theta <= math.pi

    @given(st.floats(-3.0, 3.0), st.floats(0.01, 2))
    def test_straight_motion_on_heading_ray(self, th, v):
        th = wrap_angle(th)
        p = step_deterministic(Pose(1.0, -2.0, th), ControlInput(v, 0.0), 1.0)
        assert p.theta == th
        assert math.atan2(p.y + 2.0, p.x - 1.0) == pytest.approx(th, abs=1e-9)


class TestNoisy:
    def test_zero_noise_is_bit_identical(self):
        rng = np.random.default_rng(0)
        z = NoiseConfig(0.0, 0.0, 0.0)
        u = ControlInput(0.3, 0.2)
        assert step_noisy(Pose(1, 2, 3), u, 1.0, z, rng) == step_deterministic(Pose(1, 2, 3), u, 1.0)

    def test_zero_motion_unchanged(self):
        rng = np.random.default_rng(0)
        assert step_noisy(Pose(1, 2, 0.5), ControlInput(0, 0), 1.0, NoiseConfig(), rng) == Pose(1, 2, 0.5)

    def test_position_sigma_per_five_cm(self):
        rng = np.random.default_rng(11)
        noise = NoiseConfig(sigma_xy_per_step=0.01, sigma_theta_per_step=0.0)
        xs = [step_noisy(Pose(0, 0, 0), ControlInput(0.05, 0.0), 1.0, noise, rng).x for _ in range(10_000)]
        assert 0.009 <= np.std(xs) <= 0.011

    def test_heading_sigma_per_ten_degrees(self):
        rng = np.random.default_rng(12)
        noise = NoiseConfig(sigma_xy_per_step=0.0, sigma_theta_per_step=math.radians(1.0))
        u = ControlInput(0.0, math.radians(20.0))
        ths = [step_noisy(Pose(0, 0, 0), u, 1.0, noise, rng).theta for _ in range(10_000)]
        assert np.std(ths) == pytest.approx(math.radians(2.0), rel=0.05)

    def test_pose_fields_are_python_floats(self):
        p = step_noisy(Pose(0, 0, 0), ControlInput(0.2, 0.3), 1.0, NoiseConfig(), np.random.default_rng(0))
        assert all(type(v) is float for v in (p.x, p.y, p.theta))


class TestMeasure:
    def test_noise_free(self):
        m = constant_map(45000.0)
        assert measure(m, Pose(0, 0, 0), 0.0, np.random.default_rng(0)) == 45000.0

    def test_mean_of_draws(self):
        m = constant_map(45000.0)
        rng = np.random.default_rng(5)
        z = [measure(m, Pose(0.1, 0.2, 0), 100.0, rng) for _ in range(10_000)]
        assert abs(np.mean(z) - 45000.0) < 5.0

    def test_off_map(self):
        with pytest.raises(OutOfBounds):
            measure(constant_map(), Pose(10, 0, 0), 1.0, np.random.default_rng(0))
