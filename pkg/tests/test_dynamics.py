import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sttr.dynamics import (
    circular_observer,
    eight_shape_position,
    eight_shape_velocity,
    integrate_rotation,
    look_at_rotation,
    make_transition,
    process_noise_cov,
    propagate,
    square_shape_position,
    square_shape_velocity,
)
from sttr.geometry import skew


def test_transition_unit_step():
    m = make_transition(1.0)
    np.testing.assert_array_equal(m.A[:3, 3:], np.eye(3))
    np.testing.assert_array_equal(m.B, np.vstack([0.5 * np.eye(3), np.eye(3)]))


def test_transition_inverse_and_b_block():
    m = make_transition(0.05)
    Ainv = np.block([[np.eye(3), -0.05 * np.eye(3)], [np.zeros((3, 3)), np.eye(3)]])
    np.testing.assert_allclose(m.A @ Ainv, np.eye(6), atol=1e-15)
    np.testing.assert_allclose(m.B[:3], 0.00125 * np.eye(3), rtol=1e-12)


@pytest.mark.parametrize("dt", [0.0, -0.1])
def test_transition_rejects_bad_dt(dt):
    with pytest.raises(ValueError):
        make_transition(dt)


def test_propagate_examples():
    m = make_transition(1.0)
    np.testing.assert_array_equal(propagate([0, 0, 0, 1, 0, 0], m), [1, 0, 0, 1, 0, 0])
    np.testing.assert_array_equal(propagate(np.zeros(6), m, [1, 0, 0]), [0.5, 0, 0, 1, 0, 0])


@given(st.integers(0, 30), st.floats(0.001, 1.0))
def test_power_matches_repeated_propagation(k, dt):
    m = make_transition(dt)
    x = np.array([1.0, -2.0, 3.0, 0.5, 0.1, -0.7])
    y = x.copy()
    for _ in range(k):
        y = propagate(y, m)
    np.testing.assert_allclose(m.power(k) @ x, y, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(y[3:], x[3:])


def test_process_noise_cov_structure():
    Q = process_noise_cov(2.0, 0.1)
    assert Q[0, 0] == pytest.approx(2.0 * 0.1**3 / 3)
    assert Q[0, 3] == pytest.approx(2.0 * 0.1**2 / 2)
    assert Q[3, 3] == pytest.approx(2.0 * 0.1)
    assert np.all(np.linalg.eigvalsh(Q) > 0)


@pytest.mark.parametrize("t, v", [(0.0, [0, 10, 0]), (10.0, [0, 10, 0]), (5.0, [-10, -10, 0])])
def test_eight_velocity_examples(t, v):
    np.testing.assert_allclose(eight_shape_velocity(t), v, atol=1e-12)


def test_eight_position_integrates_velocity():
    t = np.linspace(0, 20, 200_001)
    p = eight_shape_position(t)
    v = eight_shape_velocity(t)
    # trapezoid integral of the velocity reproduces the closed-form displacement
    dt = t[1] - t[0]
    disp = np.cumsum(0.5 * (v[1:] + v[:-1]) * dt, axis=0)
    np.testing.assert_allclose(p[1:] - p[0], disp, atol=1e-6)
    # one period returns both position and velocity to their start
    np.testing.assert_allclose(p[-1], p[0], atol=1e-9)
    np.testing.assert_allclose(v[-1], v[0], atol=1e-9)


def test_square_velocity():
    np.testing.assert_array_equal(square_shape_velocity(np.array([0.0, 4.99])), [[8, 0, 0]] * 2)
    np.testing.assert_array_equal(square_shape_velocity(np.array([5.0, 9.9])), [[0, 8, 0]] * 2)
    t = np.linspace(0, 40, 1001)
    np.testing.assert_allclose(np.linalg.norm(square_shape_velocity(t), axis=-1), 8.0)


def test_square_position_is_continuous_and_closed():
    t = np.linspace(0, 20, 20_001)
    p = square_shape_position(t)
    assert np.max(np.linalg.norm(np.diff(p, axis=0), axis=-1)) < 8 * 0.0011
    np.testing.assert_allclose(p[-1], p[0], atol=1e-9)


def test_circular_observer_static_and_speed():
    pose = circular_observer(np.array([0.0, 3.0]), np.zeros(3), 2.0, 0.0, 0.7)
    expected = 2.0 * np.array([np.cos(0.7), np.sin(0.7), 0.0])
    np.testing.assert_allclose(pose.position, [expected, expected], atol=1e-15)
    t = np.linspace(0, 10, 101)
    pose = circular_observer(t, np.array([1.0, 2, 3]), 4.0, -0.3, 0.2)
    np.testing.assert_allclose(np.linalg.norm(pose.velocity, axis=-1), 4.0 * 0.3)


def test_circular_observer_velocity_is_derivative():
    d = 1e-6
    args = (np.array([1.0, 2, 3]), 4.0, 0.4, 0.2)
    p1 = circular_observer(np.array(1.5 + d), *args).position
    p0 = circular_observer(np.array(1.5), *args)
    np.testing.assert_allclose((p1 - p0.position) / d, p0.velocity, atol=1e-5)


def test_circular_observer_rejects_radius():
    with pytest.raises(ValueError):
        circular_observer(np.array(0.0), np.zeros(3), 0.0, 0.1, 0.0)


def test_gimbal_points_at_target_and_rate_is_consistent():
    center = np.array([5.0, -3.0, 2.0])
    target = (lambda t: np.array([10.0 + t, 4.0, 20.0]), lambda t: np.array([1.0, 0.0, 0.0]))
    args = (center, 6.0, 0.35, 1.0)

    def pose(t):
        t = np.asarray(t, float)
        return circular_observer(t, *args, target=(target[0](t), target[1](t)))

    t, d = 2.0, 1e-6
    p = pose(t)
    R = p.R_cw
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)
    g = (target[0](t) - p.position) / np.linalg.norm(target[0](t) - p.position)
    np.testing.assert_allclose(R[:, 2], g, atol=1e-12)
    Rdot_fd = (pose(t + d).R_cw - pose(t - d).R_cw) / (2 * d)
    np.testing.assert_allclose(Rdot_fd, R @ skew(p.omega), atol=1e-6)


def test_integrate_rotation_constant_rate():
    w = np.array([0.0, 0.0, np.pi / 2])
    R = integrate_rotation(np.eye(3), w, 1.0)
    np.testing.assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-12)
    np.testing.assert_array_equal(integrate_rotation(np.eye(3), np.zeros(3), 1.0), np.eye(3))


def test_look_at_rotation_vertical_fallback():
    R = look_at_rotation(np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(R[:, 2], [0, 0, 1])
