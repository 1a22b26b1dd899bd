import cmath
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvt_sim.dynamics import (
    RobotState,
    WorldParams,
    orbit_center,
    propagate,
    virtual_center,
    virtual_center_velocity,
    wrap_angle,
)

W0 = 0.536
V = 0.16

states = st.builds(
    RobotState,
    x=st.floats(-5, 5),
    y=st.floats(-5, 5),
    theta=st.floats(-math.pi, math.pi),
    v=st.floats(0.01, 2.0),
)
turn_rates = st.floats(-3.0, 3.0)


def close(a: complex, b: complex, tol: float) -> bool:
    return abs(a - b) <= tol


def test_virtual_center_examples():
    z = virtual_center(RobotState(0.0, 0.0, 0.0, V), WorldParams(W0))
    assert z.real == pytest.approx(0.0, abs=1e-15)
    assert z.imag == pytest.approx(V / W0, rel=1e-15)
    assert z.imag == pytest.approx(0.29851, abs=1e-5)
    z = virtual_center(RobotState(1.0, 0.0, math.pi / 2, 0.536), 0.536)
    assert close(z, 0j, 1e-15)


@given(states, st.floats(0.05, 3.0))
def test_virtual_center_offset_radius(s, w0):
    assert abs(virtual_center(s, w0) - s.position) == pytest.approx(s.v / w0, rel=1e-12)


def test_orbit_center_examples():
    s = RobotState(0.3, -0.2, 1.1, V)
    assert close(orbit_center(s, W0), virtual_center(s, W0), 1e-15)
    assert close(orbit_center(RobotState(0.0, 0.0, 0.0, 1.0), 2.0), 0.5j, 1e-15)
    with pytest.raises(ValueError, match="infinite turning radius"):
        orbit_center(s, 0.0)


def test_propagate_examples():
    s = propagate(RobotState(0.0, 0.0, 0.0, 1.0), 0.0, 1.0)
    assert (s.x, s.y, s.theta) == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)
    s = propagate(RobotState(0.0, 0.0, 0.0, 1.0), 1.0, math.pi / 2)
    assert (s.x, s.y, s.theta) == pytest.approx((1.0, 1.0, math.pi / 2), abs=1e-15)


def test_propagate_rejects_negative_dt():
    with pytest.raises(ValueError):
        propagate(RobotState(0.0, 0.0, 0.0, 1.0), 0.5, -1e-3)


def test_robot_state_validation():
    with pytest.raises(ValueError):
        RobotState(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        RobotState(0.0, 0.0, math.nan, 1.0)
    with pytest.raises(ValueError):
        WorldParams(0.0)


@given(states, turn_rates, st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_propagate_semigroup(s, u, dt1, dt2):
    a = propagate(propagate(s, u, dt1), u, dt2)
    b = propagate(s, u, dt1 + dt2)
    assert close(a.position, b.position, 1e-11)
    assert abs(wrap_angle(a.theta - b.theta)) <= 1e-11


@given(states, turn_rates, st.floats(1e-3, 5.0))
def test_speed_invariance(s, u, dt):
    s1 = propagate(s, u, dt)
    chord = abs(s1.position - s.position)
    assert chord <= s.v * dt * (1 + 1e-12) + 1e-12
    if abs(u) * dt > 1e-3:
        assert chord < s.v * dt


@given(states, turn_rates, st.floats(0.0, 50.0))
def test_heading_wrapped(s, u, dt):
    th = propagate(s, u, dt).theta
    assert -math.pi < th <= math.pi


def test_wrap_angle():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(0.25) == 0.25


def test_straight_line_limit():
    # tiny turn rates use the straight-line branch and agree with the arc
    s = RobotState(0.1, 0.2, 0.7, 0.5)
    a = propagate(s, 1e-13, 2.0)
    b = propagate(s, 1e-9, 2.0)
    # lateral offset of the arc is about v * u * dt^2 / 2
    assert close(a.position, b.position, 2e-9)


def test_virtual_center_velocity_examples():
    s = RobotState(0.4, 0.1, 2.0, V)
    assert close(virtual_center_velocity(s, W0, W0), 0j, 1e-15)
    assert close(virtual_center_velocity(RobotState(0.0, 0.0, 0.0, V), 0.0, WorldParams(W0)), complex(V, 0), 1e-15)


@settings(max_examples=50)
@given(states, turn_rates)
def test_virtual_center_velocity_matches_finite_difference(s, u):
    h = 1e-6
    fd = (virtual_center(propagate(s, u, h), W0) - virtual_center(s, W0)) / h
    an = virtual_center_velocity(s, u, W0)
    # forward difference error is O(h * |u| * |zdot|)
    assert close(fd, an, 1e-5 * (1 + abs(an)) * (1 + abs(u)))


def test_substep_exactness():
    s = RobotState(0.8, 0.5, 0.3, V)
    for u in (W0, -0.9, 2.7):
        one = propagate(s, u, 1.0)
        many = s
        for _ in range(1000):
            many = propagate(many, u, 1e-3)
        assert close(one.position, many.position, 1e-12)
        assert abs(wrap_angle(one.theta - many.theta)) <= 1e-12


def test_virtual_center_fixed_under_nominal_turn_rate():
    s = RobotState(1.2, 0.9, -2.0, V)
    z0 = virtual_center(s, W0)
    for _ in range(100):
        s = propagate(s, W0, 1.0)
        assert close(virtual_center(s, W0), z0, 1e-12)


def test_virtual_center_fixed_over_many_small_steps():
    # heading rounding must not accumulate into the orbit center
    s = RobotState(0.8, 0.5, 0.3, V)
    z0 = virtual_center(s, W0)
    for _ in range(100_000):
        s = propagate(s, W0, 1e-3)
    assert close(virtual_center(s, W0), z0, 1e-13)


@given(states, st.floats(1e-6, 0.05), st.floats(1e-3, 1.0))
def test_wide_turn_substeps(s, u, dt):
    one = propagate(s, u, dt)
    many = s
    for _ in range(10):
        many = propagate(many, u, dt / 10)
    assert close(one.position, many.position, 1e-12 * (1 + s.v * dt))


def test_orbit_is_circle_of_nominal_radius():
    s = RobotState(0.0, 0.0, 0.0, V)
    z = virtual_center(s, W0)
    for t in (0.5, 3.0, 7.7):
        p = propagate(s, W0, t)
        assert abs(p.position - z) == pytest.approx(V / W0, rel=1e-12)
        # heading is tangent: velocity is perpendicular to the radius
        r = p.position - z
        assert abs((r.conjugate() * cmath.exp(1j * p.theta)).real) < 1e-12
