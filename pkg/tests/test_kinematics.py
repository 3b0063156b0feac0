import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dasmr.kinematics import (
    ChassisTwist,
    CurvatureInfeasible,
    InconsistentWheelState,
    RobotParams,
    WheelState,
    clamp_twist,
    icr_radius,
    steering_angles,
    twist_from_wheel_state,
    wheel_icr_radii,
    wheel_speeds,
    wheel_state_from_twist,
)

P = RobotParams(wheelbase=0.6, track=0.5, wheel_radius=0.15)

# Steering, ICR-radius and wheel-speed formulas at R = 2 evaluated with mpmath at 30 digits, rounded to 12.
PHI_L = 0.169778273968
PHI_R = 0.132551532297
R_L = 1.775528090456
R_R = 2.269911892563
OMEGA_L = 5.918426968188
OMEGA_R = 7.566372975211


def test_icr_radius():
    assert icr_radius(ChassisTwist(1.0, 0.5)) == 2.0
    assert icr_radius(ChassisTwist(1.0, 0.0)) is None
    assert icr_radius(ChassisTwist(0.0, 0.5)) == 0.0


def test_steering_angles_worked_example():
    phi_l, phi_r, clamped = steering_angles(ChassisTwist(1.0, 0.5), P)
    assert phi_l == pytest.approx(PHI_L, abs=1e-11)
    assert phi_r == pytest.approx(PHI_R, abs=1e-11)
    assert not clamped


def test_steering_straight_and_reverse():
    assert steering_angles(ChassisTwist(1.0, 0.0), P)[:2] == (0.0, 0.0)
    # v and omega both negative: same R = 2, same angles
    phi_l, phi_r, _ = steering_angles(ChassisTwist(-1.0, -0.5), P)
    assert (phi_l, phi_r) == pytest.approx((PHI_L, PHI_R), abs=1e-11)


def test_steering_clamp_and_strict():
    tight = ChassisTwist(0.1, 1.0)  # R = 0.1 needs ~63 deg
    phi_l, phi_r, clamped = steering_angles(tight, P)
    assert clamped
    assert abs(phi_l) <= P.phi_max and abs(phi_r) <= P.phi_max
    with pytest.raises(CurvatureInfeasible):
        steering_angles(tight, P, strict=True)


def test_wheel_icr_radii():
    assert wheel_icr_radii(2.0, P) == pytest.approx((R_L, R_R), abs=1e-11)
    r_l, r_r = wheel_icr_radii(0.0, P)
    assert r_l == r_r == pytest.approx(math.sqrt(0.25**2 + 0.3**2))
    assert min(wheel_icr_radii(-7.3, P)) >= P.wheelbase / 2


def test_wheel_speeds():
    assert wheel_speeds(ChassisTwist(1.0, 0.5), P) == pytest.approx((OMEGA_L, OMEGA_R), abs=1e-10)
    assert wheel_speeds(ChassisTwist(1.2, 0.0), P) == pytest.approx((8.0, 8.0), abs=1e-12)
    assert wheel_speeds(ChassisTwist(0.0, 0.0), P) == (0.0, 0.0)


def test_spec_rounded_values_are_close():
    # The rounded reference example carries slips in the fifth digit; it agrees to 2e-4 relative.
    assert PHI_L == pytest.approx(0.169747, rel=2e-4)
    assert OMEGA_R == pytest.approx(7.566228, rel=2e-5)


def test_wheel_state_from_twist():
    ws = wheel_state_from_twist(ChassisTwist(1.0, 0.5), WheelState(), 0.025, P)
    assert ws.phi_dot_l == pytest.approx(PHI_L / 0.025, abs=1e-9)
    assert ws.phi_dot_r == pytest.approx(PHI_R / 0.025, abs=1e-9)
    again = wheel_state_from_twist(ChassisTwist(1.0, 0.5), ws, 0.025, P)
    assert again.phi_dot_l == 0.0 and again.phi_dot_r == 0.0
    assert wheel_state_from_twist(ChassisTwist(), WheelState(), 0.025, P) == WheelState()
    with pytest.raises(ValueError):
        wheel_state_from_twist(ChassisTwist(), WheelState(), 0.0, P)


def test_inverse_map():
    ws = wheel_state_from_twist(ChassisTwist(1.0, 0.5), WheelState(), 0.025, P)
    t = twist_from_wheel_state(ws, P)
    assert t.v == pytest.approx(1.0, rel=1e-9)
    assert t.omega == pytest.approx(0.5, rel=1e-9)
    straight = twist_from_wheel_state(WheelState(0.0, 0.0, 8.0, 8.0), P)
    assert straight.v == pytest.approx(1.2) and straight.omega == 0.0


def test_inverse_map_rejects_mismatch():
    ws = wheel_state_from_twist(ChassisTwist(1.0, 0.5), WheelState(), 0.025, P)
    with pytest.raises(InconsistentWheelState):
        twist_from_wheel_state(WheelState(ws.phi_l, ws.phi_r, ws.omega_l, ws.omega_r * 1.01), P)
    with pytest.raises(InconsistentWheelState):
        twist_from_wheel_state(WheelState(ws.phi_l, ws.phi_r * 0.9, ws.omega_l, ws.omega_r), P)
    with pytest.raises(InconsistentWheelState):
        twist_from_wheel_state(WheelState(0.0, 0.0, 8.0, 7.0), P)


def feasible_twists(rng, n):
    """Random twists with |R| > W/2 + 1e-3 whose steering stays inside phi_max."""
    out = []
    while len(out) < n:
        v = rng.uniform(-P.v_max, P.v_max)
        omega = rng.uniform(-P.omega_max, P.omega_max)
        if omega == 0.0 or abs(v / omega) <= P.track / 2 + 1e-3:
            continue
        if steering_angles(ChassisTwist(v, omega), P).clamped:
            continue
        out.append(ChassisTwist(v, omega))
    return out


def test_round_trip_10k():
    rng = np.random.default_rng(0)
    for t in feasible_twists(rng, 10_000):
        back = twist_from_wheel_state(wheel_state_from_twist(t, WheelState(), 0.025, P), P)
        assert back.v == pytest.approx(t.v, rel=1e-9, abs=1e-15)
        assert back.omega == pytest.approx(t.omega, rel=1e-9, abs=1e-15)


@given(st.floats(0.05, 1.0), st.floats(0.01, 1.0))
def test_mirror_symmetry(v, omega):
    a = steering_angles(ChassisTwist(v, omega), P)
    b = steering_angles(ChassisTwist(v, -omega), P)
    assert b.phi_l == pytest.approx(-a.phi_r, abs=1e-12)
    assert b.phi_r == pytest.approx(-a.phi_l, abs=1e-12)
    wl, wr = wheel_speeds(ChassisTwist(v, omega), P)
    ml, mr = wheel_speeds(ChassisTwist(v, -omega), P)
    assert ml == pytest.approx(wr, abs=1e-12)
    assert mr == pytest.approx(wl, abs=1e-12)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_inner_wheel_property(v, omega):
    if v / omega <= P.track / 2:
        return
    phi_l, phi_r, _ = steering_angles(ChassisTwist(v, omega), P)
    wl, wr = wheel_speeds(ChassisTwist(v, omega), P)
    assert phi_l > phi_r > 0
    assert wr > wl


@given(st.floats(-1.0, 1.0))
def test_straight_line(v):
    phi_l, phi_r, _ = steering_angles(ChassisTwist(v, 0.0), P)
    wl, wr = wheel_speeds(ChassisTwist(v, 0.0), P)
    assert phi_l == phi_r == 0.0
    assert wl == wr


@settings(max_examples=300)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_wheel_velocities_perpendicular_to_icr_radius(v, omega):
    """Every wheel's rolling velocity equals omega x (wheel - ICR), hence is perpendicular to it."""
    if abs(omega) < 1e-6:
        return
    t = ChassisTwist(v, omega)
    R = v / omega
    phi_l, phi_r, clamped = steering_angles(t, P)
    if clamped:
        return
    wl, wr = wheel_speeds(t, P)
    hl, hw, r = P.wheelbase / 2, P.track / 2, P.wheel_radius
    wheels = [  # (position, steering angle, spin)
        ((hl, hw), phi_l, wl), ((hl, -hw), phi_r, wr),
        ((-hl, hw), -phi_l, wl), ((-hl, -hw), -phi_r, wr),
    ]
    for (px, py), phi, spin in wheels:
        vel = spin * r * np.array([math.cos(phi), math.sin(phi)])
        radius = np.array([px, py - R])
        assert abs(vel @ radius) < 1e-9
        rigid = omega * np.array([-radius[1], radius[0]])
        assert np.allclose(vel, rigid, atol=1e-9)


def test_clamp_twist_limits_curvature():
    t = clamp_twist(0.0, 1.0, P)
    assert t.omega == 0.0  # cannot rotate in place
    t = clamp_twist(2.0, -5.0, P)
    assert t.v == P.v_max
    assert abs(t.omega) <= P.omega_max
    t = clamp_twist(0.3, 1.0, P)
    assert not steering_angles(t, P).clamped
    assert abs(t.v / t.omega) == pytest.approx(P.min_turn_radius)


def test_params_validation():
    with pytest.raises(ValueError):
        RobotParams(phi_max=2.0)
    with pytest.raises(ValueError):
        RobotParams(wheelbase=0.0)
