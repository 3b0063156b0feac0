"""Double-Ackermann steering geometry.

Maps a chassis twist (v, omega_c) to the steering angles and spin speeds of
the left and right wheels, relative to the instantaneous center of rotation
(ICR). The symmetric configuration is assumed: rear steering angles are the
negated front ones, so a single (phi_l, phi_r) pair describes all four wheels.

Sign convention: R > 0 means the ICR lies on the +y (left) side of the robot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional


class CurvatureInfeasible(ValueError):
    """Requested curvature needs a steering angle beyond ``phi_max``."""


class InconsistentWheelState(ValueError):
    """Left and right wheel states do not describe one rigid-body twist."""


@dataclass(frozen=True)
class RobotParams:
    wheelbase: float = 0.6
    track: float = 0.5
    wheel_radius: float = 0.15
    v_max: float = 1.0
    omega_max: float = 1.0
    phi_max: float = 0.6
    twist_time_constant: float = 0.15

    def __post_init__(self):
        if min(self.wheelbase, self.track, self.wheel_radius) <= 0:
            raise ValueError("wheelbase, track and wheel_radius must be positive")
        if self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("velocity limits must be positive")
        if not 0 < self.phi_max < math.pi / 2:
            raise ValueError("phi_max must lie in (0, pi/2)")
        if self.twist_time_constant < 0:
            raise ValueError("twist_time_constant must be >= 0")

    @property
    def min_turn_radius(self) -> float:
        """Smallest |R| whose inner-wheel steering angle stays within phi_max."""
        return self.track / 2 + (self.wheelbase / 2) / math.tan(self.phi_max)


@dataclass(frozen=True)
class ChassisTwist:
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class WheelState:
    phi_l: float = 0.0
    phi_r: float = 0.0
    omega_l: float = 0.0
    omega_r: float = 0.0
    phi_dot_l: float = 0.0
    phi_dot_r: float = 0.0


class SteeringAngles(NamedTuple):
    phi_l: float
    phi_r: float
    clamped: bool


def icr_radius(twist: ChassisTwist) -> Optional[float]:
    """Signed distance from the robot center to the ICR, None when driving straight."""
    if twist.omega == 0.0:
        return None
    return twist.v / twist.omega


def _atan_ratio(num: float, den: float) -> float:
    if den == 0.0:
        return math.copysign(math.pi / 2, num)
    return math.atan(num / den)


def steering_angles(twist: ChassisTwist, p: RobotParams, strict: bool = False) -> SteeringAngles:
    R = icr_radius(twist)
    if R is None:
        return SteeringAngles(0.0, 0.0, False)
    half_l, half_w = p.wheelbase / 2, p.track / 2
    phi_l = _atan_ratio(half_l, R - half_w)
    phi_r = _atan_ratio(half_l, R + half_w)
    over = max(abs(phi_l), abs(phi_r)) > p.phi_max
    if over:
        if strict:
            raise CurvatureInfeasible(
                f"R={R:.6g} m needs steering {max(abs(phi_l), abs(phi_r)):.4f} rad > phi_max={p.phi_max}"
            )
        phi_l = max(-p.phi_max, min(p.phi_max, phi_l))
        phi_r = max(-p.phi_max, min(p.phi_max, phi_r))
    return SteeringAngles(phi_l, phi_r, over)


def wheel_icr_radii(R: float, p: RobotParams) -> tuple[float, float]:
    half_l, half_w = p.wheelbase / 2, p.track / 2
    return math.hypot(R - half_w, half_l), math.hypot(R + half_w, half_l)


def wheel_speeds(twist: ChassisTwist, p: RobotParams) -> tuple[float, float]:
    R = icr_radius(twist)
    if R is None:
        w = twist.v / p.wheel_radius
        return w, w
    R_l, R_r = wheel_icr_radii(R, p)
    # a wheel between the robot center and the ICR rolls backwards relative to its heading
    s_l = 1.0 if R - p.track / 2 >= 0 else -1.0
    s_r = 1.0 if R + p.track / 2 >= 0 else -1.0
    k = twist.omega / p.wheel_radius
    return k * R_l * s_l, k * R_r * s_r


def wheel_state_from_twist(
    twist: ChassisTwist, prev: WheelState, dt: float, p: RobotParams
) -> WheelState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    phi_l, phi_r, _ = steering_angles(twist, p)
    omega_l, omega_r = wheel_speeds(twist, p)
    return WheelState(
        phi_l=phi_l,
        phi_r=phi_r,
        omega_l=omega_l,
        omega_r=omega_r,
        phi_dot_l=(phi_l - prev.phi_l) / dt,
        phi_dot_r=(phi_r - prev.phi_r) / dt,
    )


def twist_from_wheel_state(ws: WheelState, p: RobotParams, rtol: float = 1e-6) -> ChassisTwist:
    """Recover the chassis twist from one side's wheel state and cross-check the other side."""
    if abs(ws.phi_l) >= math.pi / 2:
        raise ValueError("|phi_l| must be < pi/2")
    half_l, half_w, r = p.wheelbase / 2, p.track / 2, p.wheel_radius

    def close(a, b, scale):
        return abs(a - b) <= rtol * max(scale, 1e-12)

    if ws.phi_l == 0.0:
        if ws.phi_r != 0.0 or not close(ws.omega_l, ws.omega_r, max(abs(ws.omega_l), abs(ws.omega_r))):
            raise InconsistentWheelState("straight left wheel but right wheel disagrees")
        return ChassisTwist(ws.omega_l * r, 0.0)

    R = half_w + half_l / math.tan(ws.phi_l)
    if ws.phi_r == 0.0:
        raise InconsistentWheelState("left wheel steers but right wheel is straight")
    R_from_right = -half_w + half_l / math.tan(ws.phi_r)
    if not close(R, R_from_right, max(abs(R), p.wheelbase)):
        raise InconsistentWheelState(f"ICR radius mismatch: left {R:.9g} vs right {R_from_right:.9g}")

    R_l, R_r = wheel_icr_radii(R, p)
    s_l = 1.0 if R - half_w >= 0 else -1.0
    omega = ws.omega_l * r / (R_l * s_l)
    s_r = 1.0 if R + half_w >= 0 else -1.0
    expected_r = omega / r * R_r * s_r
    if not close(ws.omega_r, expected_r, max(abs(ws.omega_r), abs(expected_r))):
        raise InconsistentWheelState(f"spin mismatch: right {ws.omega_r:.9g} vs expected {expected_r:.9g}")
    return ChassisTwist(omega * R, omega)


def max_yaw_rate(v: float, p: RobotParams) -> float:
    return abs(v) / p.min_turn_radius


def clamp_twist(v: float, omega: float, p: RobotParams) -> ChassisTwist:
    """Clamp to the velocity limits, then to the steering-feasible yaw rate for this v."""
    v = max(-p.v_max, min(p.v_max, v))
    limit = min(p.omega_max, max_yaw_rate(v, p))
    omega = max(-limit, min(limit, omega))
    return ChassisTwist(v, omega)
