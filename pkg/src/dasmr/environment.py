"""Goal-conditioned kinematic simulation of a DASMR around a single obstacle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import ChassisTwist, RobotParams, WheelState, clamp_twist, wheel_state_from_twist

OBS_DIM = 16
ACT_DIM = 2
ACHIEVED_SLICE = slice(0, 2)
GOAL_SLICE = slice(2, 4)

REWARD_OUT_OF_BOUNDS = -100.0
REWARD_COLLISION = -10.0
REWARD_SUCCESS = 1.0
REWARD_STEP = -1.0


class EpisodeFinished(RuntimeError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    workspace_half: float = 4.0
    obstacle_center: tuple = (0.0, 0.8)
    obstacle_radius: float = 0.30
    goal_box: tuple = (-2.0, 2.0, 0.8, 2.0)  # x_min, x_max, y_min, y_max
    d_th: float = 0.15
    dt: float = 1.0 / 40.0
    max_steps: int = 800
    collision_margin: float = 0.05
    footprint_length: float = 0.90
    footprint_width: float = 0.65
    dense_reward_mode: bool = False
    collision_terminates: bool = False
    integrator: str = "exact"

    def __post_init__(self):
        x0, x1, y0, y1 = self.goal_box
        h = self.workspace_half
        if not (x0 <= x1 and y0 <= y1 and -h <= x0 and x1 <= h and -h <= y0 and y1 <= h):
            raise ValueError(f"goal_box {self.goal_box} must lie inside the workspace")
        if self.d_th <= 0 or self.dt <= 0 or self.obstacle_radius <= 0:
            raise ValueError("d_th, dt and obstacle_radius must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.integrator not in ("exact", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass
class StepInfo:
    achieved_goal: tuple
    closest_distance: float
    in_bounds: bool
    success: bool


@dataclass
class SimState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    twist: ChassisTwist = field(default_factory=ChassisTwist)
    wheels: WheelState = field(default_factory=WheelState)
    goal: tuple = (0.0, 0.0)
    step_index: int = 0


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def in_workspace(point, world: WorldConfig = WorldConfig()):
    """Closed-square membership test of a center position; vectorizes over (..., 2) arrays."""
    p = np.asarray(point, dtype=np.float64)
    inside = np.all(np.abs(p) <= world.workspace_half, axis=-1)
    return bool(inside) if inside.ndim == 0 else inside


def closest_distance(x, y, theta, world: WorldConfig = WorldConfig()):
    """Signed gap between the oriented footprint rectangle and the obstacle disc.

    Negative values are penetration depth. Broadcasts over array inputs.
    """
    ox, oy = world.obstacle_center
    dx, dy = ox - np.asarray(x, dtype=np.float64), oy - np.asarray(y, dtype=np.float64)
    c, s = np.cos(theta), np.sin(theta)
    # obstacle center in the robot frame
    lx = np.abs(c * dx + s * dy) - world.footprint_length / 2
    ly = np.abs(-s * dx + c * dy) - world.footprint_width / 2
    outside = np.hypot(np.maximum(lx, 0.0), np.maximum(ly, 0.0))
    inside = np.minimum(np.maximum(lx, ly), 0.0)
    d = outside + inside - world.obstacle_radius
    return float(d) if np.ndim(d) == 0 else d


def reward_fn(achieved, desired, closest, in_bounds, world: WorldConfig):
    """Vectorized reward with precedence out-of-bounds > success > collision > step."""
    achieved = np.asarray(achieved, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    dist = np.linalg.norm(desired - achieved, axis=-1)
    success = dist <= world.d_th
    collision = np.asarray(closest) < world.collision_margin
    if world.dense_reward_mode:
        reward = np.where(collision & ~success, REWARD_COLLISION, -dist)
    else:
        reward = np.where(success, REWARD_SUCCESS, np.where(collision, REWARD_COLLISION, REWARD_STEP))
    reward = np.where(np.asarray(in_bounds), reward, REWARD_OUT_OF_BOUNDS)
    return reward


def termination_fn(achieved, desired, closest, in_bounds, world: WorldConfig):
    dist = np.linalg.norm(np.asarray(desired, np.float64) - np.asarray(achieved, np.float64), axis=-1)
    done = (dist <= world.d_th) | ~np.asarray(in_bounds, dtype=bool)
    if world.collision_terminates:
        done = done | (np.asarray(closest) < world.collision_margin)
    return done


class DasmrEnv:
    """Single-obstacle maneuvering task with a sparse, relabelable goal reward.

    Observation layout (16 floats): x_c, y_c, x_d, y_d, theta_c, omega_l, omega_r,
    phi_l, phi_r, phi_dot_l, phi_dot_r, xdot_c, ydot_c, omega_c, x_o, y_o.
    """

    obs_dim = OBS_DIM
    act_dim = ACT_DIM

    def __init__(self, world: WorldConfig = WorldConfig(), robot: RobotParams = RobotParams(), rng=None):
        self.world = world
        self.robot = robot
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = SimState()
        self._done = True

    def sample_goal(self) -> tuple:
        x0, x1, y0, y1 = self.world.goal_box
        g = self.rng.uniform((x0, y0), (x1, y1))
        return float(g[0]), float(g[1])

    def reset(self, goal=None) -> np.ndarray:
        if goal is None:
            goal = self.sample_goal()
        self.state = SimState(goal=(float(goal[0]), float(goal[1])))
        self._done = False
        return self.observation()

    def observation(self) -> np.ndarray:
        s = self.state
        w = s.wheels
        ox, oy = self.world.obstacle_center
        return np.array(
            [
                s.x, s.y, s.goal[0], s.goal[1], s.theta,
                w.omega_l, w.omega_r, w.phi_l, w.phi_r, w.phi_dot_l, w.phi_dot_r,
                s.twist.v * math.cos(s.theta), s.twist.v * math.sin(s.theta), s.twist.omega,
                ox, oy,
            ],
            dtype=np.float64,
        )

    def info(self) -> StepInfo:
        s = self.state
        return StepInfo(
            achieved_goal=(s.x, s.y),
            closest_distance=closest_distance(s.x, s.y, s.theta, self.world),
            in_bounds=in_workspace((s.x, s.y), self.world),
            success=math.hypot(s.goal[0] - s.x, s.goal[1] - s.y) <= self.world.d_th,
        )

    def compute_reward(self, achieved, desired, info):
        """Reward of reaching ``achieved`` while pursuing ``desired``.

        ``info`` is a StepInfo or a mapping with ``closest_distance`` and
        ``in_bounds`` arrays (batched relabeling).
        """
        closest, in_bounds = _info_fields(info)
        r = reward_fn(achieved, desired, closest, in_bounds, self.world)
        return float(r) if np.ndim(r) == 0 else r

    def compute_terminated(self, achieved, desired, info):
        closest, in_bounds = _info_fields(info)
        t = termination_fn(achieved, desired, closest, in_bounds, self.world)
        return bool(t) if np.ndim(t) == 0 else t

    def _actuate(self, action) -> ChassisTwist:
        p = self.robot
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        cmd = clamp_twist(float(a[0]) * p.v_max, float(a[1]) * p.omega_max, p)
        tau = p.twist_time_constant
        if tau <= 0:
            return cmd
        alpha = 1.0 - math.exp(-self.world.dt / tau)
        prev = self.state.twist
        v = prev.v + alpha * (cmd.v - prev.v)
        omega = prev.omega + alpha * (cmd.omega - prev.omega)
        return clamp_twist(v, omega, p)

    def _integrate(self, twist: ChassisTwist):
        s, dt = self.state, self.world.dt
        v, w = twist.v, twist.omega
        if self.world.integrator == "euler" or w == 0.0:
            x = s.x + v * math.cos(s.theta) * dt
            y = s.y + v * math.sin(s.theta) * dt
        else:
            # exact arc for a twist held constant over dt
            th1 = s.theta + w * dt
            x = s.x + v / w * (math.sin(th1) - math.sin(s.theta))
            y = s.y - v / w * (math.cos(th1) - math.cos(s.theta))
        return x, y, wrap_angle(s.theta + w * dt)

    def step(self, action):
        if self._done:
            raise EpisodeFinished("episode finished; call reset()")
        twist = self._actuate(action)
        x, y, theta = self._integrate(twist)
        wheels = wheel_state_from_twist(twist, self.state.wheels, self.world.dt, self.robot)
        self.state = replace(
            self.state, x=x, y=y, theta=theta, twist=twist, wheels=wheels, step_index=self.state.step_index + 1
        )
        info = self.info()
        reward = self.compute_reward(info.achieved_goal, self.state.goal, info)
        terminated = self.compute_terminated(info.achieved_goal, self.state.goal, info)
        truncated = not terminated and self.state.step_index >= self.world.max_steps
        self._done = terminated or truncated
        return self.observation(), reward, terminated, truncated, info

    # checkpoint support
    def get_state(self) -> dict:
        s = self.state
        return {
            "x": s.x, "y": s.y, "theta": s.theta, "v": s.twist.v, "omega": s.twist.omega,
            "wheels": [s.wheels.phi_l, s.wheels.phi_r, s.wheels.omega_l, s.wheels.omega_r,
                       s.wheels.phi_dot_l, s.wheels.phi_dot_r],
            "goal": list(s.goal), "step_index": s.step_index, "done": self._done,
            "rng": self.rng.bit_generator.state,
        }

    def set_state(self, d: dict):
        self.state = SimState(
            x=d["x"], y=d["y"], theta=d["theta"], twist=ChassisTwist(d["v"], d["omega"]),
            wheels=WheelState(*d["wheels"]), goal=tuple(d["goal"]), step_index=d["step_index"],
        )
        self._done = d["done"]
        self.rng.bit_generator.state = d["rng"]


def _info_fields(info):
    if isinstance(info, StepInfo):
        return info.closest_distance, info.in_bounds
    return info["closest_distance"], info["in_bounds"]
