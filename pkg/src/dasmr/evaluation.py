"""Policy evaluation: success rate, final-error statistics and SPL."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environment import DasmrEnv, WorldConfig
from .kinematics import RobotParams
from .seeding import named_rng

UNSEEN_SEED_XOR = 0x5EED_CAFE


class InfeasibleGoal(ValueError):
    pass


@dataclass
class EpisodeResult:
    success: bool
    final_error: float
    path_length: float
    shortest_path: float
    goal: tuple = (0.0, 0.0)
    # rows of (step, t, x, y, theta, v, omega, phi_l, phi_r, reward, closest_distance)
    trajectory: list = field(default_factory=list)


@dataclass
class EvalMetrics:
    SR: float
    AE: float
    sigma: float
    SPL: float
    episodes: int
    seed_mode: str
    AE_failures: float = float("nan")
    sigma_failures: float = float("nan")

    def summary(self) -> str:
        return f"SR {self.SR:.1f}%  AE {self.AE:.3f} ({self.sigma:.3f}) m  SPL {self.SPL:.3f}  [{self.seed_mode}, n={self.episodes}]"


def _segment_point_distance(a, b, c) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float((c - a) @ ab) / denom))
    return float(np.linalg.norm(a + t * ab - c))


def shortest_path_length(start, goal, obstacle_center, radius: float) -> float:
    """Length of the shortest planar path from start to goal that avoids an open disc.

    Straight segment when it clears the disc, otherwise tangent-arc-tangent around
    the nearer side.
    """
    s, g, c = (np.asarray(v, dtype=np.float64) for v in (start, goal, obstacle_center))
    ds, dg = np.linalg.norm(s - c), np.linalg.norm(g - c)
    if ds < radius:
        raise InfeasibleGoal("start inside inflated obstacle")
    if dg < radius:
        raise InfeasibleGoal("goal inside inflated obstacle")
    straight = float(np.linalg.norm(g - s))
    if radius <= 0 or _segment_point_distance(s, g, c) >= radius:
        return straight
    us, ug = (s - c) / ds, (g - c) / dg
    between = math.acos(max(-1.0, min(1.0, float(us @ ug))))
    arc = between - math.acos(radius / ds) - math.acos(radius / dg)
    tangents = math.sqrt(max(ds * ds - radius * radius, 0.0)) + math.sqrt(max(dg * dg - radius * radius, 0.0))
    return tangents + radius * max(arc, 0.0)


def inflated_radius(world: WorldConfig) -> float:
    return world.obstacle_radius + world.footprint_width / 2


def reference_path_length(start, goal, world: WorldConfig) -> float:
    """Shortest center path used as the SPL reference; clearance shrinks for goals inside the inflated disc."""
    c = np.asarray(world.obstacle_center, dtype=np.float64)
    rho = min(
        inflated_radius(world),
        float(np.linalg.norm(np.asarray(start) - c)),
        float(np.linalg.norm(np.asarray(goal) - c)),
    )
    return shortest_path_length(start, goal, c, rho)


def spl(results) -> float:
    if not results:
        return 0.0
    total = 0.0
    for r in results:
        if r.success:
            total += r.shortest_path / max(r.path_length, r.shortest_path)
    return total / len(results)


def aggregate_error(results) -> tuple[float, float]:
    """Mean and population standard deviation of the final error over all episodes."""
    errs = np.array([r.final_error for r in results], dtype=np.float64)
    if errs.size == 0:
        return float("nan"), float("nan")
    return float(errs.mean()), float(errs.std())


def summarize(results, seed_mode: str) -> EvalMetrics:
    n = len(results)
    ae, sigma = aggregate_error(results)
    failures = [r for r in results if not r.success]
    ae_f, sigma_f = aggregate_error(failures)
    return EvalMetrics(
        SR=100.0 * sum(r.success for r in results) / n if n else 0.0,
        AE=ae, sigma=sigma, SPL=spl(results), episodes=n, seed_mode=seed_mode,
        AE_failures=ae_f, sigma_failures=sigma_f,
    )


def run_episode(env: DasmrEnv, policy, goal=None) -> EpisodeResult:
    """Roll out one episode with ``policy(obs) -> action``; the reset state is recorded as step 0."""
    obs = env.reset(goal=goal)
    world = env.world
    s = env.state
    start = (s.x, s.y)
    rows = [(0, 0.0, s.x, s.y, s.theta, 0.0, 0.0, 0.0, 0.0, 0.0, env.info().closest_distance)]
    path = 0.0
    info = env.info()
    success = info.success
    if not success:
        while True:
            prev = (env.state.x, env.state.y)
            obs, reward, terminated, truncated, info = env.step(policy(obs))
            s = env.state
            path += math.hypot(s.x - prev[0], s.y - prev[1])
            rows.append((s.step_index, s.step_index * world.dt, s.x, s.y, s.theta, s.twist.v, s.twist.omega,
                         s.wheels.phi_l, s.wheels.phi_r, reward, info.closest_distance))
            if terminated or truncated:
                break
        success = info.success
    s = env.state
    return EpisodeResult(
        success=bool(success),
        final_error=math.hypot(s.goal[0] - s.x, s.goal[1] - s.y),
        path_length=path,
        shortest_path=reference_path_length(start, s.goal, world),
        goal=s.goal,
        trajectory=rows,
    )


def goal_stream(seed: int, seed_mode: str) -> np.random.Generator:
    if seed_mode == "seen":
        return named_rng(seed, "env")
    if seed_mode == "unseen":
        return named_rng(seed ^ UNSEEN_SEED_XOR, "env")
    raise ValueError(f"seed_mode must be 'seen' or 'unseen', got {seed_mode!r}")


def run_eval(policy, n_episodes: int, seed_mode: str, world: WorldConfig = WorldConfig(),
             robot: RobotParams = RobotParams(), seed: int = 9527):
    """Deterministic rollouts on the training goal stream ("seen") or a disjoint one ("unseen")."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    env = DasmrEnv(world, robot, rng=goal_stream(seed, seed_mode))
    results = [run_episode(env, policy) for _ in range(n_episodes)]
    return summarize(results, seed_mode), results
