"""Holonomic 2-D point mass reaching sampled goals; a fast sanity task for the learner.

Shares the goal-conditioned interface of DasmrEnv (achieved goal in observation
slots 0-1, desired goal in 2-3) so the same replay and agent code trains on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import EpisodeFinished, StepInfo, reward_fn, termination_fn


@dataclass(frozen=True)
class PointMassConfig:
    half_extent: float = 1.0
    step_size: float = 0.1
    d_th: float = 0.1
    max_steps: int = 50
    # reward_fn / termination_fn read these
    collision_margin: float = 0.0
    dense_reward_mode: bool = False
    collision_terminates: bool = False


class PointMassEnv:
    obs_dim = 4
    act_dim = 2

    def __init__(self, cfg: PointMassConfig = PointMassConfig(), rng=None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng()
        self.pos = np.zeros(2)
        self.goal = np.zeros(2)
        self.step_index = 0
        self._done = True

    def reset(self, goal=None) -> np.ndarray:
        h = self.cfg.half_extent
        self.pos = self.rng.uniform(-h, h, size=2)
        self.goal = self.rng.uniform(-h, h, size=2) if goal is None else np.asarray(goal, dtype=np.float64)
        self.step_index = 0
        self._done = False
        return self.observation()

    def observation(self) -> np.ndarray:
        return np.concatenate([self.pos, self.goal])

    def info(self) -> StepInfo:
        return StepInfo(
            achieved_goal=(float(self.pos[0]), float(self.pos[1])),
            closest_distance=math.inf,
            in_bounds=True,
            success=bool(np.linalg.norm(self.goal - self.pos) <= self.cfg.d_th),
        )

    def compute_reward(self, achieved, desired, info):
        closest, in_bounds = _fields(info)
        r = reward_fn(achieved, desired, closest, in_bounds, self.cfg)
        return float(r) if np.ndim(r) == 0 else r

    def compute_terminated(self, achieved, desired, info):
        closest, in_bounds = _fields(info)
        t = termination_fn(achieved, desired, closest, in_bounds, self.cfg)
        return bool(t) if np.ndim(t) == 0 else t

    def step(self, action):
        if self._done:
            raise EpisodeFinished("episode finished; call reset()")
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        h = self.cfg.half_extent
        self.pos = np.clip(self.pos + self.cfg.step_size * a, -h, h)
        self.step_index += 1
        info = self.info()
        reward = self.compute_reward(info.achieved_goal, self.goal, info)
        terminated = self.compute_terminated(info.achieved_goal, self.goal, info)
        truncated = not terminated and self.step_index >= self.cfg.max_steps
        self._done = terminated or truncated
        return self.observation(), reward, terminated, truncated, info

    def get_state(self) -> dict:
        return {"pos": self.pos.tolist(), "goal": self.goal.tolist(), "step_index": self.step_index,
                "done": self._done, "rng": self.rng.bit_generator.state}

    def set_state(self, d: dict) -> None:
        self.pos, self.goal = np.array(d["pos"]), np.array(d["goal"])
        self.step_index, self._done = d["step_index"], d["done"]
        self.rng.bit_generator.state = d["rng"]


def _fields(info):
    if isinstance(info, StepInfo):
        return info.closest_distance, info.in_bounds
    return info["closest_distance"], info["in_bounds"]
