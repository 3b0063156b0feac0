"""Episode-aware replay storage with hindsight goal relabeling ("future" strategy)."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .environment import GOAL_SLICE, StepInfo


class EmptyBufferError(RuntimeError):
    pass


@dataclass(frozen=True)
class HERConfig:
    n_sampled_goal: int = 16
    strategy: str = "future"
    enabled: bool = True

    def __post_init__(self):
        if self.n_sampled_goal < 1:
            raise ValueError("n_sampled_goal must be >= 1")
        if self.strategy != "future":
            raise ValueError(f"unsupported goal selection strategy {self.strategy!r}")

    @property
    def relabel_probability(self) -> float:
        if not self.enabled:
            return 0.0
        return self.n_sampled_goal / (self.n_sampled_goal + 1)


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    terminated: bool
    info: StepInfo
    episode_id: int
    step_in_episode: int


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    terminated: np.ndarray
    goal: np.ndarray
    relabeled: np.ndarray
    index: np.ndarray
    future_index: np.ndarray  # -1 where not relabeled

    def __len__(self):
        return len(self.reward)


def relabel(t: Transition, new_goal, env) -> Transition:
    """Copy of ``t`` pursuing ``new_goal``, with reward and termination recomputed from its info."""
    obs = np.array(t.obs, copy=True)
    next_obs = np.array(t.next_obs, copy=True)
    obs[GOAL_SLICE] = new_goal
    next_obs[GOAL_SLICE] = new_goal
    return replace(
        t,
        obs=obs,
        next_obs=next_obs,
        reward=env.compute_reward(t.info.achieved_goal, new_goal, t.info),
        terminated=env.compute_terminated(t.info.achieved_goal, new_goal, t.info),
    )


class HerReplayBuffer:
    """Ring storage indexed by an ever-increasing transition counter.

    Slot of absolute index ``g`` is ``g % capacity``. Live transitions are the
    contiguous absolute range ``[lo, hi)``; episodes are evicted whole from the front.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, env, her: HERConfig = HERConfig()):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.env = env
        self.her = her
        self.obs = np.zeros((capacity, obs_dim), np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), np.float32)
        self.action = np.zeros((capacity, act_dim), np.float32)
        self.reward = np.zeros(capacity, np.float32)
        self.terminated = np.zeros(capacity, bool)
        self.achieved = np.zeros((capacity, 2), np.float32)
        self.closest = np.zeros(capacity, np.float32)
        self.in_bounds = np.zeros(capacity, bool)
        self.ep_start = np.zeros(capacity, np.int64)
        self.ep_len = np.zeros(capacity, np.int64)
        self.episodes: deque = deque()  # (episode_id, abs_start, length)
        self.lo = 0
        self.hi = 0

    def __len__(self):
        return self.hi - self.lo

    def store_episode(self, transitions: list) -> None:
        n = len(transitions)
        if n == 0:
            raise ValueError("cannot store an empty episode")
        if n > self.capacity:
            raise ValueError(f"episode of {n} steps exceeds capacity {self.capacity}")
        ep_id = transitions[0].episode_id
        for k, t in enumerate(transitions):
            if t.episode_id != ep_id:
                raise ValueError("transitions span more than one episode")
            if t.step_in_episode != k:
                raise ValueError(f"non-contiguous step index {t.step_in_episode} at position {k}")
        while len(self) + n > self.capacity:
            _, start, length = self.episodes.popleft()
            self.lo = start + length
        start = self.hi
        slots = (start + np.arange(n)) % self.capacity
        self.obs[slots] = np.stack([t.obs for t in transitions])
        self.next_obs[slots] = np.stack([t.next_obs for t in transitions])
        self.action[slots] = np.stack([t.action for t in transitions])
        self.reward[slots] = [t.reward for t in transitions]
        self.terminated[slots] = [t.terminated for t in transitions]
        self.achieved[slots] = [t.info.achieved_goal for t in transitions]
        self.closest[slots] = [t.info.closest_distance for t in transitions]
        self.in_bounds[slots] = [t.info.in_bounds for t in transitions]
        self.ep_start[slots] = start
        self.ep_len[slots] = n
        self.episodes.append((ep_id, start, n))
        self.hi = start + n

    def sample_batch(self, n: int, rng: np.random.Generator) -> Batch:
        if len(self) == 0:
            raise EmptyBufferError("empty buffer")
        idx = rng.integers(self.lo, self.hi, size=n)
        slots = idx % self.capacity
        k = idx - self.ep_start[slots]
        length = self.ep_len[slots]
        has_future = k < length - 1
        relabeled = (rng.random(n) < self.her.relabel_probability) & has_future
        # uniform strictly-later step; bounds made valid where no future exists
        low = np.where(has_future, k + 1, 0)
        high = np.where(has_future, length, 1)
        future_k = rng.integers(low, high)
        future_idx = np.where(relabeled, self.ep_start[slots] + future_k, -1)

        obs = self.obs[slots].copy()
        next_obs = self.next_obs[slots].copy()
        goal = obs[:, GOAL_SLICE].copy()
        fslots = future_idx[relabeled] % self.capacity
        goal[relabeled] = self.achieved[fslots]
        obs[:, GOAL_SLICE] = goal
        next_obs[:, GOAL_SLICE] = goal

        info = {"closest_distance": self.closest[slots], "in_bounds": self.in_bounds[slots]}
        achieved = self.achieved[slots]
        reward = np.asarray(self.env.compute_reward(achieved, goal, info), dtype=np.float32)
        terminated = np.asarray(self.env.compute_terminated(achieved, goal, info), dtype=bool)
        return Batch(
            obs=obs, action=self.action[slots].copy(), reward=reward, next_obs=next_obs,
            terminated=terminated, goal=goal, relabeled=relabeled, index=idx, future_index=future_idx,
        )

    # checkpoint support
    def state_arrays(self) -> dict:
        slots = np.arange(self.lo, self.hi) % self.capacity
        names = ("obs", "next_obs", "action", "reward", "terminated", "achieved",
                 "closest", "in_bounds", "ep_start", "ep_len")
        return {name: getattr(self, name)[slots] for name in names}

    def state_meta(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "episodes": [list(e) for e in self.episodes]}

    def load_state(self, meta: dict, arrays: dict) -> None:
        self.lo, self.hi = meta["lo"], meta["hi"]
        self.episodes = deque(tuple(e) for e in meta["episodes"])
        slots = np.arange(self.lo, self.hi) % self.capacity
        for name, arr in arrays.items():
            getattr(self, name)[slots] = arr
