"""Sequential, seeded training loop: environment interaction, HER storage, agent updates."""
from __future__ import annotations

from collections import deque

import numpy as np

from . import checkpoint
from .agent import AgentConfig, CrossQAgent, NetworkConfig
from .environment import DasmrEnv, StepInfo
from .replay import HERConfig, HerReplayBuffer, Transition
from .seeding import named_rng


class Trainer:
    """Owns the environment, replay buffer, agent and every random stream of one run."""

    def __init__(self, env, agent_cfg: AgentConfig = AgentConfig(), net_cfg: NetworkConfig = NetworkConfig(),
                 her_cfg: HERConfig = HERConfig(), capacity: int = 1_000_000,
                 log_every_episodes: int = 10, rolling_window: int = 100):
        seed = agent_cfg.seed
        self.env = env
        self.env.rng = named_rng(seed, "env")
        self.cfg = agent_cfg
        self.agent = CrossQAgent(env.obs_dim, env.act_dim, agent_cfg, net_cfg, rng=named_rng(seed, "init"))
        self.buffer = HerReplayBuffer(capacity, env.obs_dim, env.act_dim, env, her_cfg)
        self.agent_rng = named_rng(seed, "agent")
        self.replay_rng = named_rng(seed, "replay")
        self.explore_rng = named_rng(seed, "explore")
        self.log_every = log_every_episodes
        self.window = deque(maxlen=rolling_window)
        self.env_steps = 0
        self.episodes = 0
        self.episode_return = 0.0
        self.obs = None
        self.transitions: list = []
        self.last_losses: dict = {}

    @property
    def rolling_success_rate(self) -> float:
        return sum(s for s, _ in self.window) / len(self.window) if self.window else 0.0

    def train_step(self):
        """Advance one environment step (plus at most one gradient update); return a log record or None."""
        if self.obs is None:
            self.obs = self.env.reset()
            self.transitions = []
            self.episode_return = 0.0
        if self.env_steps < self.cfg.learning_starts:
            action = self.explore_rng.uniform(-1.0, 1.0, size=self.env.act_dim)
        else:
            action = self.agent.act(self.obs, deterministic=False, rng=self.explore_rng).astype(np.float64)
        next_obs, reward, terminated, truncated, info = self.env.step(action)
        self.transitions.append(Transition(
            obs=self.obs, action=action, reward=reward, next_obs=next_obs, terminated=terminated,
            info=info, episode_id=self.episodes, step_in_episode=len(self.transitions),
        ))
        self.env_steps += 1
        self.episode_return += reward
        self.obs = next_obs

        record = None
        if terminated or truncated:
            self.buffer.store_episode(self.transitions)
            self.episodes += 1
            self.window.append((bool(info.success), self.episode_return))
            self.obs = None
            if self.episodes % self.log_every == 0:
                record = self._log_record()

        if self.env_steps > self.cfg.learning_starts and len(self.buffer) > 0:
            batch = self.buffer.sample_batch(self.cfg.batch_size, self.replay_rng)
            self.last_losses.update(self.agent.update(batch, self.agent_rng))
        return record

    def _log_record(self) -> dict:
        returns = [r for _, r in self.window]
        rec = {
            "episode": self.episodes,
            "step": self.env_steps,
            "return": float(np.mean(returns)),
            "success_rate": self.rolling_success_rate,
            "alpha": self.agent.alpha,
        }
        for key in ("critic_loss", "actor_loss", "alpha_loss"):
            if key in self.last_losses:
                rec[key] = self.last_losses[key]
        return rec

    def run(self, total_steps: int, on_record=None, on_checkpoint=None, checkpoint_every: int = 0):
        while self.env_steps < total_steps:
            rec = self.train_step()
            if rec is not None and on_record is not None:
                on_record(rec)
            if checkpoint_every and on_checkpoint is not None and self.env_steps % checkpoint_every == 0:
                on_checkpoint(self)

    # checkpoint support
    def state(self, extra_meta: dict = None) -> tuple[dict, dict]:
        arrays = {f"agent/{k}": v for k, v in self.agent.state_arrays().items()}
        arrays.update({f"replay/{k}": v for k, v in self.buffer.state_arrays().items()})
        if self.transitions:
            ts = self.transitions
            arrays["episode/obs"] = np.stack([t.obs for t in ts])
            arrays["episode/action"] = np.stack([t.action for t in ts])
            arrays["episode/reward"] = np.array([t.reward for t in ts])
            arrays["episode/next_obs"] = np.stack([t.next_obs for t in ts])
            arrays["episode/terminated"] = np.array([t.terminated for t in ts])
            arrays["episode/achieved"] = np.array([t.info.achieved_goal for t in ts])
            arrays["episode/closest"] = np.array([t.info.closest_distance for t in ts])
            arrays["episode/in_bounds"] = np.array([t.info.in_bounds for t in ts])
            arrays["episode/success"] = np.array([t.info.success for t in ts])
        if self.obs is not None:
            arrays["episode/current_obs"] = np.asarray(self.obs)
        meta = {
            "env_steps": self.env_steps,
            "episodes": self.episodes,
            "episode_return": self.episode_return,
            "window": [list(w) for w in self.window],
            "last_losses": self.last_losses,
            "agent": self.agent.state_meta(),
            "replay": self.buffer.state_meta(),
            "env": self.env.get_state(),
            "rng": {name: getattr(self, f"{name}_rng").bit_generator.state
                    for name in ("agent", "replay", "explore")},
        }
        if extra_meta:
            meta.update(extra_meta)
        return meta, arrays

    def load_state(self, meta: dict, arrays: dict) -> None:
        self.env_steps = meta["env_steps"]
        self.episodes = meta["episodes"]
        self.episode_return = meta["episode_return"]
        self.window.clear()
        self.window.extend((bool(s), r) for s, r in meta["window"])
        self.last_losses = dict(meta["last_losses"])
        self.agent.load_state(meta["agent"], _prefixed(arrays, "agent/"))
        self.buffer.load_state(meta["replay"], _prefixed(arrays, "replay/"))
        self.env.set_state(meta["env"])
        for name, st in meta["rng"].items():
            getattr(self, f"{name}_rng").bit_generator.state = st
        self.obs = arrays.get("episode/current_obs")
        self.transitions = []
        if "episode/obs" in arrays:
            for k in range(len(arrays["episode/obs"])):
                info = StepInfo(
                    achieved_goal=tuple(float(v) for v in arrays["episode/achieved"][k]),
                    closest_distance=float(arrays["episode/closest"][k]),
                    in_bounds=bool(arrays["episode/in_bounds"][k]),
                    success=bool(arrays["episode/success"][k]),
                )
                self.transitions.append(Transition(
                    obs=arrays["episode/obs"][k], action=arrays["episode/action"][k],
                    reward=float(arrays["episode/reward"][k]), next_obs=arrays["episode/next_obs"][k],
                    terminated=bool(arrays["episode/terminated"][k]), info=info,
                    episode_id=self.episodes, step_in_episode=k,
                ))

    def save(self, path, extra_meta: dict = None) -> None:
        meta, arrays = self.state(extra_meta)
        checkpoint.save(path, meta, arrays)


def _prefixed(arrays: dict, prefix: str) -> dict:
    return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}


def build_trainer(cfg) -> Trainer:
    """Trainer for the DASMR task from a RunConfig."""
    env = DasmrEnv(cfg.world, cfg.robot)
    return Trainer(
        env, cfg.agent, cfg.network, cfg.replay.her_config(), cfg.replay.capacity,
        cfg.run.log_every_episodes, cfg.run.rolling_window,
    )
