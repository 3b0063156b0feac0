"""Soft actor-critic with batch-normalized twin critics and no target networks.

The critics see current and next state-action pairs in one joint train-mode
batch, so their normalization statistics mix both distributions; the bootstrap
target comes from the same forward pass and is treated as a constant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import MLP, Adam, MLPSpec, squashed_gaussian, squashed_gaussian_backward


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    batch_size: int = 256
    total_steps: int = 300_000
    learning_starts: int = 1_000
    policy_delay: int = 3
    entropy_target: float = -2.0
    init_log_alpha: float = 0.0
    seed: int = 9527
    learning_rate: float = 3e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.batch_size < 1 or self.policy_delay < 1:
            raise ValueError("batch_size and policy_delay must be >= 1")


@dataclass(frozen=True)
class NetworkConfig:
    actor_hidden: tuple = (256, 256)
    critic_hidden: tuple = (1024, 1024)
    actor_batch_norm: bool = True
    critic_batch_norm: bool = True
    renorm: bool = True
    bn_momentum: float = 0.99
    bn_eps: float = 1e-6
    renorm_r_max: float = 3.0
    renorm_d_max: float = 5.0
    renorm_warmup: int = 10_000
    norm_layout: str = "post"

    def actor_spec(self, obs_dim: int, act_dim: int) -> MLPSpec:
        return self._spec(obs_dim, self.actor_hidden, 2 * act_dim, self.actor_batch_norm)

    def critic_spec(self, obs_dim: int, act_dim: int) -> MLPSpec:
        return self._spec(obs_dim + act_dim, self.critic_hidden, 1, self.critic_batch_norm)

    def _spec(self, in_dim, hidden, out_dim, bn):
        return MLPSpec(
            input_dim=in_dim, hidden_sizes=tuple(hidden), output_dim=out_dim, batch_norm=bn,
            renorm=self.renorm, momentum=self.bn_momentum, eps=self.bn_eps,
            r_max=self.renorm_r_max, d_max=self.renorm_d_max, warmup_steps=self.renorm_warmup,
            norm_layout=self.norm_layout,
        )


class CrossQAgent:
    NETWORKS = ("actor", "critic1", "critic2")

    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig = AgentConfig(),
                 net: NetworkConfig = NetworkConfig(), rng: np.random.Generator = None):
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.cfg, self.net = cfg, net
        self.actor = MLP(net.actor_spec(obs_dim, act_dim), rng)
        self.critic1 = MLP(net.critic_spec(obs_dim, act_dim), rng)
        self.critic2 = MLP(net.critic_spec(obs_dim, act_dim), rng)
        self.log_alpha = {"log_alpha": np.array([cfg.init_log_alpha], np.float32)}
        self.optimizers = {
            name: self._adam(getattr(self, name).trainable()) for name in self.NETWORKS
        }
        self.optimizers["alpha"] = self._adam(self.log_alpha)
        self.grad_steps = 0
        self.actor_updates = 0

    def _adam(self, params):
        c = self.cfg
        return Adam(params, lr=c.learning_rate, beta1=c.adam_beta1, beta2=c.adam_beta2, eps=c.adam_eps)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha["log_alpha"][0]))

    def _policy(self, obs, noise, train: bool, update_stats=None):
        out, cache = self.actor.forward(obs, train=train, update_stats=update_stats)
        a = self.act_dim
        action, log_prob, sq = squashed_gaussian(out[:, :a], out[:, a:], noise)
        return action, log_prob, (cache, sq)

    def act(self, obs, deterministic: bool = True, rng: np.random.Generator = None) -> np.ndarray:
        obs = np.asarray(obs, np.float32)
        single = obs.ndim == 1
        obs2 = obs[None] if single else obs
        if obs2.shape[1] != self.obs_dim:
            raise ValueError(f"observation must have {self.obs_dim} entries")
        if deterministic:
            out, _ = self.actor.forward(obs2, train=False)
            action = np.tanh(out[:, : self.act_dim])
        else:
            noise = rng.standard_normal((len(obs2), self.act_dim)).astype(np.float32)
            action, _, _ = self._policy(obs2, noise, train=False)
        return action[0] if single else action

    def critic_loss(self, batch, rng: np.random.Generator, update_stats: bool = True):
        """Joint-batch critic regression. Returns (loss, grads per critic, info)."""
        n = len(batch)
        noise = rng.standard_normal((n, self.act_dim)).astype(np.float32)
        next_action, next_log_prob, _ = self._policy(batch.next_obs, noise, train=False)
        outs = self._joint_forward(batch.obs, batch.action, batch.next_obs, next_action, update_stats)
        q_next = np.minimum(outs[0][0][n:, 0], outs[1][0][n:, 0]).astype(np.float64)
        not_done = 1.0 - batch.terminated.astype(np.float64)
        target = batch.reward.astype(np.float64) + self.cfg.gamma * not_done * (
            q_next - self.alpha * next_log_prob
        )
        loss, grads, info = self._regress(outs, target, n)
        info["next_action"] = next_action
        return loss, grads, info

    def frozen_target_loss(self, obs, action, next_obs, next_action, target):
        """Critic loss of the joint forward against a fixed target, without touching statistics."""
        outs = self._joint_forward(obs, action, next_obs, next_action, update_stats=False)
        return self._regress(outs, np.asarray(target, np.float64), len(obs))

    def _joint_forward(self, obs, action, next_obs, next_action, update_stats):
        joint = np.concatenate(
            [np.concatenate([obs, action], axis=1), np.concatenate([next_obs, next_action], axis=1)],
            axis=0,
        ).astype(np.float32)
        return [c.forward(joint, train=True, update_stats=update_stats) for c in (self.critic1, self.critic2)]

    def _regress(self, outs, target, n):
        losses, grads = [], []
        for critic, (q, cache) in zip((self.critic1, self.critic2), outs):
            err = q[:n, 0].astype(np.float64) - target
            losses.append(float(np.mean(err * err)))
            g = np.zeros_like(q)
            g[:n, 0] = 2.0 * err / n  # no gradient into the bootstrap half
            grads.append(critic.backward(cache, g)[0])
        loss = losses[0] + losses[1]
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite critic loss")
        info = {"critic1_loss": losses[0], "critic2_loss": losses[1], "target": target,
                "caches": [o[1] for o in outs], "q": [o[0] for o in outs]}
        return loss, grads, info

    def actor_and_alpha_loss(self, batch, rng: np.random.Generator, update_stats: bool = True):
        """Returns (actor_loss, actor_grads, alpha_loss, alpha_grad)."""
        n = len(batch)
        noise = rng.standard_normal((n, self.act_dim)).astype(np.float32)
        obs = np.asarray(batch.obs, np.float32)
        action, log_prob, (a_cache, sq) = self._policy(obs, noise, train=True, update_stats=update_stats)
        x = np.concatenate([obs, action], axis=1)
        q1, c1 = self.critic1.forward(x, train=False)
        q2, c2 = self.critic2.forward(x, train=False)
        use1 = q1[:, 0] <= q2[:, 0]
        min_q = np.where(use1, q1[:, 0], q2[:, 0]).astype(np.float64)
        alpha = self.alpha
        actor_loss = float(np.mean(alpha * log_prob - min_q))
        if not np.isfinite(actor_loss):
            raise FloatingPointError("non-finite actor loss")

        g_q1 = np.where(use1, -1.0 / n, 0.0).astype(np.float32)[:, None]
        g_q2 = np.where(use1, 0.0, -1.0 / n).astype(np.float32)[:, None]
        g_x = (self.critic1.backward(c1, g_q1, param_grads=False)[1]
               + self.critic2.backward(c2, g_q2, param_grads=False)[1])
        g_action = g_x[:, self.obs_dim:]
        g_log_prob = np.full(n, alpha / n)
        g_mean, g_log_std = squashed_gaussian_backward(sq, g_action, g_log_prob)
        actor_grads, _ = self.actor.backward(a_cache, np.concatenate([g_mean, g_log_std], axis=1))

        log_alpha = float(self.log_alpha["log_alpha"][0])
        entropy_gap = log_prob + self.cfg.entropy_target
        alpha_loss = float(np.mean(-log_alpha * entropy_gap))
        alpha_grad = {"log_alpha": np.array([-np.mean(entropy_gap)], np.float32)}
        return actor_loss, actor_grads, alpha_loss, alpha_grad

    def update(self, batch, rng: np.random.Generator) -> dict:
        """One critic step; an actor and temperature step every ``policy_delay`` critic steps."""
        loss, grads, info = self.critic_loss(batch, rng)
        self.optimizers["critic1"].step(self.critic1.params, grads[0])
        self.optimizers["critic2"].step(self.critic2.params, grads[1])
        self.grad_steps += 1
        logs = {"critic_loss": loss}
        if self.grad_steps % self.cfg.policy_delay == 0:
            actor_loss, actor_grads, alpha_loss, alpha_grad = self.actor_and_alpha_loss(batch, rng)
            self.optimizers["actor"].step(self.actor.params, actor_grads)
            self.optimizers["alpha"].step(self.log_alpha, alpha_grad)
            self.actor_updates += 1
            logs.update(actor_loss=actor_loss, alpha_loss=alpha_loss)
        logs["alpha"] = self.alpha
        return logs

    # checkpoint support
    def state_arrays(self) -> dict:
        arrays = {}
        for name in self.NETWORKS:
            for k, v in getattr(self, name).params.items():
                arrays[f"{name}/{k}"] = v
        arrays["alpha/log_alpha"] = self.log_alpha["log_alpha"]
        for oname, opt in self.optimizers.items():
            for k in opt.m:
                arrays[f"adam.{oname}.m/{k}"] = opt.m[k]
                arrays[f"adam.{oname}.v/{k}"] = opt.v[k]
        return arrays

    def state_meta(self) -> dict:
        return {
            "grad_steps": self.grad_steps,
            "actor_updates": self.actor_updates,
            "bn_steps": {name: getattr(self, name).bn_steps for name in self.NETWORKS},
            "adam_t": {name: opt.t for name, opt in self.optimizers.items()},
        }

    def load_state(self, meta: dict, arrays: dict) -> None:
        self.grad_steps = meta["grad_steps"]
        self.actor_updates = meta["actor_updates"]
        for name in self.NETWORKS:
            net = getattr(self, name)
            net.bn_steps = meta["bn_steps"][name]
            for k in net.params:
                net.params[k] = np.array(arrays[f"{name}/{k}"], dtype=net.dtype)
        self.log_alpha["log_alpha"] = np.array(arrays["alpha/log_alpha"], np.float32)
        for oname, opt in self.optimizers.items():
            opt.t = meta["adam_t"][oname]
            for k in opt.m:
                opt.m[k] = np.array(arrays[f"adam.{oname}.m/{k}"], np.float32)
                opt.v[k] = np.array(arrays[f"adam.{oname}.v/{k}"], np.float32)
