"""Small dense-network toolkit with hand-written reverse-mode gradients.

Two block layouts are supported. ``"pre"`` stacks affine -> batch (re)normalization
-> ReLU; ``"post"`` normalizes the raw input once and then stacks affine -> ReLU ->
normalization, the arrangement used by common CrossQ implementations. Both end in a
linear output layer. Parameters live in a flat ``dict[str, ndarray]`` so optimizers
and checkpoints can treat every network the same way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
NORM_LAYOUTS = ("pre", "post")


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    hidden_sizes: tuple = (256, 256)
    output_dim: int = 1
    batch_norm: bool = True
    renorm: bool = True
    momentum: float = 0.99
    eps: float = 1e-6
    r_max: float = 3.0
    d_max: float = 5.0
    warmup_steps: int = 10_000
    norm_layout: str = "pre"

    def __post_init__(self):
        if self.norm_layout not in NORM_LAYOUTS:
            raise ValueError(f"norm_layout must be one of {NORM_LAYOUTS}")


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}")


class MLP:
    """Fully-connected network with optional batch renormalization in every hidden block."""

    def __init__(self, spec: MLPSpec, rng: np.random.Generator, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.bn_steps = 0
        self.params: dict[str, np.ndarray] = {}
        if spec.batch_norm and spec.norm_layout == "post":
            self._add_norm("in", spec.input_dim)
        sizes = [spec.input_dim, *spec.hidden_sizes]
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.params[f"l{i}.W"] = (rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)).astype(dtype)
            self.params[f"l{i}.b"] = np.zeros(fan_out, dtype)
            if spec.batch_norm:
                self._add_norm(f"l{i}", fan_out)
        fan_in = sizes[-1]
        self.params["out.W"] = (rng.standard_normal((fan_in, spec.output_dim)) / math.sqrt(fan_in)).astype(dtype)
        self.params["out.b"] = np.zeros(spec.output_dim, dtype)

    def _add_norm(self, name, width):
        self.params[f"{name}.gamma"] = np.ones(width, self.dtype)
        self.params[f"{name}.beta"] = np.zeros(width, self.dtype)
        self.params[f"{name}.running_mean"] = np.zeros(width, self.dtype)
        self.params[f"{name}.running_var"] = np.ones(width, self.dtype)

    @property
    def n_hidden(self) -> int:
        return len(self.spec.hidden_sizes)

    def trainable(self) -> dict:
        return {k: v for k, v in self.params.items() if not k.endswith(("running_mean", "running_var"))}

    def _renorm_limits(self):
        if not self.spec.renorm:
            return 1.0, 0.0
        t = min(self.bn_steps / self.spec.warmup_steps, 1.0) if self.spec.warmup_steps > 0 else 1.0
        return 1.0 + (self.spec.r_max - 1.0) * t, self.spec.d_max * t

    def _norm(self, name, z, train, update_stats, limits):
        """Batch renormalization of z; returns (y, record for backward)."""
        spec, p = self.spec, self.params
        gamma, beta = p[f"{name}.gamma"], p[f"{name}.beta"]
        rm, rv = p[f"{name}.running_mean"], p[f"{name}.running_var"]
        run_std = np.sqrt(rv.astype(np.float64) + spec.eps)
        if not train:
            xhat = (z - rm) / run_std.astype(self.dtype)
            return gamma * xhat + beta, {"xhat": xhat, "std": run_std.astype(self.dtype), "gamma": gamma}
        r_max, d_max = limits
        mu = z.mean(axis=0, dtype=np.float64)
        zc = z - mu.astype(self.dtype)
        var = np.mean(np.square(zc), axis=0, dtype=np.float64)
        std = np.sqrt(var + spec.eps)
        xhat = zc
        xhat *= (1.0 / std).astype(self.dtype)
        # r and d are treated as constants in the backward pass
        r = np.clip(std / run_std, 1.0 / r_max, r_max).astype(self.dtype)
        d = np.clip((mu - rm) / run_std, -d_max, d_max).astype(self.dtype)
        if update_stats:
            m = spec.momentum
            p[f"{name}.running_mean"] = (m * rm + (1 - m) * mu).astype(self.dtype)
            p[f"{name}.running_var"] = (m * rv + (1 - m) * var).astype(self.dtype)
        y = xhat * (gamma * r)
        y += gamma * d + beta
        rec = {"xhat": xhat, "std": std.astype(self.dtype), "r": r, "d": d, "mean": mu, "gamma": gamma}
        return y, rec

    def _norm_backward(self, name, rec, g_y, train, grads):
        xhat, gamma = rec["xhat"], rec["gamma"]
        grads[f"{name}.beta"] = g_y.sum(axis=0)
        if not train:
            grads[f"{name}.gamma"] = (g_y * xhat).sum(axis=0)
            return g_y * (gamma / rec["std"])
        r, d = rec["r"], rec["d"]
        gx = (g_y * xhat).sum(axis=0)
        grads[f"{name}.gamma"] = gx * r + grads[f"{name}.beta"] * d
        g_xhat = g_y * (gamma * r)
        m1 = g_xhat.mean(axis=0, dtype=np.float64).astype(self.dtype)
        # mean(g_xhat * xhat) = gamma * r * mean(g_y * xhat)
        m2 = (gx * gamma * r / len(g_y)).astype(self.dtype)
        g_xhat -= m1
        g_xhat -= xhat * m2
        g_xhat *= 1.0 / rec["std"]
        return g_xhat

    def forward(self, x, train: bool = False, update_stats=None):
        """Return (output, cache). Train mode uses batch statistics; eval mode the running ones."""
        if update_stats is None:
            update_stats = train
        spec, p = self.spec, self.params
        h = np.asarray(x, dtype=self.dtype)
        if h.ndim != 2 or h.shape[1] != spec.input_dim:
            raise ValueError(f"expected input of shape (N, {spec.input_dim}), got {h.shape}")
        bn, post = spec.batch_norm, spec.norm_layout == "post"
        limits = self._renorm_limits()
        cache = {"train": train, "input_norm": None, "layers": []}
        if bn and post:
            h, cache["input_norm"] = self._norm("in", h, train, update_stats, limits)
        for i in range(self.n_hidden):
            z = h @ p[f"l{i}.W"] + p[f"l{i}.b"]
            rec = {"h": h}
            if bn and not post:
                z, nrec = self._norm(f"l{i}", z, train, update_stats, limits)
                rec.update(nrec)
            rec["mask"] = z > 0
            h = np.maximum(z, 0)
            if bn and post:
                h, nrec = self._norm(f"l{i}", h, train, update_stats, limits)
                rec.update(nrec)
            cache["layers"].append(rec)
        out = h @ p["out.W"] + p["out.b"]
        _check_finite(out, "network output")
        if train and update_stats and bn:
            self.bn_steps += 1
        cache["h"] = h
        return out, cache

    def backward(self, cache, g_out, param_grads: bool = True):
        """Gradients of a scalar loss given dL/d(output). Returns (param_grads, dL/d(input)).

        With ``param_grads=False`` only the input gradient is computed and the dict is empty.
        """
        p = self.params
        g_out = np.asarray(g_out, dtype=self.dtype)
        if g_out.shape != (cache["h"].shape[0], self.spec.output_dim):
            raise ValueError(f"upstream gradient shape {g_out.shape} does not match output")
        bn, post, train = self.spec.batch_norm, self.spec.norm_layout == "post", cache["train"]
        grads = {"out.W": cache["h"].T @ g_out, "out.b": g_out.sum(axis=0)} if param_grads else {}
        g_h = g_out @ p["out.W"].T
        for i in reversed(range(self.n_hidden)):
            rec = cache["layers"][i]
            if bn and post:
                g_h = self._norm_backward(f"l{i}", rec, g_h, train, grads)
            g_z = g_h * rec["mask"]
            if bn and not post:
                g_z = self._norm_backward(f"l{i}", rec, g_z, train, grads)
            if param_grads:
                grads[f"l{i}.W"] = rec["h"].T @ g_z
                grads[f"l{i}.b"] = g_z.sum(axis=0)
            g_h = g_z @ p[f"l{i}.W"].T
        if cache["input_norm"] is not None:
            g_h = self._norm_backward("in", cache["input_norm"], g_h, train, grads)
        return (grads if param_grads else {}), g_h

    def copy(self) -> "MLP":
        other = object.__new__(MLP)
        other.spec, other.dtype, other.bn_steps = self.spec, self.dtype, self.bn_steps
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other


def squashed_gaussian(mean, log_std_raw, noise):
    """Reparameterized tanh-Gaussian sample.

    Returns (action, log_prob, cache); log_prob includes the tanh change of variables.
    """
    log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    u = mean + std * noise
    action = np.tanh(u)
    _check_finite(action, "policy sample")
    one_minus = 1.0 - action * action
    gauss = -0.5 * noise * noise - log_std - _HALF_LOG_2PI
    log_prob = (gauss - np.log(one_minus + SQUASH_EPS)).sum(axis=-1, dtype=np.float64)
    cache = {"action": action, "one_minus": one_minus, "std": std, "noise": noise, "log_std_raw": log_std_raw}
    return action, log_prob, cache


def squashed_gaussian_backward(cache, g_action, g_log_prob):
    """Map dL/d(action) and dL/d(log_prob) back to dL/d(mean) and dL/d(raw log-std)."""
    a, one_minus = cache["action"], cache["one_minus"]
    g_lp = np.asarray(g_log_prob, dtype=a.dtype)[:, None]
    g_u = g_action * one_minus + g_lp * (2.0 * a * one_minus / (one_minus + SQUASH_EPS))
    g_mean = g_u
    raw = cache["log_std_raw"]
    inside = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
    g_log_std = (g_u * cache["std"] * cache["noise"] - g_lp) * inside
    return g_mean, g_log_std


class Adam:
    """Bias-corrected adaptive moment estimation over a named parameter dict (updated in place)."""

    def __init__(self, params: dict, lr=3e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            if g.shape != params[k].shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {params[k].shape} for {k}")
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * np.square(g)
            denom = np.sqrt(v)
            denom *= 1.0 / math.sqrt(c2)
            denom += self.eps
            step = np.divide(m, denom, out=denom)
            step *= self.lr / c1
            params[k] -= step.astype(params[k].dtype, copy=False)
