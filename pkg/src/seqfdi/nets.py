"""Small feed-forward policy and value networks, gradients written by hand.

The policy maps a state to (a) a selection head -- categorical logits over
agents, or per-agent Bernoulli logits in binary mode -- and (b) a Gaussian
head (state-dependent mean, shared log-std) over the scalar signal.  Both the
clipped-surrogate policy loss and the value regression loss come with
analytic backward passes; the test suite checks every parameter against
central finite differences.

All arithmetic is float64 numpy; parameters live in plain dicts keyed by
name, which keeps the finite-difference check and the optimizer generic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolicySpec",
    "PolicyNetwork",
    "ValueNetwork",
    "Adam",
    "surrogate_loss_and_grads",
    "value_loss_and_grads",
    "get_flat_params",
    "set_flat_params",
    "flatten_like",
]

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass(frozen=True)
class PolicySpec:
    """Architecture and initialization seed for a policy network."""

    hidden_sizes: tuple[int, ...] = (64, 64)
    seed: int = 0


def _init_linear(rng, fan_in: int, fan_out: int, scale: float = 1.0):
    W = rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=(fan_out, fan_in)) * scale
    b = np.zeros(fan_out)
    return W, b


class _Trunk:
    """Shared tanh MLP body; forward caches activations for backward."""

    def __init__(self, sizes: list[int], rng, prefix: str):
        self.prefix = prefix
        self.depth = len(sizes) - 1
        self.params: dict[str, np.ndarray] = {}
        for i in range(self.depth):
            W, b = _init_linear(rng, sizes[i], sizes[i + 1])
            self.params[f"{prefix}W{i}"] = W
            self.params[f"{prefix}b{i}"] = b

    def forward(self, X: np.ndarray):
        hs = [X]
        h = X
        for i in range(self.depth):
            z = h @ self.params[f"{self.prefix}W{i}"].T + self.params[f"{self.prefix}b{i}"]
            h = np.tanh(z)
            hs.append(h)
        return h, hs

    def backward(self, dh: np.ndarray, hs: list[np.ndarray], grads: dict[str, np.ndarray]):
        for i in range(self.depth - 1, -1, -1):
            dz = dh * (1.0 - hs[i + 1] ** 2)
            grads[f"{self.prefix}W{i}"] += dz.T @ hs[i]
            grads[f"{self.prefix}b{i}"] += dz.sum(axis=0)
            dh = dz @ self.params[f"{self.prefix}W{i}"]
        return dh


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class PolicyNetwork:
    """Stochastic hybrid policy: which agents to hit, and how hard.

    ``mode`` is "categorical" (one agent per step, selection sampled from a
    softmax) or "binary" (independent Bernoulli per agent).
    """

    def __init__(self, n_agents: int, spec: PolicySpec = PolicySpec(), mode: str = "categorical"):
        if mode not in ("categorical", "binary"):
            raise ValueError(f"unknown mode {mode!r}")
        self.n = n_agents
        self.mode = mode
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        sizes = [n_agents, *spec.hidden_sizes]
        self.trunk = _Trunk(sizes, rng, "t_")
        top = sizes[-1]
        self.params = dict(self.trunk.params)
        W, b = _init_linear(rng, top, n_agents, scale=0.01)
        self.params["sel_W"], self.params["sel_b"] = W, b
        W, b = _init_linear(rng, top, 1, scale=0.01)
        self.params["mu_W"], self.params["mu_b"] = W, b
        self.params["log_std"] = np.zeros(1)
        self.trunk.params = self.params  # single shared dict

    # -- distribution pieces -------------------------------------------------

    def _heads(self, X: np.ndarray):
        h, hs = self.trunk.forward(X)
        logits = h @ self.params["sel_W"].T + self.params["sel_b"]
        mu = (h @ self.params["mu_W"].T + self.params["mu_b"])[:, 0]
        log_std = float(np.clip(self.params["log_std"][0], LOG_STD_MIN, LOG_STD_MAX))
        return logits, mu, log_std, hs

    def distribution(self, X: np.ndarray):
        """(selection probabilities, signal mean, signal std) for a state batch."""
        logits, mu, log_std, _ = self._heads(np.atleast_2d(X))
        if self.mode == "categorical":
            probs = np.exp(_log_softmax(logits))
        else:
            probs = _sigmoid(logits)
        return probs, mu, np.exp(log_std)

    def act(self, x: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        """Sample one action.  The step index is unused (stationary policy)."""
        probs, mu, std = self.distribution(x)
        probs, mu = probs[0], mu[0]
        if self.mode == "categorical":
            choice = rng.choice(self.n, p=probs / probs.sum())
            gamma = np.zeros(self.n)
            gamma[choice] = 1.0
        else:
            gamma = (rng.random(self.n) < probs).astype(float)
        theta = mu + std * rng.standard_normal()
        return gamma, float(theta)

    def act_greedy(self, x: np.ndarray, k: int, rng=None) -> tuple[np.ndarray, float]:
        """Mode action: argmax selection (p > 1/2 per agent in binary mode), mean signal."""
        probs, mu, _ = self.distribution(x)
        probs, mu = probs[0], mu[0]
        if self.mode == "categorical":
            gamma = np.zeros(self.n)
            gamma[int(np.argmax(probs))] = 1.0
        else:
            gamma = (probs > 0.5).astype(float)
        return gamma, float(mu)

    def log_prob(self, states: np.ndarray, gammas: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        """Joint log-density of (selection, signal) for a batch."""
        logits, mu, log_std, _ = self._heads(states)
        if self.mode == "categorical":
            lsm = _log_softmax(logits)
            idx = np.argmax(gammas, axis=1)
            lp_sel = lsm[np.arange(len(idx)), idx]
        else:
            sign = 1.0 - 2.0 * gammas
            lp_sel = -_softplus(sign * logits).sum(axis=1)
        std = np.exp(log_std)
        lp_theta = -0.5 * ((thetas - mu) / std) ** 2 - log_std - 0.5 * np.log(2.0 * np.pi)
        return lp_sel + lp_theta


class ValueNetwork:
    """State-value regressor with the same trunk shape as the policy."""

    def __init__(self, n_agents: int, hidden_sizes: tuple[int, ...] = (64, 64), seed: int = 0):
        rng = np.random.default_rng(seed)
        sizes = [n_agents, *hidden_sizes]
        self.trunk = _Trunk(sizes, rng, "t_")
        self.params = dict(self.trunk.params)
        W, b = _init_linear(rng, sizes[-1], 1)
        self.params["v_W"], self.params["v_b"] = W, b
        self.trunk.params = self.params

    def predict(self, states: np.ndarray) -> np.ndarray:
        h, _ = self.trunk.forward(np.atleast_2d(states))
        return (h @ self.params["v_W"].T + self.params["v_b"])[:, 0]


def _zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def surrogate_loss_and_grads(
    policy: PolicyNetwork,
    states: np.ndarray,
    gammas: np.ndarray,
    thetas: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip_ratio: float,
    entropy_coef: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Clipped-surrogate policy loss and its analytic parameter gradients.

    loss = -mean(min(r A, clip(r, 1-eps, 1+eps) A)) - entropy_coef * mean(H)
    with r the ratio of new to old action likelihoods.  Returns (loss, grads).
    """
    B = states.shape[0]
    logits, mu, log_std, hs = policy._heads(states)
    std = np.exp(log_std)
    std_free = LOG_STD_MIN < policy.params["log_std"][0] < LOG_STD_MAX

    if policy.mode == "categorical":
        lsm = _log_softmax(logits)
        idx = np.argmax(gammas, axis=1)
        lp_sel = lsm[np.arange(B), idx]
        probs = np.exp(lsm)
    else:
        sign = 1.0 - 2.0 * gammas
        lp_sel = -_softplus(sign * logits).sum(axis=1)
        probs = _sigmoid(logits)
    z_theta = (thetas - mu) / std
    lp = lp_sel - 0.5 * z_theta**2 - log_std - 0.5 * np.log(2.0 * np.pi)

    ratio = np.exp(lp - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantages
    surrogate = np.minimum(unclipped, clipped)

    if policy.mode == "categorical":
        log_probs = np.zeros_like(probs)
        np.log(probs, out=log_probs, where=probs > 0)
        ent_sel = -(probs * log_probs).sum(axis=1)
    else:
        ent_sel = (_softplus(logits) - logits * probs).sum(axis=1)
    ent_theta = log_std + 0.5 * np.log(2.0 * np.pi * np.e)
    entropy = ent_sel + ent_theta

    loss = -surrogate.mean() - entropy_coef * entropy.mean()

    # d loss / d lp: gradient flows through whichever branch min() picked,
    # and dies when that branch is the saturated clip.
    take_unclipped = unclipped <= clipped
    inside_clip = (ratio > 1.0 - clip_ratio) & (ratio < 1.0 + clip_ratio)
    active = np.where(take_unclipped, True, inside_clip)
    dlp = -(advantages * ratio * active) / B

    grads = _zeros_like_params(policy.params)
    if policy.mode == "categorical":
        dlogits = (gammas - probs) * dlp[:, None]
        dlogits += (entropy_coef / B) * probs * (log_probs + ent_sel[:, None])
    else:
        dlogits = (gammas - probs) * dlp[:, None]
        # d entropy_sel / d logit = -logit * p (1 - p)
        dlogits += (entropy_coef / B) * logits * probs * (1.0 - probs)
    dmu = dlp * z_theta / std
    dlog_std = float((dlp * (z_theta**2 - 1.0)).sum())
    if std_free:
        dlog_std += -entropy_coef  # d(-c_e * mean(ent))/d log_std, mean over B of constant
    else:
        dlog_std = 0.0
    grads["log_std"][0] = dlog_std

    grads["sel_W"] += dlogits.T @ hs[-1]
    grads["sel_b"] += dlogits.sum(axis=0)
    grads["mu_W"] += (dmu[:, None]).T @ hs[-1]
    grads["mu_b"] += np.array([dmu.sum()])
    dh = dlogits @ policy.params["sel_W"] + dmu[:, None] @ policy.params["mu_W"]
    policy.trunk.backward(dh, hs, grads)
    return float(loss), grads


def value_loss_and_grads(
    value_net: ValueNetwork, states: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error of the value head and its gradients."""
    B = states.shape[0]
    h, hs = value_net.trunk.forward(states)
    v = (h @ value_net.params["v_W"].T + value_net.params["v_b"])[:, 0]
    diff = v - targets
    loss = float((diff**2).mean())
    dv = 2.0 * diff / B
    grads = _zeros_like_params(value_net.params)
    grads["v_W"] += (dv[:, None]).T @ h
    grads["v_b"] += np.array([dv.sum()])
    dh = dv[:, None] @ value_net.params["v_W"]
    value_net.trunk.backward(dh, hs, grads)
    return loss, grads


class Adam:
    """Per-parameter adaptive moments; state keyed like the parameter dict."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = _zeros_like_params(params)
        self.v = _zeros_like_params(params)
        self.t = 0

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for key, g in grads.items():
            self.m[key] = b1 * self.m[key] + (1.0 - b1) * g
            self.v[key] = b2 * self.v[key] + (1.0 - b2) * g * g
            params[key] -= self.lr * correction * self.m[key] / (np.sqrt(self.v[key]) + self.eps)


# -- flat views for optimizer-free comparisons and finite differences --------

def get_flat_params(params: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in sorted(params)])


def set_flat_params(params: dict[str, np.ndarray], flat: np.ndarray) -> None:
    offset = 0
    for k in sorted(params):
        size = params[k].size
        params[k][...] = flat[offset : offset + size].reshape(params[k].shape)
        offset += size


def flatten_like(params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([grads[k].ravel() for k in sorted(params)])
