"""Episodic decision process wrapped around the attacked consensus plant.

An episode runs k = 0..N; at each step the actor picks a selection vector and
a scalar signal, and the plant advances.  Rewards are deliberately NOT
returned step by step: the per-step reference signal they depend on is a
function of the whole future selection sequence, so scoring only happens once
the episode is complete (:func:`compute_rewards`).

The one-step reward, given the realized state transition and the reference
signal ``theta_star_k`` evaluated at the visited state, is::

    r_k = -||x_{k+1} - x_star||^2_{P_k} - ||gamma_k theta_k||^2_{Q_k}
          - phi * (theta_k - theta_star_k)^2

all terms nonpositive.  Note the transition reward weights ``x_{k+1}`` by
``P_k`` (not ``P_{k+1}``); with constant weights this is immaterial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from . import dp
from .system import ScenarioConfig, ScenarioError

__all__ = [
    "EpisodeError",
    "MdpConfig",
    "EpisodeRecord",
    "AttackEnv",
    "compute_rewards",
    "run_episode",
    "expected_return",
]

ACTION_MODES = ("categorical", "binary")


class EpisodeError(RuntimeError):
    """Acting after the horizon, or reading results that are not computed yet."""


@dataclass(frozen=True)
class MdpConfig:
    """Scenario plus the decision-process knobs.

    ``phi`` weighs the squared deviation of the chosen signal from the
    per-step reference signal; ``discount`` is the per-step reward discount.
    ``action_mode`` fixes the selection alphabet: "categorical" means exactly
    one agent per step, "binary" allows any subset (including none).
    """

    scenario: ScenarioConfig
    phi: float = 1.0
    discount: float = 0.99
    action_mode: str = "categorical"

    def __post_init__(self):
        if self.phi < 0:
            raise ScenarioError(f"phi must be >= 0, got {self.phi}")
        if not 0 < self.discount <= 1:
            raise ScenarioError(f"discount must be in (0, 1], got {self.discount}")
        if self.action_mode not in ACTION_MODES:
            raise ScenarioError(
                f"action_mode must be one of {ACTION_MODES}, got {self.action_mode!r}"
            )


class Policy(Protocol):
    """Anything that maps (state, step index, rng) to an action."""

    def act(self, x: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        ...


class EpisodeRecord:
    """One complete episode; scoring fields stay locked until computed.

    ``states`` has N+2 rows, ``gammas``/``thetas`` have N+1.  ``theta_stars``,
    ``rewards``, and ``return_discounted`` raise :class:`EpisodeError` until
    :func:`compute_rewards` has populated them (reference signals first, then
    rewards).
    """

    def __init__(self, states: np.ndarray, gammas: np.ndarray, thetas: np.ndarray):
        states = np.asarray(states, dtype=float)
        gammas = np.asarray(gammas, dtype=float)
        thetas = np.asarray(thetas, dtype=float).ravel()
        if states.shape[0] != thetas.shape[0] + 1 or gammas.shape[0] != thetas.shape[0]:
            raise ScenarioError(
                f"inconsistent episode lengths: {states.shape[0]} states, "
                f"{gammas.shape[0]} selections, {thetas.shape[0]} signals"
            )
        self.states = states
        self.gammas = gammas
        self.thetas = thetas
        self._theta_stars: np.ndarray | None = None
        self._rewards: np.ndarray | None = None
        self._return_discounted: float | None = None

    @property
    def horizon_N(self) -> int:
        return self.thetas.shape[0] - 1

    @property
    def scored(self) -> bool:
        return self._rewards is not None

    @property
    def theta_stars(self) -> np.ndarray:
        if self._theta_stars is None:
            raise EpisodeError("reference signals not computed yet; call compute_rewards")
        return self._theta_stars

    @property
    def rewards(self) -> np.ndarray:
        if self._rewards is None:
            raise EpisodeError("rewards not computed yet; call compute_rewards")
        return self._rewards

    @property
    def return_discounted(self) -> float:
        if self._return_discounted is None:
            raise EpisodeError("return not computed yet; call compute_rewards")
        return self._return_discounted


class AttackEnv:
    """Stateful single-episode environment; one instance per rollout worker."""

    def __init__(self, config: MdpConfig):
        self.config = config
        self._k = 0
        self._done = False
        n = config.scenario.n
        N = config.scenario.horizon_N
        self._states = np.empty((N + 2, n))
        self._gammas = np.empty((N + 1, n))
        self._thetas = np.empty(N + 1)
        self.reset()

    @property
    def k(self) -> int:
        return self._k

    @property
    def done(self) -> bool:
        return self._done

    def reset(self) -> np.ndarray:
        """Start a fresh episode at the scenario's initial state."""
        self._k = 0
        self._done = False
        self._states[0] = self.config.scenario.x0
        return self._states[0].copy()

    def _check_action(self, gamma_k: np.ndarray) -> None:
        n = self.config.scenario.n
        if gamma_k.shape != (n,):
            raise ScenarioError(f"gamma_k must have dimension {n}, got {gamma_k.shape}")
        if not np.all((gamma_k == 0) | (gamma_k == 1)):
            raise ScenarioError("gamma_k entries must be 0 or 1")
        if self.config.action_mode == "categorical" and int(gamma_k.sum()) != 1:
            raise ScenarioError(
                "categorical mode requires exactly one selected agent, "
                f"got {int(gamma_k.sum())}"
            )

    def step(self, action: tuple[np.ndarray, float]) -> tuple[np.ndarray, bool]:
        """Apply one action; returns (next state, done).  No reward here."""
        if self._done:
            raise EpisodeError("episode finished; call reset() before acting again")
        gamma_k, theta_k = action
        gamma_k = np.asarray(gamma_k, dtype=float).ravel()
        self._check_action(gamma_k)
        k = self._k
        scenario = self.config.scenario
        x_next = scenario.system.W[k] @ self._states[k] + gamma_k * float(theta_k)
        self._states[k + 1] = x_next
        self._gammas[k] = gamma_k
        self._thetas[k] = float(theta_k)
        self._k += 1
        self._done = self._k > scenario.horizon_N
        return x_next.copy(), self._done

    def record(self) -> EpisodeRecord:
        """Unscored record of the finished episode."""
        if not self._done:
            raise EpisodeError(f"episode incomplete ({self._k} of "
                               f"{self.config.scenario.horizon_N + 1} steps)")
        return EpisodeRecord(self._states.copy(), self._gammas.copy(), self._thetas.copy())


def compute_rewards(
    record: EpisodeRecord,
    config: MdpConfig,
    gains_oracle: Callable[[ScenarioConfig, np.ndarray], dp.DpGains] = dp.solve_gains,
) -> EpisodeRecord:
    """Score a complete episode in place (and return it).

    The reference signal for step k is the affine feedback evaluated at the
    visited state, ``theta_star_k = F_k x_k + M_k``, with gains solved for the
    episode's own selection sequence (hence the whole episode is needed
    first).  Rewards and the discounted return follow.
    """
    scenario = config.scenario
    N = scenario.horizon_N
    if record.horizon_N != N:
        raise ScenarioError(
            f"episode horizon {record.horizon_N} != scenario horizon {N}"
        )
    if not scenario.weights.time_invariant:
        import warnings

        warnings.warn(
            "reward weights x_{k+1} by P_k while the objective uses P_{k+1}; "
            "with time-varying P the episode return will not match the "
            "negated objective",
            stacklevel=2,
        )
    gains = gains_oracle(scenario, record.gammas)
    theta_stars = np.einsum("ki,ki->k", gains.F, record.states[: N + 1]) + gains.M
    record._theta_stars = theta_stars

    P, Q = scenario.weights.P, scenario.weights.Q
    err = record.states - scenario.x_star
    rewards = np.empty(N + 1)
    for k in range(N + 1):
        inj = record.gammas[k] * record.thetas[k]
        rewards[k] = -(
            float(err[k + 1] @ P[k] @ err[k + 1])
            + float(inj @ Q[k] @ inj)
            + config.phi * (record.thetas[k] - theta_stars[k]) ** 2
        )
    record._rewards = rewards
    record._return_discounted = float(rewards @ config.discount ** np.arange(N + 1))
    return record


def run_episode(
    policy: Policy, config: MdpConfig, rng: np.random.Generator
) -> EpisodeRecord:
    """Roll one full episode under a policy (unscored)."""
    env = AttackEnv(config)
    x = env.reset()
    done = False
    while not done:
        action = policy.act(x, env.k, rng)
        x, done = env.step(action)
    return env.record()


def expected_return(
    policy: Policy, config: MdpConfig, episodes: int, seed: int
) -> float:
    """Monte-Carlo mean discounted return over seeded policy rollouts."""
    if episodes < 1:
        raise ScenarioError(f"episodes must be >= 1, got {episodes}")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(episodes):
        record = compute_rewards(run_episode(policy, config, rng), config)
        total += record.return_discounted
    return total / episodes
