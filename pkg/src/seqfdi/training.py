"""Learning and search algorithms for the attack-selection problem.

Two learners and three reference strategies, all returning an
:class:`AttackSolution` whose objective value is recomputed from its own
rollout at construction time:

* :func:`train_one_stage` -- clipped-surrogate policy gradient on the episodic
  process, with rewards scored after each episode via the backward-recursion
  oracle (one-stage learner).
* :func:`train_two_stage` -- the same learner run with a loose stopping
  threshold, then a refinement pass that samples selection sequences from the
  half-trained policy and swaps in the oracle-optimal signal for each.
* :func:`baseline_random` / :func:`baseline_sampling` /
  :func:`baseline_brute_force` -- best-of-budget random plans, best-of-budget
  random selections with oracle signals, and exhaustive enumeration on tiny
  instances.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import dp
from .env import MdpConfig, compute_rewards, run_episode
from .nets import (
    Adam,
    PolicyNetwork,
    PolicySpec,
    ValueNetwork,
    surrogate_loss_and_grads,
    value_loss_and_grads,
)
from .system import AttackPlan, ScenarioConfig, ScenarioError, evaluate_objective, rollout

__all__ = [
    "TrainConfig",
    "TrainingDivergedError",
    "BruteForceRefusedError",
    "CurvePoint",
    "AttackSolution",
    "train_one_stage",
    "train_two_stage",
    "refine_with_oracle",
    "baseline_random",
    "baseline_sampling",
    "baseline_brute_force",
    "first_samples_at_or_below",
]

BRUTE_FORCE_CAP = 10**6


class TrainingDivergedError(RuntimeError):
    """Evaluated objective blew past the random-plan baseline."""


class BruteForceRefusedError(RuntimeError):
    """Instance too large to enumerate; carries the candidate count."""

    def __init__(self, count: int, cap: int):
        self.count = count
        super().__init__(
            f"enumeration refused: {count} candidate sequences exceeds cap {cap}"
        )


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the policy-gradient learners.

    ``delta`` is the stopping threshold on the improvement of the evaluated
    objective (greedy-rollout J): the best J so far is snapshotted every
    ``eval_window`` iterations, and training stops once the improvement over
    the last two snapshots falls below ``delta`` (the greedy J is noisy and
    its gains come in bursts, so tighter comparisons would stop on the first
    quiet stretch).  ``max_iterations`` and ``max_episodes`` cap the run
    regardless.  ``T_r`` is the number of candidate sequences drawn in the
    refinement stage.
    """

    delta: float = 0.1
    learning_rate: float = 1e-3
    clip_ratio: float = 0.2
    epochs_per_update: int = 10
    batch_episodes: int = 20
    max_iterations: int = 2000
    T_r: int = 10
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (64, 64)
    value_learning_rate: float = 1e-3
    entropy_coef: float = 0.05
    eval_window: int = 20
    max_episodes: int | None = None

    def __post_init__(self):
        if self.delta < 0:
            raise ScenarioError(f"delta must be >= 0, got {self.delta}")
        if self.T_r < 1:
            raise ScenarioError(f"T_r must be >= 1, got {self.T_r}")
        if not 0 < self.clip_ratio < 1:
            raise ScenarioError(f"clip_ratio must be in (0, 1), got {self.clip_ratio}")


class CurvePoint(NamedTuple):
    samples: int        # cumulative environment episodes
    J: float            # evaluated objective (greedy rollout, or refined value)
    mean_return: float  # mean discounted return of the latest batch


@dataclass(frozen=True)
class AttackSolution:
    """A concrete plan with its audited objective value.

    ``J`` always equals the objective of rolling out (gamma_seq, theta_seq)
    on the scenario it was built for; :meth:`from_plan` enforces this.
    ``samples_used`` counts environment episodes consumed to find the plan.
    ``curve`` optionally carries the best-so-far / training progress points.
    """

    gamma_seq: np.ndarray
    theta_seq: np.ndarray
    J: float
    provenance: str
    samples_used: int
    curve: tuple[CurvePoint, ...] | None = None

    @classmethod
    def from_plan(
        cls,
        scenario: ScenarioConfig,
        gamma_seq,
        theta_seq,
        provenance: str,
        samples_used: int,
        curve=None,
    ) -> "AttackSolution":
        plan = AttackPlan(gamma_seq, theta_seq)
        parts = evaluate_objective(scenario, rollout(scenario, plan))
        return cls(
            gamma_seq=plan.gamma,
            theta_seq=plan.theta,
            J=parts.J,
            provenance=provenance,
            samples_used=int(samples_used),
            curve=tuple(curve) if curve is not None else None,
        )


def refine_with_oracle(
    gamma_seq, scenario: ScenarioConfig, provenance: str = "oracle"
) -> AttackSolution:
    """Swap in the closed-form optimal signal for a given selection sequence.

    For any signal sequence paired with the same selections, the refined plan
    has an objective no larger (with zero target states, exactly minimal).
    """
    plan, _, parts = dp.solve_optimal_plan(scenario, gamma_seq)
    return AttackSolution(
        gamma_seq=plan.gamma,
        theta_seq=plan.theta,
        J=parts.J,
        provenance=provenance,
        samples_used=0,
    )


# -- policy-gradient learners -------------------------------------------------


def _discounted_reward_to_go(rewards: np.ndarray, discount: float) -> np.ndarray:
    out = np.empty_like(rewards)
    acc = 0.0
    for k in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[k] + discount * acc
        out[k] = acc
    return out


def _greedy_objective(policy: PolicyNetwork, mdp: MdpConfig) -> tuple[float, AttackPlan]:
    """Deterministic rollout of the policy mode; returns its objective J."""
    scenario = mdp.scenario
    N, n = scenario.horizon_N, scenario.n
    gammas = np.empty((N + 1, n))
    thetas = np.empty(N + 1)
    x = scenario.x0
    W = scenario.system.W
    for k in range(N + 1):
        g, th = policy.act_greedy(x, k)
        gammas[k], thetas[k] = g, th
        x = W[k] @ x + g * th
    plan = AttackPlan(gammas, thetas)
    parts = evaluate_objective(scenario, rollout(scenario, plan))
    return parts.J, plan


def _mean_random_objective(mdp: MdpConfig, seed: int, samples: int = 64) -> float:
    """Average J of uniformly random plans (scale reference, not best-of)."""
    J, _, _ = _random_plans_objectives(mdp, samples, np.random.default_rng(seed))
    return float(J.mean())


def _random_gammas(mdp: MdpConfig, size: int, rng) -> np.ndarray:
    n = mdp.scenario.n
    steps = mdp.scenario.horizon_N + 1
    if mdp.action_mode == "categorical":
        return np.eye(n)[rng.integers(0, n, size=(size, steps))]
    return rng.integers(0, 2, size=(size, steps, n)).astype(float)


def _random_plans_objectives(mdp: MdpConfig, size: int, rng, sigma: float = 2.0):
    """Vectorized J for `size` random plans; returns (J, gammas, thetas)."""
    scenario = mdp.scenario
    N, n = scenario.horizon_N, scenario.n
    G = _random_gammas(mdp, size, rng)
    T = rng.normal(0.0, sigma, size=(size, N + 1))
    W = scenario.system.W
    P, Q, H = scenario.weights.P, scenario.weights.Q, scenario.weights.H
    x = np.broadcast_to(scenario.x0, (size, n)).copy()
    J = np.zeros(size)
    for k in range(N + 1):
        inj = G[:, k, :] * T[:, k, None]
        J += np.einsum("bi,ij,bj->b", inj, Q[k], inj)
        x = x @ W[k].T + inj
        err = x - scenario.x_star
        weight = H if k == N else P[k + 1]
        J += np.einsum("bi,ij,bj->b", err, weight, err)
    return J, G, T


def train_one_stage(
    config: TrainConfig, mdp: MdpConfig
) -> tuple[PolicyNetwork, list[CurvePoint]]:
    """Clipped-surrogate policy-gradient training with episode-deferred rewards.

    Per iteration: collect a batch of episodes, score them with the
    backward-recursion oracle, fit advantages as discounted reward-to-go minus
    a learned per-timestep value baseline, then run several clipped-surrogate
    epochs.  The curve logs (cumulative episodes, greedy-rollout J, mean batch
    return) once per iteration.  Raises :class:`TrainingDivergedError` if the
    evaluated J exceeds ten times the mean random-plan objective.
    """
    scenario = mdp.scenario
    n, N = scenario.n, scenario.horizon_N
    ss = np.random.SeedSequence(config.seed)
    s_policy, s_value, s_rollout = ss.spawn(3)
    policy = PolicyNetwork(
        n,
        PolicySpec(hidden_sizes=config.hidden_sizes, seed=int(s_policy.generate_state(1)[0])),
        mode=mdp.action_mode,
    )
    value_net = ValueNetwork(
        n + 1, hidden_sizes=config.hidden_sizes, seed=int(s_value.generate_state(1)[0])
    )
    opt_pi = Adam(policy.params, lr=config.learning_rate)
    opt_v = Adam(value_net.params, lr=config.value_learning_rate)
    rng = np.random.default_rng(s_rollout)

    guard_J = 10.0 * _mean_random_objective(mdp, seed=config.seed)
    time_feature = (np.arange(N + 1) / (N + 1.0))[:, None]

    curve: list[CurvePoint] = []
    episodes_used = 0
    J_best = np.inf
    best_snapshots: list[float] = []
    window_fill = 0

    for _ in range(config.max_iterations):
        # -- data collection + deferred scoring
        records = []
        for _ in range(config.batch_episodes):
            records.append(compute_rewards(run_episode(policy, mdp, rng), mdp))
        episodes_used += len(records)

        states = np.concatenate([r.states[: N + 1] for r in records])
        gammas = np.concatenate([r.gammas for r in records])
        thetas = np.concatenate([r.thetas for r in records])
        rtg = np.concatenate(
            [_discounted_reward_to_go(r.rewards, mdp.discount) for r in records]
        )
        mean_return = float(np.mean([r.return_discounted for r in records]))

        states_t = np.concatenate(
            [np.hstack([r.states[: N + 1], time_feature]) for r in records]
        )
        baseline = value_net.predict(states_t)
        adv = rtg - baseline
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        old_lp = policy.log_prob(states, gammas, thetas)

        # -- updates
        for _ in range(config.epochs_per_update):
            _, g_pi = surrogate_loss_and_grads(
                policy, states, gammas, thetas, old_lp, adv,
                config.clip_ratio, config.entropy_coef,
            )
            opt_pi.update(policy.params, g_pi)
            _, g_v = value_loss_and_grads(value_net, states_t, rtg)
            opt_v.update(value_net.params, g_v)

        # -- evaluation and stopping
        J_c, _ = _greedy_objective(policy, mdp)
        episodes_used += 1
        curve.append(CurvePoint(episodes_used, J_c, mean_return))
        if J_c > guard_J:
            raise TrainingDivergedError(
                f"evaluated J {J_c:.1f} exceeds 10x random baseline {guard_J:.1f}"
            )
        J_best = min(J_best, J_c)
        window_fill += 1
        if window_fill == config.eval_window:
            best_snapshots.append(J_best)
            window_fill = 0
            if len(best_snapshots) >= 3 and best_snapshots[-3] - J_best < config.delta:
                break
        if config.max_episodes is not None and episodes_used >= config.max_episodes:
            break

    return policy, curve


def train_two_stage(
    config: TrainConfig, mdp: MdpConfig
) -> tuple[AttackSolution, list[CurvePoint]]:
    """Loose-threshold training, then oracle refinement of sampled sequences.

    Stage 1 trains with the configured (loose) ``delta``.  Stage 2 draws
    ``T_r`` selection sequences from the resulting stochastic policy, pairs
    each with its closed-form optimal signal, and returns the best plan.
    """
    stage1_cfg = config
    if config.max_episodes is not None:
        stage1_cfg = replace(config, max_episodes=config.max_episodes - config.T_r)
    policy, curve = train_one_stage(stage1_cfg, mdp)
    episodes_used = curve[-1].samples if curve else 0

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    best: AttackSolution | None = None
    for _ in range(config.T_r):
        record = run_episode(policy, mdp, rng)
        episodes_used += 1
        candidate = refine_with_oracle(record.gammas, mdp.scenario, provenance="two-stage")
        if best is None or candidate.J < best.J:
            best = candidate
    curve = curve + [CurvePoint(episodes_used, best.J, np.nan)]
    return (
        AttackSolution(
            gamma_seq=best.gamma_seq,
            theta_seq=best.theta_seq,
            J=best.J,
            provenance="two-stage",
            samples_used=episodes_used,
            curve=tuple(curve),
        ),
        curve,
    )


# -- reference strategies ------------------------------------------------------


def baseline_random(
    mdp: MdpConfig, budget: int, seed: int = 0, chunk: int = 20000
) -> AttackSolution:
    """Best of ``budget`` fully random plans (uniform selections, N(0, 4) signals)."""
    if budget < 1:
        raise ScenarioError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    best_J = np.inf
    best_G = best_T = None
    curve: list[CurvePoint] = []
    done = 0
    while done < budget:
        size = min(chunk, budget - done)
        J, G, T = _random_plans_objectives(mdp, size, rng)
        i = int(np.argmin(J))
        if J[i] < best_J:
            best_J, best_G, best_T = float(J[i]), G[i].copy(), T[i].copy()
        done += size
        curve.append(CurvePoint(done, best_J, np.nan))
    return AttackSolution.from_plan(
        mdp.scenario, best_G, best_T, "random", budget, curve=curve
    )


def baseline_sampling(
    mdp: MdpConfig, budget: int, seed: int = 0, chunk: int = 10000
) -> AttackSolution:
    """Best of ``budget`` random selection sequences, each with its oracle signal."""
    if budget < 1:
        raise ScenarioError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    best_J = np.inf
    best_G = best_T = None
    curve: list[CurvePoint] = []
    done = 0
    while done < budget:
        size = min(chunk, budget - done)
        G = _random_gammas(mdp, size, rng)
        J, T = dp.solve_plan_batch(mdp.scenario, G)
        i = int(np.argmin(J))
        if J[i] < best_J:
            best_J, best_G, best_T = float(J[i]), G[i].copy(), T[i].copy()
        done += size
        curve.append(CurvePoint(done, best_J, np.nan))
    return AttackSolution.from_plan(
        mdp.scenario, best_G, best_T, "sampling", budget, curve=curve
    )


def enumeration_count(mdp: MdpConfig) -> int:
    """Exact number of selection sequences in the configured action alphabet."""
    n = mdp.scenario.n
    steps = mdp.scenario.horizon_N + 1
    return n**steps if mdp.action_mode == "categorical" else 2 ** (n * steps)


def baseline_brute_force(
    mdp: MdpConfig, chunk: int = 10000
) -> AttackSolution:
    """Exhaustive enumeration with oracle signals; refuses large instances.

    Every selection sequence in the action alphabet is paired with its
    closed-form optimal signal; the global argmin is exact.  Instances whose
    candidate count exceeds ``BRUTE_FORCE_CAP`` raise
    :class:`BruteForceRefusedError` carrying the count.
    """
    scenario = mdp.scenario
    n = scenario.n
    steps = scenario.horizon_N + 1
    count = enumeration_count(mdp)
    if count > BRUTE_FORCE_CAP:
        raise BruteForceRefusedError(count, BRUTE_FORCE_CAP)

    best_J = np.inf
    best_G = best_T = None
    for start in range(0, count, chunk):
        ids = np.arange(start, min(start + chunk, count), dtype=np.int64)
        if mdp.action_mode == "categorical":
            digits = (ids[:, None] // n ** np.arange(steps)[None, :]) % n
            G = np.eye(n)[digits]
        else:
            bits = (ids[:, None] >> np.arange(n * steps)[None, :]) & 1
            G = bits.reshape(len(ids), steps, n).astype(float)
        J, T = dp.solve_plan_batch(scenario, G)
        i = int(np.argmin(J))
        if J[i] < best_J:
            best_J, best_G, best_T = float(J[i]), G[i].copy(), T[i].copy()
    return AttackSolution.from_plan(
        scenario, best_G, best_T, "brute-force", count
    )


def first_samples_at_or_below(curve, target_J: float) -> int | None:
    """Episode count at which a curve first reaches ``target_J`` (None if never)."""
    for point in curve:
        if point.J <= target_J:
            return point.samples
    return None
