"""Closed-form optimal scalar signal for a fixed selection sequence.

Given the selection sequence ``gamma_0..gamma_N``, the signal minimizing the
tracking-plus-energy cost is affine in the state, ``theta_k = F_k x_k + M_k``.
The gain sequences come from a backward recursion seeded at the terminal
weight::

    K_{N+1} = H
    R_k = gamma_k' (Q_k + K_{k+1}) gamma_k               (scalar)
    F_k = -gamma_k' K_{k+1} W_k / R_k                    (row vector)
    K_k = P_k + W_k' K_{k+1} W_k
          + 2 W_k' K_{k+1} gamma_k F_k
          + F_k' R_k F_k
    M_N = gamma_N' K_{N+1} x_star / R_N
    M_k = gamma_k' K_{k+1} (P_{k+1} x_star
          - W_{k+1}' K_{k+2} gamma_{k+1} M_{k+1}) / R_k   for k < N

Steps with ``gamma_k = 0`` inject nothing; they take the no-attack limit
``F_k = 0, M_k = 0, R_k = 0`` and ``K_k = P_k + W_k' K_{k+1} W_k``.

For ``x_star = 0`` the affine term vanishes and the resulting plan is exactly
optimal (the test suite checks this against grid search, finite-difference
stationarity, and a standard regulator recursion).  For nonzero targets the
``M_k`` recursion above is applied as written; its output is then a feedback
heuristic rather than the exact minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import (
    AttackPlan,
    ObjectiveParts,
    ScenarioConfig,
    ScenarioError,
    Trajectory,
    evaluate_objective,
    rollout,
)

__all__ = [
    "DpSolveError",
    "DpGains",
    "constant_gamma",
    "solve_gains",
    "optimal_signal",
    "solve_optimal_plan",
    "compact_K_recursion",
    "stationarity_check",
    "solve_plan_batch",
]


class DpSolveError(RuntimeError):
    """Backward recursion failed (bad weights or numerical blow-up)."""


def constant_gamma(gamma_k, horizon_N: int) -> np.ndarray:
    """Replicate a single selection vector over k = 0..N."""
    g = np.asarray(gamma_k, dtype=float).ravel()
    return np.tile(g, (horizon_N + 1, 1))


def _check_gamma_seq(gamma_seq, scenario: ScenarioConfig) -> np.ndarray:
    G = np.asarray(gamma_seq, dtype=float)
    N, n = scenario.horizon_N, scenario.n
    if G.shape != (N + 1, n):
        raise ScenarioError(
            f"gamma sequence must have shape ({N + 1}, {n}), got {G.shape}"
        )
    if not np.all((G == 0) | (G == 1)):
        raise ScenarioError("gamma entries must be 0 or 1")
    return G


@dataclass(frozen=True)
class DpGains:
    """Backward-recursion outputs for one selection sequence.

    K has N+2 entries (k = 0..N+1, with K_{N+1} equal to the terminal weight);
    F, M, R have N+1 entries (k = 0..N).  ``gamma`` echoes the selection the
    gains were solved for, ``time_invariant`` records whether plant, weights,
    and selection were all constant (a steady state only exists then).
    """

    K: np.ndarray            # (N+2, n, n)
    F: np.ndarray            # (N+1, n)
    M: np.ndarray            # (N+1,)
    R: np.ndarray            # (N+1,)
    gamma: np.ndarray        # (N+1, n)
    time_invariant: bool

    def __post_init__(self):
        attacked = self.gamma.any(axis=1)
        if np.any(self.R[attacked] <= 0):
            bad = int(np.flatnonzero(attacked & (self.R <= 0))[0])
            raise DpSolveError(f"R_{bad} = {self.R[bad]:.3e} is not positive")

    @property
    def horizon_N(self) -> int:
        return self.F.shape[0] - 1


def solve_gains(scenario: ScenarioConfig, gamma_seq) -> DpGains:
    """Run the backward recursion for K_k, F_k, M_k, R_k.

    Each K_k is re-symmetrized after its update to suppress float drift; the
    recursion aborts with the offending step index if anything goes non-finite.
    """
    G = _check_gamma_seq(gamma_seq, scenario)
    N, n = scenario.horizon_N, scenario.n
    W = scenario.system.W
    P, Q, H = scenario.weights.P, scenario.weights.Q, scenario.weights.H
    x_star = scenario.x_star

    K = np.empty((N + 2, n, n))
    F = np.zeros((N + 1, n))
    M = np.zeros(N + 1)
    R = np.zeros(N + 1)
    K[N + 1] = H

    for k in range(N, -1, -1):
        g = G[k]
        Kn = K[k + 1]
        if g.any():
            R[k] = float(g @ (Q[k] + Kn) @ g)
            if not np.isfinite(R[k]) or R[k] <= 0:
                raise DpSolveError(f"R_{k} = {R[k]:.6g}; weights must be positive definite")
            F[k] = -(g @ Kn @ W[k]) / R[k]
            WKg = W[k].T @ Kn @ g
            Kk = P[k] + W[k].T @ Kn @ W[k] + 2.0 * np.outer(WKg, F[k]) \
                + R[k] * np.outer(F[k], F[k])
        else:
            Kk = P[k] + W[k].T @ Kn @ W[k]
        K[k] = (Kk + Kk.T) / 2.0
        if not np.all(np.isfinite(K[k])):
            raise DpSolveError(f"non-finite K at step {k}")

    if x_star.any():
        for k in range(N, -1, -1):
            g = G[k]
            if not g.any():
                M[k] = 0.0
                continue
            if k == N:
                M[k] = float(g @ K[N + 1] @ x_star) / R[k]
            else:
                rhs = P[k + 1] @ x_star - (W[k + 1].T @ K[k + 2] @ G[k + 1]) * M[k + 1]
                M[k] = float(g @ K[k + 1] @ rhs) / R[k]
            if not np.isfinite(M[k]):
                raise DpSolveError(f"non-finite M at step {k}")

    time_invariant = scenario.time_invariant and bool(np.all(G == G[0]))
    return DpGains(K=K, F=F, M=M, R=R, gamma=G, time_invariant=time_invariant)


def optimal_signal(gains: DpGains, k: int, x_k) -> float:
    """Affine signal ``F_k x_k + M_k`` (zero on steps that select nobody)."""
    if not 0 <= k <= gains.horizon_N:
        raise ScenarioError(f"step index {k} outside [0, {gains.horizon_N}]")
    x_k = np.asarray(x_k, dtype=float).ravel()
    return float(gains.F[k] @ x_k) + float(gains.M[k])


def solve_optimal_plan(
    scenario: ScenarioConfig, gamma_seq
) -> tuple[AttackPlan, Trajectory, ObjectiveParts]:
    """Backward gains, then a forward closed-loop rollout injecting F_k x_k + M_k."""
    gains = solve_gains(scenario, gamma_seq)
    N = scenario.horizon_N
    theta = np.empty(N + 1)
    x = scenario.x0
    W = scenario.system.W
    for k in range(N + 1):
        theta[k] = float(gains.F[k] @ x) + float(gains.M[k])
        x = W[k] @ x + gains.gamma[k] * theta[k]
    plan = AttackPlan(gains.gamma, theta)
    trajectory = rollout(scenario, plan)
    return plan, trajectory, evaluate_objective(scenario, trajectory)


def compact_K_recursion(scenario: ScenarioConfig, gamma_seq) -> np.ndarray:
    """K_k via the deflated one-line form; cross-check for the full recursion.

    ``K_k = P_k + W_k' K_{k+1} W_k - W_k' K_{k+1} g g' K_{k+1} W_k / R_k``
    (reducing to the plain weighted sum when gamma_k = 0).
    """
    G = _check_gamma_seq(gamma_seq, scenario)
    N, n = scenario.horizon_N, scenario.n
    W = scenario.system.W
    P, Q, H = scenario.weights.P, scenario.weights.Q, scenario.weights.H
    K = np.empty((N + 2, n, n))
    K[N + 1] = H
    for k in range(N, -1, -1):
        g = G[k]
        Kn = K[k + 1]
        Kk = P[k] + W[k].T @ Kn @ W[k]
        if g.any():
            R = float(g @ (Q[k] + Kn) @ g)
            v = W[k].T @ Kn @ g
            Kk = Kk - np.outer(v, v) / R
        K[k] = (Kk + Kk.T) / 2.0
    return K


def stationarity_check(
    scenario: ScenarioConfig, gamma_seq, plan: AttackPlan, h: float = 1e-5
) -> float:
    """Max |dJ/dtheta_k| by central differences, holding the selection fixed."""
    G = _check_gamma_seq(gamma_seq, scenario)
    N = scenario.horizon_N
    worst = 0.0
    for k in range(N + 1):
        theta_plus = plan.theta.copy()
        theta_plus[k] += h
        theta_minus = plan.theta.copy()
        theta_minus[k] -= h
        J_plus = evaluate_objective(scenario, rollout(scenario, AttackPlan(G, theta_plus))).J
        J_minus = evaluate_objective(scenario, rollout(scenario, AttackPlan(G, theta_minus))).J
        worst = max(worst, abs(J_plus - J_minus) / (2.0 * h))
    return worst


def solve_plan_batch(scenario: ScenarioConfig, gamma_batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized solve_optimal_plan over a batch of selection sequences.

    ``gamma_batch`` has shape (B, N+1, n); returns ``(J, theta)`` with shapes
    (B,) and (B, N+1).  Uses the deflated K update, so it agrees with the
    scalar path to tight float tolerance rather than bit-exactly; memory is
    O(B * (N+1) * n), so chunk large batches at the call site.
    """
    Gb = np.asarray(gamma_batch, dtype=float)
    N, n = scenario.horizon_N, scenario.n
    if Gb.ndim != 3 or Gb.shape[1:] != (N + 1, n):
        raise ScenarioError(
            f"gamma batch must have shape (B, {N + 1}, {n}), got {Gb.shape}"
        )
    B = Gb.shape[0]
    W = scenario.system.W
    P, Q, H = scenario.weights.P, scenario.weights.Q, scenario.weights.H

    if scenario.x_star.any():
        # Nonzero targets need the affine term; batch-heavy callers always use
        # zero targets, so per-sequence solves are fine here.
        theta = np.empty((B, N + 1))
        J = np.empty(B)
        for b in range(B):
            plan, _, parts = solve_optimal_plan(scenario, Gb[b])
            theta[b] = plan.theta
            J[b] = parts.J
        return J, theta

    K = np.broadcast_to(H, (B, n, n)).copy()
    F = np.empty((B, N + 1, n))
    for k in range(N, -1, -1):
        g = Gb[:, k, :]                                   # (B, n)
        attacked = g.any(axis=1)
        Kg = np.einsum("bij,bj->bi", K, g)                # K_{k+1} gamma
        R = np.einsum("bi,ij,bj->b", g, Q[k], g) + np.einsum("bi,bi->b", g, Kg)
        R_safe = np.where(attacked, R, 1.0)
        gKW = np.einsum("bi,ij->bj", Kg, W[k])            # gamma' K_{k+1} W
        F[:, k, :] = np.where(attacked[:, None], -gKW / R_safe[:, None], 0.0)
        base = P[k] + np.einsum("ji,bjl,lm->bim", W[k], K, W[k])
        v = np.einsum("ji,bj->bi", W[k], Kg)              # W' K_{k+1} gamma
        correction = v[:, :, None] * v[:, None, :] / R_safe[:, None, None]
        K = base - np.where(attacked[:, None, None], correction, 0.0)
        K = (K + K.transpose(0, 2, 1)) / 2.0

    # Forward closed-loop rollout (M = 0 throughout).
    x = np.broadcast_to(scenario.x0, (B, n)).copy()
    theta = np.empty((B, N + 1))
    J = np.zeros(B)
    for k in range(N + 1):
        th = np.einsum("bi,bi->b", F[:, k, :], x)
        theta[:, k] = th
        inj = Gb[:, k, :] * th[:, None]
        J += np.einsum("bi,ij,bj->b", inj, Q[k], inj)
        x = x @ W[k].T + inj
        weight = H if k == N else P[k + 1]
        J += np.einsum("bi,ij,bj->b", x, weight, x)
    return J, theta
