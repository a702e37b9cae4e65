"""Linear consensus systems under additive scalar injection.

The plant is ``x_{k+1} = W_k x_k + gamma_k * theta_k`` where ``gamma_k`` is a
binary selection vector (which agents receive the signal) and ``theta_k`` is a
scalar signal.  The cost of a run splits into a tracking part J1 (weighted
distance of the states from a target ``x_star``) and an energy part J2
(weighted magnitude of the injected data).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "ScenarioError",
    "LinearSystem",
    "WeightScheme",
    "AttackPlan",
    "ScenarioConfig",
    "Trajectory",
    "ObjectiveParts",
    "build_consensus_system",
    "step",
    "rollout",
    "evaluate_objective",
]

# Relative symmetry tolerance for weight matrices.
SYMMETRY_RTOL = 1e-12
# Absolute tolerance on Laplacian row sums (integer inputs are exact,
# generated ones accrue float noise).
LAPLACIAN_ROW_SUM_ATOL = 1e-9


class ScenarioError(ValueError):
    """Raised when a system, weight scheme, plan, or scenario is malformed."""


def _as_matrix_stack(M, steps: int, name: str) -> tuple[np.ndarray, bool]:
    """Normalize a single matrix or a sequence of matrices to shape (steps, n, n).

    A single matrix is broadcast (no copy) over all steps.  Returns the stack
    and whether the input was time-invariant.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim == 2:
        if A.shape[0] != A.shape[1]:
            raise ScenarioError(f"{name} must be square, got shape {A.shape}")
        return np.broadcast_to(A, (steps,) + A.shape), True
    if A.ndim == 3:
        if A.shape[0] != steps:
            raise ScenarioError(
                f"{name} sequence must have {steps} entries, got {A.shape[0]}"
            )
        if A.shape[1] != A.shape[2]:
            raise ScenarioError(f"{name} entries must be square, got shape {A.shape[1:]}")
        invariant = bool(np.all(A == A[0]))
        return A, invariant
    raise ScenarioError(f"{name} must be a matrix or a sequence of matrices")


def _check_symmetric_pd(A: np.ndarray, name: str) -> None:
    scale = np.linalg.norm(A, "fro")
    if scale > 0 and np.linalg.norm(A - A.T, "fro") > SYMMETRY_RTOL * scale:
        raise ScenarioError(f"{name} is not symmetric")
    smallest = np.linalg.eigvalsh((A + A.T) / 2).min()
    if smallest <= 0:
        raise ScenarioError(
            f"{name} is not positive definite (smallest eigenvalue {smallest:.3e})"
        )


@dataclass(frozen=True)
class LinearSystem:
    """System matrices ``W_k`` for k = 0..N over a fixed decision horizon.

    ``W`` may be passed as a single n-by-n matrix (replicated over all steps)
    or as a stack of N+1 matrices for time-varying dynamics.
    """

    W: np.ndarray
    horizon_N: int
    time_invariant: bool = True

    def __init__(self, W, horizon_N: int):
        if horizon_N < 1:
            raise ScenarioError(f"horizon_N must be >= 1, got {horizon_N}")
        stack, invariant = _as_matrix_stack(W, horizon_N + 1, "W")
        if not np.all(np.isfinite(stack)):
            raise ScenarioError("W contains non-finite entries")
        object.__setattr__(self, "W", stack)
        object.__setattr__(self, "horizon_N", int(horizon_N))
        object.__setattr__(self, "time_invariant", invariant)

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def W_at(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.horizon_N:
            raise ScenarioError(f"step index {k} outside [0, {self.horizon_N}]")
        return self.W[k]


@dataclass(frozen=True)
class WeightScheme:
    """Symmetric positive-definite weights: P_k and Q_k for k = 0..N, terminal H."""

    P: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    time_invariant: bool = True

    def __init__(self, P, Q, H, horizon_N: int):
        steps = horizon_N + 1
        P_stack, p_inv = _as_matrix_stack(P, steps, "P")
        Q_stack, q_inv = _as_matrix_stack(Q, steps, "Q")
        H_mat = np.asarray(H, dtype=float)
        if H_mat.ndim != 2 or H_mat.shape[0] != H_mat.shape[1]:
            raise ScenarioError(f"H must be square, got shape {H_mat.shape}")
        # Validate each distinct matrix once.
        for name, stack, invariant in (("P", P_stack, p_inv), ("Q", Q_stack, q_inv)):
            if invariant:
                _check_symmetric_pd(stack[0], f"{name}_k")
            else:
                for k in range(steps):
                    _check_symmetric_pd(stack[k], f"{name}_{k}")
        _check_symmetric_pd(H_mat, "H")
        object.__setattr__(self, "P", P_stack)
        object.__setattr__(self, "Q", Q_stack)
        object.__setattr__(self, "H", H_mat)
        object.__setattr__(self, "time_invariant", p_inv and q_inv)

    @classmethod
    def identity(cls, n: int, horizon_N: int) -> "WeightScheme":
        eye = np.eye(n)
        return cls(eye, eye, eye, horizon_N)

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class AttackPlan:
    """Per-step selection vectors gamma_k and scalar signals theta_k, k = 0..N."""

    gamma: np.ndarray  # (N+1, n), entries in {0, 1}
    theta: np.ndarray  # (N+1,)

    def __init__(self, gamma, theta):
        G = np.asarray(gamma, dtype=float)
        T = np.asarray(theta, dtype=float).ravel()
        if G.ndim != 2:
            raise ScenarioError("gamma must be a sequence of selection vectors")
        if not np.all((G == 0) | (G == 1)):
            raise ScenarioError("gamma entries must be 0 or 1")
        if G.shape[0] != T.shape[0]:
            raise ScenarioError(
                f"gamma and theta lengths differ: {G.shape[0]} vs {T.shape[0]}"
            )
        object.__setattr__(self, "gamma", G)
        object.__setattr__(self, "theta", T)

    def __len__(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def zeros(cls, n: int, horizon_N: int) -> "AttackPlan":
        return cls(np.zeros((horizon_N + 1, n)), np.zeros(horizon_N + 1))

    @classmethod
    def constant_selection(cls, gamma_k: Sequence[float], theta) -> "AttackPlan":
        theta = np.asarray(theta, dtype=float).ravel()
        gamma = np.tile(np.asarray(gamma_k, dtype=float), (theta.shape[0], 1))
        return cls(gamma, theta)


@dataclass(frozen=True)
class ScenarioConfig:
    """Initial state, target state, plant, and cost weights for one attack problem."""

    x0: np.ndarray
    x_star: np.ndarray
    system: LinearSystem
    weights: WeightScheme

    def __init__(self, x0, x_star, system: LinearSystem, weights: WeightScheme):
        x0 = np.asarray(x0, dtype=float).ravel()
        x_star = np.asarray(x_star, dtype=float).ravel()
        n = system.n
        if x0.shape != (n,) or x_star.shape != (n,):
            raise ScenarioError(
                f"x0/x_star must have dimension {n}, got {x0.shape} and {x_star.shape}"
            )
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(x_star))):
            raise ScenarioError("x0/x_star contain non-finite entries")
        if weights.n != n:
            raise ScenarioError(f"weights are {weights.n}-dimensional, system is {n}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x_star", x_star)
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def horizon_N(self) -> int:
        return self.system.horizon_N

    @property
    def time_invariant(self) -> bool:
        return self.system.time_invariant and self.weights.time_invariant

    def with_horizon(self, horizon_N: int) -> "ScenarioConfig":
        """Same scenario over a different horizon (time-invariant scenarios only)."""
        if not self.time_invariant:
            raise ScenarioError("cannot re-horizon a time-varying scenario")
        return ScenarioConfig(
            self.x0,
            self.x_star,
            LinearSystem(self.system.W[0], horizon_N),
            WeightScheme(self.weights.P[0], self.weights.Q[0], self.weights.H, horizon_N),
        )


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_{N+1} together with the plan that produced them."""

    states: np.ndarray  # (N+2, n)
    gamma: np.ndarray   # (N+1, n)
    theta: np.ndarray   # (N+1,)

    @property
    def horizon_N(self) -> int:
        return self.theta.shape[0] - 1


class ObjectiveParts(NamedTuple):
    J1: float
    J2: float
    J: float


def build_consensus_system(laplacian, epsilon: float, horizon_N: int) -> LinearSystem:
    """Time-invariant consensus plant ``W = I - epsilon * L`` for a graph Laplacian L.

    The input must be a valid Laplacian: square, symmetric, zero row sums,
    nonpositive off-diagonals.  ``epsilon`` must lie in (0, 1/max_degree) so
    that W stays a (doubly) stochastic averaging matrix.
    """
    L = np.asarray(laplacian, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ScenarioError(f"laplacian must be square, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise ScenarioError("laplacian contains non-finite entries")
    if not np.allclose(L, L.T, atol=LAPLACIAN_ROW_SUM_ATOL, rtol=0):
        raise ScenarioError("laplacian is not symmetric")
    row_sums = L.sum(axis=1)
    if np.max(np.abs(row_sums)) > LAPLACIAN_ROW_SUM_ATOL:
        raise ScenarioError(
            f"laplacian row sums are not zero (max |sum| = {np.max(np.abs(row_sums)):.3e})"
        )
    off = L - np.diag(np.diag(L))
    if np.any(off > LAPLACIAN_ROW_SUM_ATOL):
        raise ScenarioError("laplacian has positive off-diagonal entries")
    max_degree = float(np.max(np.diag(L)))
    if epsilon <= 0:
        raise ScenarioError(f"epsilon must be positive, got {epsilon}")
    if max_degree > 0 and epsilon >= 1.0 / max_degree:
        raise ScenarioError(
            f"epsilon {epsilon} >= 1/max_degree = {1.0 / max_degree:.6g}"
        )
    n = L.shape[0]
    return LinearSystem(np.eye(n) - epsilon * L, horizon_N)


def step(system: LinearSystem, k: int, x, gamma_k, theta_k: float) -> np.ndarray:
    """One transition: ``W_k x + gamma_k * theta_k``."""
    x = np.asarray(x, dtype=float).ravel()
    gamma_k = np.asarray(gamma_k, dtype=float).ravel()
    n = system.n
    if x.shape != (n,):
        raise ScenarioError(f"state must have dimension {n}, got {x.shape}")
    if gamma_k.shape != (n,):
        raise ScenarioError(f"gamma_k must have dimension {n}, got {gamma_k.shape}")
    return system.W_at(k) @ x + gamma_k * float(theta_k)


def rollout(scenario: ScenarioConfig, plan: AttackPlan) -> Trajectory:
    """Propagate the plant under a plan; returns all N+2 states (deterministic)."""
    N = scenario.horizon_N
    if len(plan) != N + 1:
        raise ScenarioError(f"plan has {len(plan)} steps, horizon needs {N + 1}")
    if plan.gamma.shape[1] != scenario.n:
        raise ScenarioError(
            f"plan selection width {plan.gamma.shape[1]} != agent count {scenario.n}"
        )
    states = np.empty((N + 2, scenario.n))
    states[0] = scenario.x0
    x = scenario.x0
    for k in range(N + 1):
        x = step(scenario.system, k, x, plan.gamma[k], plan.theta[k])
        states[k + 1] = x
    return Trajectory(states=states, gamma=plan.gamma.copy(), theta=plan.theta.copy())


def evaluate_objective(scenario: ScenarioConfig, trajectory: Trajectory) -> ObjectiveParts:
    """Split cost of a finished run.

    J1 sums the weighted squared tracking errors ||x_k - x_star||^2_{P_k} over
    k = 1..N plus the terminal term ||x_{N+1} - x_star||^2_H (the initial state
    is given, so k = 0 is excluded).  J2 sums the injection energies
    ||gamma_k * theta_k||^2_{Q_k} over k = 0..N.
    """
    N = scenario.horizon_N
    if trajectory.states.shape != (N + 2, scenario.n):
        raise ScenarioError(
            f"trajectory has {trajectory.states.shape[0]} states, expected {N + 2}"
        )
    P, Q, H = scenario.weights.P, scenario.weights.Q, scenario.weights.H
    err = trajectory.states - scenario.x_star
    J1 = 0.0
    for k in range(1, N + 1):
        J1 += float(err[k] @ P[k] @ err[k])
    J1 += float(err[N + 1] @ H @ err[N + 1])
    J2 = 0.0
    for k in range(N + 1):
        inj = trajectory.gamma[k] * trajectory.theta[k]
        J2 += float(inj @ Q[k] @ inj)
    return ObjectiveParts(J1=J1, J2=J2, J=J1 + J2)
