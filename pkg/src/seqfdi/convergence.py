"""Empirical settling of the backward gain sequences.

Solved backward from the horizon, K_k and F_k approach constant matrices once
the step index is far enough below N: the low-k iterates are the settled ones.
This module measures that settling from a solved :class:`~seqfdi.dp.DpGains`
(pure post-processing, the recursion is never re-run) and locates the index
window over which the gains can be treated as steady.

Error series are relative Frobenius errors,
``K_c(k) = ||K_k - K_star||_F / ||K_star||_F`` (likewise for F), so a single
tolerance is meaningful for both sequences despite their different scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dp import DpGains, constant_gamma, solve_gains
from .system import ScenarioConfig, ScenarioError

__all__ = [
    "ConvergenceReport",
    "analyze",
    "calibrate_tolerance",
    "steady_state_invariance",
    "topology_symmetry_probe",
]


def _relative_series(stack: np.ndarray, star: np.ndarray) -> np.ndarray:
    scale = np.linalg.norm(star)
    if scale == 0.0:
        scale = 1.0
    flat = stack.reshape(stack.shape[0], -1) - star.ravel()
    return np.linalg.norm(flat, axis=1) / scale


def _prefix_end(errors: np.ndarray, tolerance: float) -> int:
    """Largest b with errors[k] < tolerance for every k in 1..b (0 if none)."""
    b = 0
    for k in range(1, errors.shape[0]):
        if errors[k] < tolerance:
            b = k
        else:
            break
    return b


@dataclass(frozen=True)
class ConvergenceReport:
    """Steady-state gains plus relative error series and settled windows.

    ``K_error[k] = ||K_k - K_star||_F / ||K_star||_F`` for k = 0..N, and
    analogously for F.  ``xi_star_K``/``xi_star_F`` are (1, b) index windows:
    the maximal prefix starting at k = 1 on which the error stays below the
    tolerance.
    """

    K_star: np.ndarray
    F_star: np.ndarray
    K_error: np.ndarray
    F_error: np.ndarray
    xi_star_K: tuple[int, int]
    xi_star_F: tuple[int, int]
    tolerance: float


def analyze(gains: DpGains, tolerance: float) -> ConvergenceReport:
    """Measure the settled window of a backward solve.

    The steady state is taken from the most-converged iterates (K_1 and F_0);
    requires gains produced with constant plant, weights, and selection.
    """
    if tolerance <= 0:
        raise ScenarioError(f"tolerance must be positive, got {tolerance}")
    if not gains.time_invariant:
        raise ScenarioError(
            "gains were solved with time-varying inputs; no steady state exists"
        )
    N = gains.horizon_N
    K_star = gains.K[1]
    F_star = gains.F[0]
    K_error = _relative_series(gains.K[: N + 1], K_star)
    F_error = _relative_series(gains.F[: N + 1], F_star)
    b_K = _prefix_end(K_error, tolerance)
    b_F = _prefix_end(F_error, tolerance)
    return ConvergenceReport(
        K_star=K_star.copy(),
        F_star=F_star.copy(),
        K_error=K_error,
        F_error=F_error,
        xi_star_K=(1, b_K),
        xi_star_F=(1, b_F),
        tolerance=float(tolerance),
    )


def calibrate_tolerance(gains: DpGains, target_end: int) -> float:
    """Tolerance that puts the K window end exactly at ``target_end``.

    Returns the geometric midpoint of the feasible interval
    (K_error[target_end], K_error[target_end + 1]]; any value in that interval
    reproduces the same window, and the midpoint is robust to round-off.
    """
    N = gains.horizon_N
    if not 1 <= target_end < N:
        raise ScenarioError(f"target_end must be in [1, {N - 1}], got {target_end}")
    report = analyze(gains, tolerance=1.0)
    lo = report.K_error[target_end]
    hi = report.K_error[target_end + 1]
    if not 0 < lo < hi:
        raise ScenarioError(
            f"error series is not strictly settling around index {target_end}"
        )
    return float(np.sqrt(lo * hi))


def steady_state_invariance(
    scenario: ScenarioConfig, gamma_k, N1: int, N2: int
) -> float:
    """``||K_star(N1) - K_star(N2)||_F`` for the same constant selection vector.

    The steady state should not depend on the horizon length once both
    horizons comfortably exceed the settling time.
    """
    out = []
    for N in (N1, N2):
        sc = scenario.with_horizon(N)
        gains = solve_gains(sc, constant_gamma(gamma_k, N))
        out.append(gains.K[1])
    return float(np.linalg.norm(out[0] - out[1]))


def topology_symmetry_probe(
    scenario: ScenarioConfig,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Error series for each single-agent selection choice.

    Returns ``{agent index: (K_error, F_error)}`` with one entry per agent,
    each from a constant one-hot selection.  On symmetric topologies,
    structurally equivalent agents produce identical series.
    """
    n, N = scenario.n, scenario.horizon_N
    series: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for i in range(n):
        gains = solve_gains(scenario, constant_gamma(np.eye(n)[i], N))
        report = analyze(gains, tolerance=1.0)
        series[i] = (report.K_error, report.F_error)
    return series
