"""Reproduction pipelines: reference tables and plot-ready figure bundles.

Deterministic pipelines (objective tables, settling windows) compare against
built-in reference values and report hard pass/fail; learning pipelines are
stochastic and report soft rows (measured values with loose bands noted).
Every report embeds the seeds, tolerances, and hyperparameters needed to
re-run it bit-identically.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import dp
from .convergence import analyze, calibrate_tolerance
from .env import MdpConfig
from .reporting import (
    ExperimentReport,
    ReportRow,
    write_curve_csv,
    write_series_csv,
    write_trajectory_csv,
)
from .scenarios import builtin_scenario, scenario_digest
from .system import AttackPlan, ScenarioConfig, rollout
from .training import (
    TrainConfig,
    baseline_random,
    baseline_sampling,
    enumeration_count,
    train_one_stage,
    train_two_stage,
    _greedy_objective,
)

__all__ = ["reproduce_table", "figure_bundle", "FIGURE_BUNDLES"]

# Reference rows: constant single-agent selections on the two 3-agent
# networks, N = 50, unit weights.  (attack energy J2, objective J)
REFERENCE_OBJECTIVES = {
    "linear3": [(6.8787, 68.6639), (14.7073, 36.0239), (3.0517, 130.6101)],
    "circle3": [(5.9828, 64.0186), (14.7073, 23.3255), (4.9348, 72.1756)],
}
OBJECTIVE_TOL = 1e-3

# Reference settling windows on linear3 with agent 1 selected: horizon ->
# (K window end, F window end).  The F entry for N = 1000 is the published
# reference as printed; the settling pattern implies 986 and the pipeline
# reports the measured value with a flag.
REFERENCE_WINDOWS = {50: (35, 36), 100: (85, 86), 200: (185, 186)}
REFERENCE_WINDOW_N1000_K = 985
REFERENCE_WINDOW_N1000_F_PRINTED = 186
SETTLE_GAP_K = 15
SETTLE_GAP_F = 14

# Loose bands for the stochastic comparison rows (3-agent, 10-agent).
SOFT_TARGETS = {
    "linear3": {"random": 4039.0, "sampling": 27.8, "one-stage": 30.0, "two-stage": 30.0},
    "star10": {"random": 21311.0, "sampling": 318.0, "one-stage": 295.0, "two-stage": 295.0},
}
RANDOM_BUDGET = 10**6
SAMPLING_BUDGET = 10**5


def _constant_plan_rows(name: str, seed: int) -> tuple[ExperimentReport, ScenarioConfig]:
    scenario = builtin_scenario(name)
    report = ExperimentReport(
        experiment_id=f"objective-table-{name}",
        scenario_digest=scenario_digest(scenario),
        fingerprint={"seed": seed, "tolerance": OBJECTIVE_TOL},
    )
    for i, (exp_J2, exp_J) in enumerate(REFERENCE_OBJECTIVES[name]):
        gamma = dp.constant_gamma(np.eye(scenario.n)[i], scenario.horizon_N)
        _, _, parts = dp.solve_optimal_plan(scenario, gamma)
        ok = abs(parts.J2 - exp_J2) <= OBJECTIVE_TOL and abs(parts.J - exp_J) <= OBJECTIVE_TOL
        report.rows.append(
            ReportRow(
                label=f"{name} agent {i + 1}",
                measured={"J2": parts.J2, "J": parts.J},
                expected={"J2": exp_J2, "J": exp_J},
                tolerance=OBJECTIVE_TOL,
                source="reference",
                status="pass" if ok else "fail",
            )
        )
    return report, scenario


def _table_windows(seed: int) -> ExperimentReport:
    scenario = builtin_scenario("linear3")
    report = ExperimentReport(
        experiment_id="settling-windows",
        scenario_digest=scenario_digest(scenario),
        fingerprint={"seed": seed, "selection": "agent 1"},
    )
    e1 = np.eye(scenario.n)[0]
    gains50 = dp.solve_gains(
        scenario.with_horizon(50), dp.constant_gamma(e1, 50)
    )
    tol = calibrate_tolerance(gains50, REFERENCE_WINDOWS[50][0])
    report.fingerprint["tolerance"] = tol

    windows = {}
    for N in (50, 100, 200, 1000):
        sc = scenario.with_horizon(N)
        rep = analyze(dp.solve_gains(sc, dp.constant_gamma(e1, N)), tol)
        windows[N] = (rep.xi_star_K[1], rep.xi_star_F[1])

    for N, (exp_K, exp_F) in REFERENCE_WINDOWS.items():
        b_K, b_F = windows[N]
        ok = b_K == exp_K and b_F == exp_F
        report.rows.append(
            ReportRow(
                label=f"N={N}",
                measured={"K_window_end": b_K, "F_window_end": b_F},
                expected={"K_window_end": float(exp_K), "F_window_end": float(exp_F)},
                source="reference",
                status="pass" if ok else "fail",
            )
        )
    b_K, b_F = windows[1000]
    report.rows.append(
        ReportRow(
            label="N=1000 K",
            measured={"K_window_end": b_K},
            expected={"K_window_end": float(REFERENCE_WINDOW_N1000_K)},
            source="reference",
            status="pass" if b_K == REFERENCE_WINDOW_N1000_K else "fail",
        )
    )
    flagged = b_F != REFERENCE_WINDOW_N1000_F_PRINTED
    report.rows.append(
        ReportRow(
            label="N=1000 F",
            measured={"F_window_end": b_F},
            expected={"F_window_end": float(REFERENCE_WINDOW_N1000_F_PRINTED)},
            source="reference",
            status="info",
            note=(
                "measured window end disagrees with the printed reference value; "
                f"every other row follows N - {SETTLE_GAP_F}, which here gives "
                f"{1000 - SETTLE_GAP_F}"
            ) if flagged else "",
        )
    )
    gaps_K = {N - windows[N][0] for N in windows}
    gaps_F = {N - windows[N][1] for N in windows}
    report.rows.append(
        ReportRow(
            label="settling gap constant across N",
            measured={
                "K_gaps": ",".join(str(g) for g in sorted(gaps_K)),
                "F_gaps": ",".join(str(g) for g in sorted(gaps_F)),
            },
            expected={"K_gap": float(SETTLE_GAP_K), "F_gap": float(SETTLE_GAP_F)},
            source="reference",
            status="pass" if gaps_K == {SETTLE_GAP_K} and gaps_F == {SETTLE_GAP_F} else "fail",
        )
    )
    return report


def _soft_row(label, measured, target, note="") -> ReportRow:
    return ReportRow(
        label=label,
        measured=measured,
        expected={"J": target},
        source="reference",
        status="soft",
        note=note,
    )


def _table_algorithms(seed: int, budget_scale: float) -> ExperimentReport:
    report = ExperimentReport(
        experiment_id="algorithm-comparison",
        scenario_digest="",
        fingerprint={
            "seed": seed,
            "budget_scale": budget_scale,
            "phi": 1.0,
            "discount": 0.99,
            "T_r": 10,
            "delta_one_stage": 0.1,
            "delta_two_stage": 2.0,
        },
    )
    digests = []
    for name in ("linear3", "star10"):
        scenario = builtin_scenario(name)
        digests.append(scenario_digest(scenario))
        mdp = MdpConfig(scenario=scenario)
        targets = SOFT_TARGETS[name]

        count = enumeration_count(mdp)
        report.rows.append(
            ReportRow(
                label=f"{name} brute-force",
                measured={"candidates": str(count)},
                status="info",
                note="enumeration refused above cap; count shown for scale",
            )
        )

        rnd = baseline_random(mdp, max(1, int(RANDOM_BUDGET * budget_scale)), seed=seed)
        report.rows.append(
            _soft_row(
                f"{name} random",
                {"J": rnd.J, "samples": rnd.samples_used},
                targets["random"],
                note="order-of-magnitude target",
            )
        )
        smp = baseline_sampling(mdp, max(1, int(SAMPLING_BUDGET * budget_scale)), seed=seed)
        report.rows.append(
            _soft_row(
                f"{name} sampling",
                {"J": smp.J, "samples": smp.samples_used},
                targets["sampling"],
            )
        )

        one_cfg = TrainConfig(delta=0.1, seed=seed,
                              max_episodes=int(50000 * budget_scale) or 100)
        policy, curve1 = train_one_stage(one_cfg, mdp)
        J_one, _ = _greedy_objective(policy, mdp)
        report.rows.append(
            _soft_row(
                f"{name} one-stage",
                {"J": J_one, "samples": curve1[-1].samples},
                targets["one-stage"],
            )
        )

        two_cfg = TrainConfig(delta=2.0, T_r=10, seed=seed,
                              max_episodes=int(20000 * budget_scale) or 100)
        solution, _ = train_two_stage(two_cfg, mdp)
        report.rows.append(
            _soft_row(
                f"{name} two-stage",
                {"J": solution.J, "samples": solution.samples_used},
                targets["two-stage"],
            )
        )
    report.scenario_digest = "+".join(digests)
    return report


def reproduce_table(which: int, seed: int = 0, budget_scale: float = 1.0) -> ExperimentReport:
    """Run the pipeline behind one of the four reference tables."""
    if which == 1:
        report, _ = _constant_plan_rows("linear3", seed)
        return report
    if which == 2:
        report, _ = _constant_plan_rows("circle3", seed)
        return report
    if which == 3:
        return _table_windows(seed)
    if which == 4:
        return _table_algorithms(seed, budget_scale)
    raise ValueError(f"table must be 1, 2, 3, or 4, got {which}")


# -- figure bundles ------------------------------------------------------------

FIGURE_BUNDLES = {
    "states": "fig5a",
    "signals": "fig5b",
    "initial-states": "fig5c",
    "convergence": "fig7",
    "learning": "fig9",
    "delta-sweep": "fig4",
}
_ALIASES = {alias: name for name, alias in FIGURE_BUNDLES.items()}

DELTA_SWEEP = (0.1, 0.5, 1.0, 2.0, 4.0, 8.0)


def figure_bundle(
    which: str, out_dir: str | Path, seed: int = 0, budget_scale: float = 1.0
) -> list[Path]:
    """Emit the CSV bundle for one figure; returns the written paths."""
    which = _ALIASES.get(which, which)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit_trajectory(fname, traj):
        path = out / fname
        write_trajectory_csv(path, traj)
        written.append(path)

    def emit_series(fname, series):
        path = out / fname
        write_series_csv(path, series)
        written.append(path)

    if which == "states":
        scenario = builtin_scenario("linear3")
        N, n = scenario.horizon_N, scenario.n
        quiet = rollout(scenario, AttackPlan.zeros(n, N))
        emit_trajectory("states_unattacked.csv", quiet)
        _, attacked, _ = dp.solve_optimal_plan(
            scenario, dp.constant_gamma(np.eye(n)[0], N)
        )
        emit_trajectory("states_attacked.csv", attacked)
    elif which == "signals":
        for name in ("linear3", "circle3"):
            scenario = builtin_scenario(name)
            N, n = scenario.horizon_N, scenario.n
            for i in range(n):
                plan, _, _ = dp.solve_optimal_plan(
                    scenario, dp.constant_gamma(np.eye(n)[i], N)
                )
                emit_series(f"theta_{name}_agent{i + 1}.csv", plan.theta)
    elif which == "initial-states":
        base = builtin_scenario("circle3")
        for tag, x0 in (("a", [-1, 12, -5]), ("b", [-1, 10, -15])):
            scenario = ScenarioConfig(x0, base.x_star, base.system, base.weights)
            plan, _, _ = dp.solve_optimal_plan(
                scenario, dp.constant_gamma([1, 0, 0], scenario.horizon_N)
            )
            emit_series(f"theta_x0_{tag}.csv", plan.theta)
    elif which == "convergence":
        from .convergence import topology_symmetry_probe

        for name in ("linear3", "circle3"):
            scenario = builtin_scenario(name)
            for i, (k_err, f_err) in topology_symmetry_probe(scenario).items():
                emit_series(f"K_error_{name}_agent{i + 1}.csv", k_err)
                emit_series(f"F_error_{name}_agent{i + 1}.csv", f_err)
    elif which == "learning":
        scenario = builtin_scenario("linear3")
        mdp = MdpConfig(scenario=scenario)
        _, curve1 = train_one_stage(
            TrainConfig(delta=0.1, seed=seed, max_episodes=int(30000 * budget_scale) or 100),
            mdp,
        )
        path = out / "curve_one_stage.csv"
        write_curve_csv(path, curve1)
        written.append(path)
        _, curve2 = train_two_stage(
            TrainConfig(delta=2.0, seed=seed, max_episodes=int(20000 * budget_scale) or 100),
            mdp,
        )
        path = out / "curve_two_stage.csv"
        write_curve_csv(path, curve2)
        written.append(path)
    elif which == "delta-sweep":
        scenario = builtin_scenario("linear3")
        mdp = MdpConfig(scenario=scenario)
        import csv as _csv

        path = out / "delta_sweep.csv"
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["delta", "samples", "J"])
            for delta in DELTA_SWEEP:
                cfg = TrainConfig(
                    delta=delta, seed=seed,
                    max_episodes=int(30000 * budget_scale) or 100,
                )
                solution, _ = train_two_stage(cfg, mdp)
                w.writerow([delta, solution.samples_used, repr(float(solution.J))])
        written.append(path)
    else:
        known = sorted(FIGURE_BUNDLES) + sorted(_ALIASES)
        raise ValueError(f"unknown figure bundle {which!r}; choose from {known}")
    return written
