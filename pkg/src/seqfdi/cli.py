"""Command-line front end.

Subcommands: ``solve`` (closed-form plan for a fixed selection), ``converge``
(settling analysis of the backward gains), ``train`` (policy-gradient
learners), ``figures`` (plot-ready CSV bundles), and ``reproduce-tables``
(reference-table pipelines with pass/fail rows).

Exit codes: 0 success, 1 hard reproduction failure, 2 usage / input errors.
Each run writes into its own directory named by experiment id and a short
hash of the configuration, so repeated runs never clobber each other.
"""

from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import dp
from .convergence import analyze, calibrate_tolerance
from .env import MdpConfig
from .experiments import figure_bundle, reproduce_table
from .reporting import write_curve_csv, write_gains_csv, write_series_csv, write_trajectory_csv
from .scenarios import BUILTIN_SCENARIOS, builtin_scenario, load_scenario, scenario_digest
from .system import AttackPlan, ScenarioConfig, ScenarioError, evaluate_objective, rollout
from .training import TrainConfig, train_one_stage, train_two_stage, _greedy_objective

__all__ = ["main"]


def _fail_usage(message: str) -> None:
    raise click.UsageError(message)


def _resolve_scenario(token: str, x0: str | None, x_star: str | None) -> ScenarioConfig:
    try:
        if token in BUILTIN_SCENARIOS:
            scenario = builtin_scenario(token)
        else:
            scenario = load_scenario(token)
    except (ScenarioError, OSError) as exc:
        _fail_usage(str(exc))
    try:
        if x0 is not None:
            scenario = ScenarioConfig(
                _parse_vector(x0, scenario.n), scenario.x_star, scenario.system, scenario.weights
            )
        if x_star is not None:
            scenario = ScenarioConfig(
                scenario.x0, _parse_vector(x_star, scenario.n), scenario.system, scenario.weights
            )
    except ScenarioError as exc:
        _fail_usage(str(exc))
    return scenario


def _parse_vector(text: str, n: int) -> np.ndarray:
    try:
        vec = np.array([float(v) for v in text.split(",")])
    except ValueError:
        _fail_usage(f"expected comma-separated numbers, got {text!r}")
    if vec.shape != (n,):
        _fail_usage(f"expected {n} components, got {vec.shape[0]}")
    return vec


def _parse_gamma(spec: str, scenario: ScenarioConfig) -> np.ndarray | None:
    """Selection spec: 'none', 'e<i>', 'agents:i,j,...', or a CSV file of 0/1 rows."""
    n, N = scenario.n, scenario.horizon_N
    if spec == "none":
        return None
    if spec.startswith("e") and spec[1:].isdigit():
        i = int(spec[1:])
        if not 1 <= i <= n:
            _fail_usage(f"agent index in {spec!r} must be in 1..{n}")
        return dp.constant_gamma(np.eye(n)[i - 1], N)
    if spec.startswith("agents:"):
        try:
            idx = [int(v) for v in spec[len("agents:"):].split(",")]
        except ValueError:
            _fail_usage(f"bad agent list in {spec!r}")
        if not all(1 <= i <= n for i in idx):
            _fail_usage(f"agent indices in {spec!r} must be in 1..{n}")
        g = np.zeros(n)
        g[[i - 1 for i in idx]] = 1.0
        return dp.constant_gamma(g, N)
    path = Path(spec)
    if path.exists():
        try:
            G = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            _fail_usage(f"{path}: {exc}")
        if G.shape != (N + 1, n):
            _fail_usage(f"{path}: expected {N + 1} rows x {n} columns, got {G.shape}")
        return G
    _fail_usage(
        f"bad selection spec {spec!r}: use 'none', 'e<i>', 'agents:i,j', or a CSV path"
    )


def _run_dir(base: str | Path, experiment_id: str, fingerprint: dict) -> Path:
    digest = hashlib.sha256(
        yaml.safe_dump(fingerprint, sort_keys=True).encode()
    ).hexdigest()[:8]
    out = Path(base) / f"{experiment_id}-{digest}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        _fail_usage(f"--config {path}: {exc}")
    if not isinstance(doc, dict):
        _fail_usage(f"--config {path}: top level must be a mapping")
    return doc


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master RNG seed.")
@click.option("--out-dir", type=click.Path(), default="runs", show_default=True,
              help="Parent directory for run outputs.")
@click.option("--tolerance", type=float, default=None,
              help="Settling tolerance override for converge.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML file with train/mdp parameter overrides.")
@click.pass_context
def main(ctx, seed, out_dir, tolerance, config_path):
    """Attack co-design toolkit for discrete-time consensus systems."""
    ctx.obj = {
        "seed": seed,
        "out_dir": out_dir,
        "tolerance": tolerance,
        "config": _load_config_file(config_path),
    }


@main.command()
@click.argument("scenario")
@click.option("--gamma", default="e1", show_default=True,
              help="Selection: none, e<i>, agents:i,j, or CSV path.")
@click.option("--x0", default=None, help="Override initial state (comma-separated).")
@click.option("--x-star", default=None, help="Override target state (comma-separated).")
@click.pass_context
def solve(ctx, scenario, gamma, x0, x_star):
    """Closed-form plan and rollout for a fixed selection sequence."""
    sc = _resolve_scenario(scenario, x0, x_star)
    gamma_seq = _parse_gamma(gamma, sc)
    fingerprint = {"scenario": scenario_digest(sc), "gamma": gamma}
    out = _run_dir(ctx.obj["out_dir"], "solve", fingerprint)

    if gamma_seq is None:
        plan = AttackPlan.zeros(sc.n, sc.horizon_N)
        trajectory = rollout(sc, plan)
        parts = evaluate_objective(sc, trajectory)
    else:
        plan, trajectory, parts = dp.solve_optimal_plan(sc, gamma_seq)
        write_gains_csv(out / "gains.csv", dp.solve_gains(sc, gamma_seq))
    write_trajectory_csv(out / "trajectory.csv", trajectory)
    (out / "objective.txt").write_text(
        f"J1: {parts.J1!r}\nJ2: {parts.J2!r}\nJ: {parts.J!r}\n"
    )
    click.echo(f"J1={parts.J1:.4f} J2={parts.J2:.4f} J={parts.J:.4f}")
    click.echo(f"wrote {out}")


@main.command()
@click.argument("scenario")
@click.option("--gamma", default="e1", show_default=True,
              help="Constant selection: e<i> or agents:i,j.")
@click.pass_context
def converge(ctx, scenario, gamma):
    """Settling analysis of the backward gain recursion."""
    sc = _resolve_scenario(scenario, None, None)
    gamma_seq = _parse_gamma(gamma, sc)
    if gamma_seq is None:
        _fail_usage("converge needs a nonzero selection")
    gains = dp.solve_gains(sc, gamma_seq)
    tolerance = ctx.obj["tolerance"]
    if tolerance is None:
        try:
            ref = dp.solve_gains(sc.with_horizon(50), gamma_seq[:1].repeat(51, axis=0))
            tolerance = calibrate_tolerance(ref, 35)
        except ScenarioError as exc:
            _fail_usage(f"cannot auto-calibrate tolerance ({exc}); pass --tolerance")
    try:
        report = analyze(gains, tolerance)
    except ScenarioError as exc:
        _fail_usage(str(exc))

    fingerprint = {"scenario": scenario_digest(sc), "gamma": gamma, "tolerance": tolerance}
    out = _run_dir(ctx.obj["out_dir"], "converge", fingerprint)
    write_series_csv(out / "k_error.csv", report.K_error)
    write_series_csv(out / "f_error.csv", report.F_error)
    (out / "report.txt").write_text(
        f"tolerance: {report.tolerance!r}\n"
        f"K_window: [{report.xi_star_K[0]}, {report.xi_star_K[1]}]\n"
        f"F_window: [{report.xi_star_F[0]}, {report.xi_star_F[1]}]\n"
    )
    click.echo(
        f"K window [{report.xi_star_K[0]}, {report.xi_star_K[1]}], "
        f"F window [{report.xi_star_F[0]}, {report.xi_star_F[1]}] "
        f"at tolerance {tolerance:.6g}"
    )
    click.echo(f"wrote {out}")


@main.command()
@click.argument("scenario")
@click.option("--algo", type=click.Choice(["one-stage", "two-stage"]),
              default="two-stage", show_default=True)
@click.option("--delta", type=float, default=None,
              help="Stopping threshold (default 0.1 one-stage, 2.0 two-stage).")
@click.option("--t-r", type=int, default=10, show_default=True,
              help="Refinement sample count (two-stage).")
@click.option("--phi", type=float, default=1.0, show_default=True)
@click.option("--discount", type=float, default=0.99, show_default=True)
@click.option("--action-mode", type=click.Choice(["categorical", "binary"]),
              default="categorical", show_default=True)
@click.option("--max-episodes", type=int, default=None)
@click.pass_context
def train(ctx, scenario, algo, delta, t_r, phi, discount, action_mode, max_episodes):
    """Learn a selection strategy; writes the curve and the found solution."""
    sc = _resolve_scenario(scenario, None, None)
    overrides = ctx.obj["config"].get("train", {})
    mdp_overrides = ctx.obj["config"].get("mdp", {})
    if delta is None:
        delta = 2.0 if algo == "two-stage" else 0.1
    try:
        mdp = MdpConfig(
            scenario=sc,
            phi=mdp_overrides.get("phi", phi),
            discount=mdp_overrides.get("discount", discount),
            action_mode=mdp_overrides.get("action_mode", action_mode),
        )
        cfg = TrainConfig(**{
            "delta": delta,
            "T_r": t_r,
            "seed": ctx.obj["seed"],
            "max_episodes": max_episodes,
            **overrides,
        })
    except (ScenarioError, TypeError) as exc:
        _fail_usage(str(exc))

    fingerprint = {
        "scenario": scenario_digest(sc), "algo": algo, "delta": cfg.delta,
        "T_r": cfg.T_r, "phi": mdp.phi, "discount": mdp.discount,
        "action_mode": mdp.action_mode, "seed": cfg.seed,
        "max_episodes": cfg.max_episodes,
    }
    out = _run_dir(ctx.obj["out_dir"], f"train-{algo}", fingerprint)

    if algo == "two-stage":
        solution, curve = train_two_stage(cfg, mdp)
    else:
        policy, curve = train_one_stage(cfg, mdp)
        J, plan = _greedy_objective(policy, mdp)
        from .training import AttackSolution

        solution = AttackSolution.from_plan(
            mdp.scenario, plan.gamma, plan.theta, "one-stage",
            curve[-1].samples if curve else 0, curve=curve,
        )
    write_curve_csv(out / "curve.csv", curve)
    config_hash = hashlib.sha256(
        yaml.safe_dump(fingerprint, sort_keys=True).encode()
    ).hexdigest()[:16]
    (out / "solution.yaml").write_text(yaml.safe_dump({
        "provenance": solution.provenance,
        "J": float(solution.J),
        "samples_used": int(solution.samples_used),
        "seed": cfg.seed,
        "config_hash": config_hash,
        "phi": float(mdp.phi),
        "delta": float(cfg.delta),
        "T_r": int(cfg.T_r),
        "theta": [float(v) for v in solution.theta_seq],
        "gamma": [[int(v) for v in row] for row in solution.gamma_seq],
    }, sort_keys=False))
    write_trajectory_csv(
        out / "plan.csv",
        rollout(mdp.scenario, AttackPlan(solution.gamma_seq, solution.theta_seq)),
    )
    click.echo(f"{algo}: J={solution.J:.4f} samples={solution.samples_used}")
    click.echo(f"wrote {out}")


@main.command()
@click.argument("which")
@click.option("--budget-scale", type=float, default=1.0, show_default=True,
              help="Scale training/search budgets (smoke runs use small values).")
@click.pass_context
def figures(ctx, which, budget_scale):
    """Emit a plot-ready CSV bundle (states, signals, initial-states,
    convergence, learning, delta-sweep; fig* aliases accepted)."""
    fingerprint = {"which": which, "seed": ctx.obj["seed"], "budget_scale": budget_scale}
    out = _run_dir(ctx.obj["out_dir"], f"figures-{which}", fingerprint)
    try:
        written = figure_bundle(which, out, seed=ctx.obj["seed"], budget_scale=budget_scale)
    except ValueError as exc:
        _fail_usage(str(exc))
    for path in written:
        click.echo(f"wrote {path}")


@main.command("reproduce-tables")
@click.argument("which", type=int)
@click.option("--budget-scale", type=float, default=1.0, show_default=True,
              help="Scale stochastic-table budgets (table 4 only).")
@click.pass_context
def reproduce_tables(ctx, which, budget_scale):
    """Reproduce a reference table; exits 1 if a hard criterion fails."""
    if which not in (1, 2, 3, 4):
        _fail_usage(f"table must be 1, 2, 3, or 4, got {which}")
    report = reproduce_table(which, seed=ctx.obj["seed"], budget_scale=budget_scale)
    out = _run_dir(ctx.obj["out_dir"], f"table{which}", report.fingerprint)
    report.write(out / "report.txt")
    report.write_rows_csv(out / "rows.csv")
    click.echo(report.render(), nl=False)
    click.echo(f"wrote {out}")
    if not report.passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
