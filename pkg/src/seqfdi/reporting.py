"""CSV emission for trajectories, gains, error series, curves, and reports.

All floats are written with ``repr`` (shortest round-trip form), so files from
seeded runs are byte-identical across repeats.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EpisodeRecord
from .system import Trajectory

__all__ = [
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_gains_csv",
    "write_series_csv",
    "write_curve_csv",
    "write_episode_csv",
    "gamma_bitmask",
    "ReportRow",
    "ExperimentReport",
]


def _fmt(x) -> str:
    return repr(float(x))


def gamma_bitmask(gamma_k: np.ndarray) -> int:
    """Selection vector packed into an integer, agent i on bit i."""
    return int(sum(1 << i for i, g in enumerate(gamma_k) if g))


def unpack_bitmask(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=float)


def write_trajectory_csv(path: str | Path, trajectory: Trajectory) -> None:
    """Rows k = 0..N+1; the final row has no action columns."""
    n = trajectory.states.shape[1]
    N = trajectory.horizon_N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", *[f"x_{i + 1}" for i in range(n)], "theta", "gamma_bitmask"])
        for k in range(N + 2):
            row = [k, *[_fmt(v) for v in trajectory.states[k]]]
            if k <= N:
                row += [_fmt(trajectory.theta[k]), gamma_bitmask(trajectory.gamma[k])]
            else:
                row += ["", ""]
            w.writerow(row)


def read_trajectory_csv(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n = len([c for c in header if c.startswith("x_")])
    body = rows[1:]
    states = np.array([[float(v) for v in row[1 : 1 + n]] for row in body])
    acting = [row for row in body if row[1 + n] != ""]
    theta = np.array([float(row[1 + n]) for row in acting])
    gamma = np.array([unpack_bitmask(int(row[2 + n]), n) for row in acting])
    return Trajectory(states=states, gamma=gamma, theta=theta)


def write_gains_csv(path: str | Path, gains) -> None:
    """Rows k = 0..N+1 with K flattened row-major; F/M/R empty on the last row."""
    N = gains.horizon_N
    n = gains.K.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        k_cols = [f"K_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        f_cols = [f"F_{i + 1}" for i in range(n)]
        w.writerow(["k", *k_cols, *f_cols, "M", "R"])
        for k in range(N + 2):
            row = [k, *[_fmt(v) for v in gains.K[k].ravel()]]
            if k <= N:
                row += [_fmt(v) for v in gains.F[k]]
                row += [_fmt(gains.M[k]), _fmt(gains.R[k])]
            else:
                row += [""] * (n + 2)
            w.writerow(row)


def write_series_csv(path: str | Path, errors: np.ndarray) -> None:
    """Two columns: index k and the error value at k."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "error"])
        for k, e in enumerate(errors):
            w.writerow([k, _fmt(e)])


def write_curve_csv(path: str | Path, curve) -> None:
    """Training / search progress: cumulative samples, J, mean return."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["samples", "J", "mean_return"])
        for point in curve:
            mean_return = getattr(point, "mean_return", np.nan)
            w.writerow([int(point.samples), _fmt(point.J), _fmt(mean_return)])


def write_episode_csv(path: str | Path, record: EpisodeRecord) -> None:
    """Trajectory schema extended with reward and reference-signal columns."""
    n = record.states.shape[1]
    N = record.horizon_N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["k", *[f"x_{i + 1}" for i in range(n)], "theta", "gamma_bitmask",
             "theta_star", "reward"]
        )
        for k in range(N + 2):
            row = [k, *[_fmt(v) for v in record.states[k]]]
            if k <= N:
                row += [
                    _fmt(record.thetas[k]),
                    gamma_bitmask(record.gammas[k]),
                    _fmt(record.theta_stars[k]),
                    _fmt(record.rewards[k]),
                ]
            else:
                row += [""] * 4
            w.writerow(row)


@dataclass
class ReportRow:
    """One comparison line of an experiment report.

    ``source`` is "reference" when an expected value is built in (deterministic
    reproduction rows), "measured" when the row only records what this run
    produced.  ``status`` is "pass"/"fail" for hard rows, "soft" for
    stochastic rows compared against loose targets, "info" for context rows.
    """

    label: str
    measured: dict[str, float | int | str]
    expected: dict[str, float] = field(default_factory=dict)
    tolerance: float | None = None
    source: str = "measured"
    status: str = "info"
    note: str = ""


@dataclass
class ExperimentReport:
    """Structured result of one experiment command, re-runnable from the fingerprint."""

    experiment_id: str
    scenario_digest: str
    fingerprint: dict
    rows: list[ReportRow] = field(default_factory=list)

    @property
    def hard_failures(self) -> list[ReportRow]:
        return [r for r in self.rows if r.status == "fail"]

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def render(self) -> str:
        lines = [f"experiment: {self.experiment_id}",
                 f"scenario_digest: {self.scenario_digest}"]
        for key, value in sorted(self.fingerprint.items()):
            lines.append(f"config.{key}: {value}")
        lines.append("")
        for row in self.rows:
            parts = [f"[{row.status.upper()}]", row.label, f"({row.source})"]
            for key, value in row.measured.items():
                shown = f"{value:.6g}" if isinstance(value, float) else str(value)
                parts.append(f"{key}={shown}")
            for key, value in row.expected.items():
                parts.append(f"expected_{key}={value:.6g}")
            if row.tolerance is not None:
                parts.append(f"tol={row.tolerance:g}")
            if row.note:
                parts.append(f"note: {row.note}")
            lines.append("  " + " ".join(parts))
        lines.append("")
        lines.append("result: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.render())

    def write_rows_csv(self, path: str | Path) -> None:
        keys: list[str] = []
        for row in self.rows:
            for key in list(row.measured) + list(row.expected):
                if key not in keys:
                    keys.append(key)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "status", "source", *keys, "tolerance", "note"])
            for row in self.rows:
                record = []
                for key in keys:
                    if key in row.measured:
                        value = row.measured[key]
                        record.append(_fmt(value) if isinstance(value, float) else value)
                    elif key in row.expected:
                        record.append(_fmt(row.expected[key]))
                    else:
                        record.append("")
                w.writerow(
                    [row.label, row.status, row.source, *record,
                     "" if row.tolerance is None else _fmt(row.tolerance), row.note]
                )
