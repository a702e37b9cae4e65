"""Scenario files and the built-in catalog.

A scenario file is YAML with these keys:

* ``n`` -- agent count; ``horizon`` -- final decision index N.
* either ``laplacian`` (+ ``epsilon``) for a consensus plant ``I - eps L``,
  or ``w`` with an explicit system matrix.
* ``x0``, ``x_star`` -- length-n vectors.
* ``weights`` -- the string ``identity`` or a mapping with ``p``/``q``/``h``
  matrices (constant over time).
* optional ``name``.

Three scenarios ship with the package: ``linear3``, ``circle3`` (3-agent
path and cycle consensus networks), and ``star10`` (a 10-agent network).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .system import (
    LinearSystem,
    ScenarioConfig,
    ScenarioError,
    WeightScheme,
    build_consensus_system,
)

__all__ = [
    "BUILTIN_SCENARIOS",
    "load_scenario",
    "parse_scenario",
    "builtin_scenario",
    "scenario_digest",
]

BUILTIN_SCENARIOS = ("linear3", "circle3", "star10")


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return mapping[key]


def parse_scenario(doc: dict, where: str = "scenario") -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed YAML document."""
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: top level must be a mapping")
    n = int(_require(doc, "n", where))
    horizon = int(_require(doc, "horizon", where))
    if "laplacian" in doc:
        epsilon = float(_require(doc, "epsilon", where))
        system = build_consensus_system(doc["laplacian"], epsilon, horizon)
    elif "w" in doc:
        system = LinearSystem(np.asarray(doc["w"], dtype=float), horizon)
    else:
        raise ScenarioError(f"{where}: need either 'laplacian' (+ 'epsilon') or 'w'")
    if system.n != n:
        raise ScenarioError(f"{where}: matrix is {system.n}x{system.n} but n = {n}")

    spec = _require(doc, "weights", where)
    if spec == "identity":
        weights = WeightScheme.identity(n, horizon)
    elif isinstance(spec, dict):
        for key in ("p", "q", "h"):
            _require(spec, key, f"{where}.weights")
        weights = WeightScheme(
            np.asarray(spec["p"], dtype=float),
            np.asarray(spec["q"], dtype=float),
            np.asarray(spec["h"], dtype=float),
            horizon,
        )
    else:
        raise ScenarioError(
            f"{where}: weights must be 'identity' or a p/q/h mapping, got {spec!r}"
        )
    return ScenarioConfig(
        _require(doc, "x0", where), _require(doc, "x_star", where), system, weights
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load a scenario file; YAML syntax errors keep their line numbers."""
    path = Path(path)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return parse_scenario(doc, where=str(path))


def builtin_scenario(name: str) -> ScenarioConfig:
    """One of the bundled scenarios by catalog name."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(
            f"unknown scenario {name!r}; built-ins are {', '.join(BUILTIN_SCENARIOS)}"
        )
    text = resources.files("seqfdi.data").joinpath(f"{name}.yaml").read_text()
    return parse_scenario(yaml.safe_load(text), where=name)


def scenario_digest(scenario: ScenarioConfig) -> str:
    """Short stable hash of the full scenario contents (for report fingerprints)."""
    import hashlib

    h = hashlib.sha256()
    for arr in (
        scenario.x0,
        scenario.x_star,
        scenario.system.W,
        scenario.weights.P,
        scenario.weights.Q,
        scenario.weights.H,
    ):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(str(scenario.horizon_N).encode())
    return h.hexdigest()[:16]
