"""Co-design of sequential false-data-injection attacks on consensus systems.

The package splits into: plant and cost models (:mod:`seqfdi.system`), the
closed-form signal solver (:mod:`seqfdi.dp`), settling analysis of its gains
(:mod:`seqfdi.convergence`), the episodic decision process
(:mod:`seqfdi.env`), learners and baselines (:mod:`seqfdi.training` on top of
:mod:`seqfdi.nets`), and reproduction pipelines with a CLI
(:mod:`seqfdi.experiments`, :mod:`seqfdi.cli`).
"""

from .convergence import ConvergenceReport, analyze, calibrate_tolerance
from .dp import (
    DpGains,
    DpSolveError,
    compact_K_recursion,
    constant_gamma,
    optimal_signal,
    solve_gains,
    solve_optimal_plan,
    stationarity_check,
)
from .env import AttackEnv, EpisodeError, EpisodeRecord, MdpConfig, compute_rewards, expected_return
from .nets import PolicyNetwork, PolicySpec, ValueNetwork
from .scenarios import builtin_scenario, load_scenario
from .system import (
    AttackPlan,
    LinearSystem,
    ObjectiveParts,
    ScenarioConfig,
    ScenarioError,
    Trajectory,
    WeightScheme,
    build_consensus_system,
    evaluate_objective,
    rollout,
    step,
)
from .training import (
    AttackSolution,
    BruteForceRefusedError,
    TrainConfig,
    TrainingDivergedError,
    baseline_brute_force,
    baseline_random,
    baseline_sampling,
    refine_with_oracle,
    train_one_stage,
    train_two_stage,
)

__version__ = "0.1.0"
