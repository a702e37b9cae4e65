import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqfdi.system import (
    AttackPlan,
    LinearSystem,
    ScenarioConfig,
    ScenarioError,
    WeightScheme,
    build_consensus_system,
    evaluate_objective,
    rollout,
    step,
)

L_LINEAR = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
L_CIRCLE = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])


def linear3(N=50):
    return ScenarioConfig(
        [-1.0, 12.0, -5.0],
        [0.0, 0.0, 0.0],
        build_consensus_system(L_LINEAR, 0.2, N),
        WeightScheme.identity(3, N),
    )


class TestBuildConsensusSystem:
    def test_linear_network_first_row(self):
        system = build_consensus_system(L_LINEAR, 0.2, 50)
        assert np.allclose(system.W[0][0], [0.8, 0.2, 0.0])
        assert system.time_invariant
        assert system.horizon_N == 50

    def test_zero_laplacian_gives_identity(self):
        system = build_consensus_system(np.zeros((3, 3)), 0.2, 10)
        assert np.array_equal(system.W[0], np.eye(3))

    def test_circle_network_doubly_stochastic(self):
        system = build_consensus_system(L_CIRCLE, 0.2, 50)
        W = system.W[0]
        assert np.allclose(W.sum(axis=0), 1.0)
        assert np.allclose(W.sum(axis=1), 1.0)

    @pytest.mark.parametrize(
        "laplacian,fragment",
        [
            (np.ones((2, 3)), "square"),
            (np.array([[1.0, -1.0], [0.0, 0.0]]), "symmetric"),
            (np.array([[1.0, -1.0], [-1.0, 2.0]]), "row sums"),
            (np.array([[-1.0, 1.0], [1.0, -1.0]]), "off-diagonal"),
        ],
    )
    def test_rejects_non_laplacian_naming_property(self, laplacian, fragment):
        with pytest.raises(ScenarioError, match=fragment):
            build_consensus_system(laplacian, 0.2, 10)

    def test_rejects_epsilon_beyond_degree_bound(self):
        with pytest.raises(ScenarioError, match="1/max_degree"):
            build_consensus_system(L_LINEAR, 0.5001, 10)
        with pytest.raises(ScenarioError, match="positive"):
            build_consensus_system(L_LINEAR, 0.0, 10)


class TestStep:
    def test_scalar_cancellation(self):
        system = LinearSystem(np.array([[1.0]]), 1)
        assert step(system, 0, [1.0], [1.0], -1.0) == pytest.approx([0.0])

    def test_zero_selection_is_pure_drift(self):
        scenario = linear3()
        x = np.array([3.0, -2.0, 7.0])
        out = step(scenario.system, 5, x, [0, 0, 0], 123.0)
        assert np.allclose(out, scenario.system.W[5] @ x)

    def test_single_matrix_vector_product(self):
        # Hand-checked: W x = [1.6, 6.0, -1.6], plus theta = 2 on agent 1.
        system = build_consensus_system(L_LINEAR, 0.2, 50)
        out = step(system, 0, [-1.0, 12.0, -5.0], [1, 0, 0], 2.0)
        assert np.allclose(out, [3.6, 6.0, -1.6])
        # Mass balance: the injection adds exactly theta to the state sum.
        assert out.sum() == pytest.approx(6.0 + 2.0)

    def test_dimension_and_range_errors(self):
        system = build_consensus_system(L_LINEAR, 0.2, 10)
        with pytest.raises(ScenarioError, match="dimension"):
            step(system, 0, [1.0, 2.0], [1, 0, 0], 0.0)
        with pytest.raises(ScenarioError, match="dimension"):
            step(system, 0, [1.0, 2.0, 3.0], [1, 0], 0.0)
        with pytest.raises(ScenarioError, match="outside"):
            step(system, 11, [1.0, 2.0, 3.0], [1, 0, 0], 0.0)


class TestRollout:
    def test_unattacked_consensus_reaches_average(self):
        scenario = linear3()
        traj = rollout(scenario, AttackPlan.zeros(3, 50))
        assert np.allclose(traj.states[-1], [2.0, 2.0, 2.0], atol=0.01)

    def test_zero_everything_stays_zero(self):
        scenario = ScenarioConfig(
            np.zeros(3), np.zeros(3),
            build_consensus_system(L_LINEAR, 0.2, 20),
            WeightScheme.identity(3, 20),
        )
        traj = rollout(scenario, AttackPlan.zeros(3, 20))
        assert np.all(traj.states == 0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ScenarioError, match="steps"):
            rollout(linear3(), AttackPlan.zeros(3, 49))

    def test_dp_plan_reaches_target(self):
        from seqfdi.dp import constant_gamma, solve_optimal_plan

        scenario = linear3()
        _, traj, _ = solve_optimal_plan(scenario, constant_gamma([1, 0, 0], 50))
        assert np.linalg.norm(traj.states[-1]) < 0.5


class TestEvaluateObjective:
    def test_zero_trajectory_zero_cost(self):
        scenario = ScenarioConfig(
            np.zeros(3), np.zeros(3),
            build_consensus_system(L_LINEAR, 0.2, 10),
            WeightScheme.identity(3, 10),
        )
        traj = rollout(scenario, AttackPlan.zeros(3, 10))
        parts = evaluate_objective(scenario, traj)
        assert parts == (0.0, 0.0, 0.0)

    def test_table_values_constant_selection(self):
        from seqfdi.dp import constant_gamma, solve_optimal_plan

        _, _, parts = solve_optimal_plan(linear3(), constant_gamma([1, 0, 0], 50))
        assert parts.J2 == pytest.approx(6.8787, abs=1e-3)
        assert parts.J == pytest.approx(68.6639, abs=1e-3)

        circle = ScenarioConfig(
            [-1.0, 12.0, -5.0], np.zeros(3),
            build_consensus_system(L_CIRCLE, 0.2, 50),
            WeightScheme.identity(3, 50),
        )
        _, _, parts = solve_optimal_plan(circle, constant_gamma([0, 1, 0], 50))
        assert parts.J2 == pytest.approx(14.7073, abs=1e-3)
        assert parts.J == pytest.approx(23.3255, abs=1e-3)

    def test_additivity_is_exact(self):
        rng = np.random.default_rng(0)
        scenario = linear3(N=7)
        plan = AttackPlan(
            (rng.random((8, 3)) < 0.4).astype(float), rng.normal(size=8)
        )
        parts = evaluate_objective(scenario, rollout(scenario, plan))
        assert parts.J == parts.J1 + parts.J2

    def test_terminal_weight_is_H_not_P(self):
        # One-step scenario where swapping H for P changes the objective.
        W = np.array([[1.0]])
        system = LinearSystem(W, 1)
        x0, x_star = np.array([1.0]), np.array([0.0])
        plan = AttackPlan(np.ones((2, 1)), np.array([1.0, 1.0]))

        def J_with(P_scale, H_scale):
            weights = WeightScheme(
                P_scale * np.eye(1), np.eye(1), H_scale * np.eye(1), 1
            )
            scenario = ScenarioConfig(x0, x_star, system, weights)
            return evaluate_objective(scenario, rollout(scenario, plan))

        base = J_with(1.0, 5.0)
        swapped = J_with(5.0, 1.0)
        # states: x1 = 2, x2 = 3; J1(base) = 1*4 + 5*9, J1(swapped) = 5*4 + 1*9
        assert base.J1 == pytest.approx(4.0 + 45.0)
        assert swapped.J1 == pytest.approx(20.0 + 9.0)
        assert base.J1 != swapped.J1

    def test_initial_state_excluded_from_tracking_cost(self):
        # x0 is far from the target but drifts nowhere (W = I, no attack):
        # every later state equals x0, so J1 counts it N times plus the
        # terminal term, never N+2 times.
        system = LinearSystem(np.eye(1), 3)
        weights = WeightScheme.identity(1, 3)
        scenario = ScenarioConfig([2.0], [0.0], system, weights)
        parts = evaluate_objective(scenario, rollout(scenario, AttackPlan.zeros(1, 3)))
        assert parts.J1 == pytest.approx(4.0 * 4)  # k = 1, 2, 3 and terminal


class TestInvariants:
    @given(
        seed=st.integers(0, 10**6),
        theta_zero=st.booleans(),
    )
    @settings(max_examples=40, deadline=None)
    def test_zero_attack_neutrality(self, seed, theta_zero):
        # theta == 0 with arbitrary selections matches gamma == 0 with
        # arbitrary signals: both are the unattacked run.
        rng = np.random.default_rng(seed)
        scenario = linear3(N=6)
        if theta_zero:
            plan = AttackPlan((rng.random((7, 3)) < 0.5).astype(float), np.zeros(7))
        else:
            plan = AttackPlan(np.zeros((7, 3)), rng.normal(size=7))
        quiet = rollout(scenario, AttackPlan.zeros(3, 6))
        attacked = rollout(scenario, plan)
        assert np.array_equal(quiet.states, attacked.states)

    @pytest.mark.parametrize("laplacian", [L_LINEAR, L_CIRCLE])
    def test_consensus_spread_non_increasing(self, laplacian):
        scenario = ScenarioConfig(
            [-1.0, 12.0, -5.0], np.zeros(3),
            build_consensus_system(laplacian, 0.2, 60),
            WeightScheme.identity(3, 60),
        )
        traj = rollout(scenario, AttackPlan.zeros(3, 60))
        spread = traj.states.max(axis=1) - traj.states.min(axis=1)
        assert np.all(np.diff(spread) <= 1e-12)

    def test_random_connected_graph_spread_non_increasing(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(3, 8))
            adj = np.zeros((n, n))
            for i in range(1, n):  # path backbone keeps it connected
                adj[i - 1, i] = adj[i, i - 1] = 1.0
            extra = rng.random((n, n)) < 0.3
            adj = np.maximum(adj, np.triu(extra, 1) + np.triu(extra, 1).T)
            L = np.diag(adj.sum(axis=1)) - adj
            eps = 0.9 / adj.sum(axis=1).max()
            scenario = ScenarioConfig(
                rng.normal(size=n) * 5, np.zeros(n),
                build_consensus_system(L, eps, 40),
                WeightScheme.identity(n, 40),
            )
            traj = rollout(scenario, AttackPlan.zeros(n, 40))
            spread = traj.states.max(axis=1) - traj.states.min(axis=1)
            assert np.all(np.diff(spread) <= 1e-9)


class TestValidation:
    def test_weights_must_be_symmetric(self):
        bad = np.array([[1.0, 0.3], [0.0, 1.0]])
        with pytest.raises(ScenarioError, match="symmetric"):
            WeightScheme(bad, np.eye(2), np.eye(2), 5)

    def test_weights_must_be_positive_definite(self):
        bad = np.diag([1.0, -0.5])
        with pytest.raises(ScenarioError, match="positive definite"):
            WeightScheme(np.eye(2), np.eye(2), bad, 5)

    def test_plan_entries_binary(self):
        with pytest.raises(ScenarioError, match="0 or 1"):
            AttackPlan(np.full((3, 2), 0.5), np.zeros(3))

    def test_horizon_must_be_positive(self):
        with pytest.raises(ScenarioError, match="horizon"):
            LinearSystem(np.eye(2), 0)

    def test_state_dimensions_checked(self):
        system = LinearSystem(np.eye(2), 3)
        with pytest.raises(ScenarioError, match="dimension"):
            ScenarioConfig([1.0], [0.0, 0.0], system, WeightScheme.identity(2, 3))

    def test_non_finite_rejected(self):
        with pytest.raises(ScenarioError, match="finite"):
            LinearSystem(np.array([[np.inf]]), 2)
