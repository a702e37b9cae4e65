"""Learning which agent to hit at each step, two ways.

The selection sequence lives in a discrete space too large to enumerate
(3^51 candidates even for three agents), so we learn it.  The one-stage
learner trains a stochastic policy on the episodic process until the
evaluated objective stops improving.  The two-stage variant stops that same
training early (loose threshold), then draws a handful of candidate
selection sequences from the half-trained policy and swaps in the
closed-form optimal signal for each: the refinement recovers the quality the
truncated training left on the table, at a fraction of the episodes.

Run:  python demos/03_learning_selection.py            (~2-4 minutes)
"""

from seqfdi import MdpConfig, TrainConfig, builtin_scenario, train_one_stage, train_two_stage
from seqfdi.training import _greedy_objective

mdp = MdpConfig(scenario=builtin_scenario("linear3"), phi=1.0, discount=0.99)

print("two-stage: loose stop (delta=2) + oracle refinement of 10 samples")
solution, curve = train_two_stage(
    TrainConfig(delta=2.0, T_r=10, seed=0, max_episodes=20000), mdp
)
print(f"  found J = {solution.J:.2f} using {solution.samples_used} episodes")
counts = solution.gamma_seq.argmax(axis=1) + 1
print(f"  selection pattern (agent per step): {''.join(map(str, counts))}")

print("\none-stage: train to convergence (delta=0.1)")
policy, curve1 = train_one_stage(
    TrainConfig(delta=0.1, seed=0, max_episodes=30000), mdp
)
J_one, _ = _greedy_objective(policy, mdp)
print(f"  converged J = {J_one:.2f} using {curve1[-1].samples} episodes")

marks = [curve1[i] for i in range(0, len(curve1), max(1, len(curve1) // 8))]
print("\n  one-stage progress (episodes -> greedy J):")
for point in marks:
    print(f"    {point.samples:>6} -> {point.J:8.2f}")
print(
    f"\nsame quality neighborhood, but the two-stage route needed "
    f"{solution.samples_used} episodes against {curve1[-1].samples}."
)
