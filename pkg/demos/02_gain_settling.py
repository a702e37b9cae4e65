"""How quickly the backward signal gains settle, and why that matters.

The gain matrices K_k and feedback rows F_k are computed backward from the
horizon.  A few steps below the horizon they stop changing: the adversary can
therefore compute a handful of backward iterates once and reuse the settled
values for any horizon length.  This script measures the settled window on
the path-graph network, shows it is horizon-independent, and probes how the
choice of compromised agent interacts with the topology.

Run:  python demos/02_gain_settling.py
"""

import numpy as np

from seqfdi import (
    ScenarioConfig,
    WeightScheme,
    analyze,
    build_consensus_system,
    calibrate_tolerance,
    constant_gamma,
    solve_gains,
)
from seqfdi.convergence import steady_state_invariance, topology_symmetry_probe

laplacian = [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]


def scenario(N):
    return ScenarioConfig(
        [-1.0, 12.0, -5.0], [0.0, 0.0, 0.0],
        build_consensus_system(laplacian, 0.2, N),
        WeightScheme.identity(3, N),
    )


e1 = np.array([1.0, 0.0, 0.0])
tolerance = calibrate_tolerance(solve_gains(scenario(50), constant_gamma(e1, 50)), 35)
print(f"calibrated relative tolerance: {tolerance:.4e}\n")

print(f"  {'horizon N':>9} {'K settled on':>14} {'F settled on':>14} {'N - end':>8}")
for N in (50, 100, 200, 1000):
    report = analyze(solve_gains(scenario(N), constant_gamma(e1, N)), tolerance)
    print(
        f"  {N:>9} {str(list(report.xi_star_K)):>14} {str(list(report.xi_star_F)):>14}"
        f" {N - report.xi_star_K[1]:>8}"
    )
print(
    "\nthe distance from the horizon to the settled window is constant:"
    "\nonly ~15 backward steps are ever needed, no matter how long the run."
)

gap = steady_state_invariance(scenario(50), e1, 100, 200)
print(f"\nsteady-state gain difference between N=100 and N=200: {gap:.2e}")

print("\nper-agent settling error at k = 20 (topology fingerprint):")
for i, (k_err, f_err) in topology_symmetry_probe(scenario(50)).items():
    print(f"  agent {i + 1}: K error {k_err[20]:.3e}   F error {f_err[20]:.3e}")
print(
    "\nagents 1 and 3 sit in mirror positions of the path graph, so their"
    "\nseries coincide exactly; the middle agent behaves differently."
)
