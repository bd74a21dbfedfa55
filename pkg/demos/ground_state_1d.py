"""
A ground state on the line
==========================

Constant potentials, alpha = beta = 2, on [-8, 8] with 256 nodes.
"""

import numpy as np

from qls_ground import GridSpec, PotentialSpec, ProblemSpec, SolveOptions, initial_state, minimize_on_manifold

one = PotentialSpec.constant(1.0)
problem = ProblemSpec(1, 2.0, 2.0, one, one, GridSpec(1, 8.0, 256))

# the initial guess is a noisy Gaussian, identical in both components
init = initial_state(problem, seed=0)
state, report = minimize_on_manifold(problem, init, SolveOptions())

print("converged:", report.converged, "after", report.iterations, "iterations")
print("level m  :", report.m_estimate)
print("|grad|   :", report.grad_norm)

# the warm start descends on {G = 0}; its energies live in warm_trace
print("warm stage ended at iteration", report.phase_switch, "with energy", report.warm_trace[-1])

# u and v agree because the system is symmetric and so was the start
u, v = state.u.values, state.v.values
print("max |u - v| / max u:", np.max(np.abs(u - v)) / u.max())

# a coarse picture of the profile
x = problem.grid.axis_coordinates()
for xi, ui in zip(x[::16], u[::16]):
    print(f"{xi:6.2f} " + "#" * int(60 * ui / u.max()))
