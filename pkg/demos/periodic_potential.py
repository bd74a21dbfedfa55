"""
Periodic potentials
===================

A cosine potential on the torus: the energy does not see a shift by one
period, and recentering undoes such a shift.
"""

import numpy as np

from qls_ground import (
    GridSpec,
    PotentialSpec,
    ProblemSpec,
    StatePair,
    energy,
    recenter,
    translate_pair,
    validate,
)

A = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.3, 0, 1), (0.2, 1, 1)], (1.0,))
grid = GridSpec(2, 6.0, 48, "torus")
problem = ProblemSpec(2, 1.7, 2.2, A, A, grid)

# the structural checks are only sampled inside the box
report = validate(A, problem)
for name, margin in report.margins.items():
    print(f"{name:20s} margin {margin:+.3e}")

rng = np.random.default_rng(0)
s = StatePair.from_arrays(grid, rng.normal(size=grid.shape), rng.normal(size=grid.shape))
period = int(round(1.0 / grid.spacing))
moved = translate_pair(s, (period, 0))
print("energy change under one period:", energy(moved, problem).total - energy(s, problem).total)

r2 = grid.radius_squared()
bump = StatePair.from_arrays(grid, np.exp(-r2), np.exp(-r2))
back, shift = recenter(translate_pair(bump, (period, -2 * period)), problem)
print("recenter shift:", shift, " exact:", np.array_equal(back.u.values, bump.u.values))
