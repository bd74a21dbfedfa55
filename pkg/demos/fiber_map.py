"""
The fiber map and its maximiser
===============================

Along t -> t u(x/t) the energy rises, peaks once, then falls. The peak
lands the state on the constraint set {G = 0}.
"""

import numpy as np

from qls_ground import (
    FiberMoments,
    GridSpec,
    PotentialSpec,
    ProblemSpec,
    StatePair,
    constraint_G,
    find_fiber_max,
    project_to_manifold,
)

one = PotentialSpec.constant(1.0)
grid = GridSpec(3, 6.0, 24)
problem = ProblemSpec(3, 2.0, 2.0, one, one, grid)

r2 = grid.radius_squared()
s = StatePair.from_arrays(grid, 3.0 * np.exp(-r2 / 2.25), 2.5 * np.exp(-r2 / 2.25))
print("G before:", constraint_G(s, problem))

# the fiber only needs a handful of moments
m = FiberMoments.from_state(s, problem)
for t in (0.25, 0.5, 1.0, 1.5, 2.0, 3.0):
    print(f"t = {t:4.2f}   h = {m.h(t):12.4f}   h' = {m.dh(t):12.4f}")

res = find_fiber_max(s, problem)
print("t_bar =", res.t_bar, " h(t_bar) =", res.h_at_max)

# projection resamples the fields at t_bar and polishes the scale
on, info = project_to_manifold(s, problem)
print("G after :", constraint_G(on, problem), " applied scale:", info.t_projection)
