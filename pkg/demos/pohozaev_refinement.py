"""
Pohozaev residual under refinement
==================================

P vanishes at solutions of the continuum problem. On the grid it does
not, but it shrinks as the spacing does.
"""

import warnings

from qls_ground import GridSpec, PotentialSpec, ProblemSpec, initial_state, minimize_on_manifold
from qls_ground.errors import TruncationWarning

warnings.simplefilter("ignore", TruncationWarning)
one = PotentialSpec.constant(1.0)

for M in (16, 24, 32):
    problem = ProblemSpec(3, 2.0, 2.0, one, one, GridSpec(3, 6.0, M))
    _, rep = minimize_on_manifold(problem, initial_state(problem, 0))
    print(f"M = {M:2d}   h = {12 / M:.3f}   m = {rep.m_estimate:10.4f}   |P| = {abs(rep.P_residual):8.4f}")
