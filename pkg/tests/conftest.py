import warnings

import numpy as np
import pytest

from qls_ground import GridSpec, PotentialSpec, SolveOptions, StatePair, initial_state, minimize_on_manifold
from qls_ground.errors import TruncationWarning
from qls_ground.functionals import ProblemSpec

ONE = PotentialSpec.constant(1.0)


def make_problem(dim, L, M, A=ONE, B=ONE, alpha=2.0, beta=2.0, boundary="zero"):
    return ProblemSpec(dim, alpha, beta, A, B, GridSpec(dim, L, M, boundary))


def random_pair(grid, rng, scale=1.0):
    return StatePair.from_arrays(grid, scale * rng.normal(size=grid.shape), scale * rng.normal(size=grid.shape))


def gaussian_pair(grid, centre=None, width=1.0, amp=1.0, amp_v=None):
    centre = np.zeros(grid.dim) if centre is None else np.asarray(centre, dtype=float)
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coordinates(), centre))
    f = amp * np.exp(-r2 / width ** 2) * np.ones(grid.shape)
    g = (amp if amp_v is None else amp_v) * np.exp(-r2 / width ** 2) * np.ones(grid.shape)
    return StatePair.from_arrays(grid, f, g)


def solve_quietly(p, seed=0, **opts):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return minimize_on_manifold(p, initial_state(p, seed), SolveOptions(seed=seed, **opts))


@pytest.fixture(scope="session")
def ground_state_3d():
    """The desk-scale reference solve: N=3, L=6, M=24, A=B=1, alpha=beta=2."""
    p = make_problem(3, 6.0, 24)
    state, report = solve_quietly(p)
    return p, state, report
