"""Ground states of a coupled quasilinear Schrödinger system with periodic potentials.

The unknown is a pair ``(u, v)`` on a uniform grid.  The library evaluates
the discrete energy and its exact gradient, the scaling constraint ``G``
and the Pohozaev functional ``P``, the fiber map ``t -> I(t u(x/t), t v(x/t))``,
and minimises the energy on the constraint manifold.
"""

from .diagnostics import (
    SequenceSample,
    brezis_lieb_residual,
    min_max_cross_check,
    quasilinear_lsc_gap,
    translated_bump_family,
    write_residual_csv,
)
from .errors import (
    BracketError,
    ConfigError,
    DegenerateWindowError,
    DimensionError,
    GridMismatchError,
    NoMaximizerError,
    NumericInputError,
    QLSError,
    SolveError,
    StalledError,
    TruncationWarning,
    UnsupportedModeError,
    VanishingError,
)
from .fiber import (
    FiberMoments,
    FiberResult,
    fiber_derivative,
    fiber_energy,
    fiber_scale,
    fiber_scale_pair,
    find_fiber_max,
    project_to_manifold,
)
from .functionals import (
    EnergyBreakdown,
    ProblemSpec,
    constraint_G,
    energy,
    gateaux_gradient,
    pohozaev_P,
    scaling_constraint,
)
from .grid import (
    Field,
    GridSpec,
    StatePair,
    gradient_field,
    gradient_square,
    integrate,
    translate,
    translate_pair,
)
from .io import read_field_binary, read_field_csv, write_field_binary, write_field_csv
from .potentials import CosineTerm, PotentialSpec, ValidationReport, eval_potential, radial_derivative, validate
from .solver import (
    SolveOptions,
    SolveReport,
    initial_state,
    minimize_on_manifold,
    recenter,
    vanishing_metric,
    write_trace_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
