"""Discrete energy, its exact gradient, and the constraint and Pohozaev functionals.

With ``S(u) = |grad u|^2`` evaluated by :func:`~qls_ground.grid.gradient_square`,
the discrete energy is

    I = 1/2 (K_u + K_v + P_u + P_v + Q_u + Q_v) - 2/(alpha+beta) C

where ``K = int S(u)``, ``P = int A u^2``, ``Q = int u^2 S(u)`` and
``C = int |u|^alpha |v|^beta``.  All gradients here are taken with respect to
the discrete L2 inner product ``h^N sum(a b)``, so the gradient field is the
nodewise residual of the Euler-Lagrange system.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import GridMismatchError
from .grid import (
    GridSpec,
    StatePair,
    backward_difference,
    central_difference,
    forward_difference,
    gradient_square,
    inner,
    integrate_array,
)
from .potentials import PotentialSpec


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the coupled quasilinear system."""

    dim: int
    alpha: float
    beta: float
    potential_A: PotentialSpec
    potential_B: PotentialSpec
    grid: GridSpec

    def __post_init__(self):
        if self.grid.dim != self.dim:
            raise ValueError(f"grid dimension {self.grid.dim} differs from problem dimension {self.dim}")
        check_exponents(self.dim, self.alpha, self.beta)

    @property
    def exponent_sum(self) -> float:
        return self.alpha + self.beta

    def with_grid(self, grid: GridSpec) -> "ProblemSpec":
        return ProblemSpec(self.dim, self.alpha, self.beta, self.potential_A, self.potential_B, grid)

    def swapped(self) -> "ProblemSpec":
        return ProblemSpec(self.dim, self.beta, self.alpha, self.potential_B, self.potential_A, self.grid)


def check_exponents(dim: int, alpha: float, beta: float) -> None:
    """Raise ``ValueError`` unless ``alpha, beta > 1`` and the sum is in the admissible range.

    For ``N >= 3`` the sum must lie below ``4N/(N-2)``; ``N`` in {1, 2} has no
    upper bound.
    """
    if not alpha > 1:
        raise ValueError(f"rule alpha > 1 violated: alpha = {alpha}")
    if not beta > 1:
        raise ValueError(f"rule beta > 1 violated: beta = {beta}")
    if dim >= 3:
        upper = 4.0 * dim / (dim - 2)
        if not alpha + beta < upper:
            raise ValueError(
                f"rule 2 < alpha + beta < 4N/(N-2) violated: alpha + beta = {alpha + beta} >= {upper}"
            )


@dataclass(frozen=True)
class EnergyBreakdown:
    kin_u: float
    kin_v: float
    pot_u: float
    pot_v: float
    quasi_u: float
    quasi_v: float
    coupling: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyBreakdown":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})

    @property
    def kinetic(self) -> float:
        return self.kin_u + self.kin_v

    @property
    def potential(self) -> float:
        return self.pot_u + self.pot_v

    @property
    def quasi(self) -> float:
        return self.quasi_u + self.quasi_v


def _check_grid(s: StatePair, p: ProblemSpec) -> None:
    if s.grid != p.grid:
        raise GridMismatchError(f"state grid {s.grid} differs from problem grid {p.grid}")


def potential_arrays(p: ProblemSpec) -> tuple[NDArray, NDArray]:
    coords = p.grid.coordinates()
    shape = p.grid.shape
    return (
        np.broadcast_to(p.potential_A.values(coords), shape),
        np.broadcast_to(p.potential_B.values(coords), shape),
    )


def radial_arrays(p: ProblemSpec) -> tuple[NDArray, NDArray]:
    coords = p.grid.coordinates()
    shape = p.grid.shape
    return (
        np.broadcast_to(p.potential_A.radial_values(coords), shape),
        np.broadcast_to(p.potential_B.radial_values(coords), shape),
    )


def coupling_density(u, v, alpha: float, beta: float):
    return np.abs(u) ** alpha * np.abs(v) ** beta


def breakdown(u: NDArray, v: NDArray, p: ProblemSpec) -> EnergyBreakdown:
    g = p.grid
    A, B = potential_arrays(p)
    su = gradient_square(u, g)
    sv = gradient_square(v, g)
    parts = dict(
        kin_u=integrate_array(g, su),
        kin_v=integrate_array(g, sv),
        pot_u=integrate_array(g, A * u * u),
        pot_v=integrate_array(g, B * v * v),
        quasi_u=integrate_array(g, u * u * su),
        quasi_v=integrate_array(g, v * v * sv),
        coupling=integrate_array(g, coupling_density(u, v, p.alpha, p.beta)),
    )
    quad = sum(parts[k] for k in ("kin_u", "kin_v", "pot_u", "pot_v", "quasi_u", "quasi_v"))
    total = 0.5 * quad - 2.0 * parts["coupling"] / p.exponent_sum
    return EnergyBreakdown(total=total, **parts)


def energy(s: StatePair, p: ProblemSpec) -> EnergyBreakdown:
    """The seven component integrals of the energy and its total."""
    _check_grid(s, p)
    return breakdown(s.u.values, s.v.values, p)


def _signed_power(x, q):
    # |x|^(q-1) sign(x): continuous at 0 for q > 1
    return np.sign(x) * np.abs(x) ** (q - 1.0)


def _stencil_parts(w: NDArray, grid: GridSpec) -> tuple[NDArray, NDArray]:
    """Gradients of ``1/2 int S(w)`` and ``1/2 int w^2 S(w)``."""
    h, bc = grid.spacing, grid.boundary
    lap = np.zeros(grid.shape)
    quasi = w * gradient_square(w, grid)
    w2 = w * w
    for axis in range(grid.dim):
        fw = forward_difference(w, axis, h, bc)
        bw = backward_difference(w, axis, h, bc)
        # adjoints: fwd^T = -bwd, bwd^T = -fwd
        lap -= 0.5 * (backward_difference(fw, axis, h, bc) + forward_difference(bw, axis, h, bc))
        quasi -= 0.5 * (backward_difference(w2 * fw, axis, h, bc) + forward_difference(w2 * bw, axis, h, bc))
    return lap, quasi


def _coupling_gradient(u, v, p: ProblemSpec) -> tuple[NDArray, NDArray]:
    """Gradient of ``C = int |u|^alpha |v|^beta``."""
    return (
        p.alpha * _signed_power(u, p.alpha) * np.abs(v) ** p.beta,
        p.beta * np.abs(u) ** p.alpha * _signed_power(v, p.beta),
    )


def gradient_parts(u: NDArray, v: NDArray, p: ProblemSpec) -> tuple[tuple[NDArray, NDArray], ...]:
    """Gradient of the discrete energy split by homogeneity degree.

    Returns ``(quadratic, quartic, coupling)``, each a ``(g_u, g_v)`` pair,
    homogeneous of degree 1, 3 and ``alpha+beta-1`` in ``(u, v)``.
    """
    A, B = potential_arrays(p)
    lu, qu = _stencil_parts(u, p.grid)
    lv, qv = _stencil_parts(v, p.grid)
    cu, cv = _coupling_gradient(u, v, p)
    scale = -2.0 / p.exponent_sum
    return (lu + A * u, lv + B * v), (qu, qv), (scale * cu, scale * cv)


def gradient_arrays(u: NDArray, v: NDArray, p: ProblemSpec) -> tuple[NDArray, NDArray]:
    (qu, qv), (cu, cv), (ju, jv) = gradient_parts(u, v, p)
    return qu + cu + ju, qv + cv + jv


def gateaux_gradient(s: StatePair, p: ProblemSpec) -> StatePair:
    """Exact gradient of the discrete energy.

    For every direction ``(phi1, phi2)``, ``h^N sum(g_u phi1 + g_v phi2)``
    equals the derivative of :func:`energy` ``.total`` along that direction.
    """
    _check_grid(s, p)
    gu, gv = gradient_arrays(s.u.values, s.v.values, p)
    return StatePair.from_arrays(s.grid, gu, gv)


def radial_integrals(u: NDArray, v: NDArray, p: ProblemSpec) -> tuple[float, float]:
    """``int (grad A . x) u^2`` and ``int (grad B . x) v^2``."""
    RA, RB = radial_arrays(p)
    g = p.grid
    return integrate_array(g, RA * u * u), integrate_array(g, RB * v * v)


def G_from_parts(e: EnergyBreakdown, radial: tuple[float, float], p: ProblemSpec) -> float:
    n, q = p.dim, p.exponent_sum
    return (
        0.5 * n * e.kinetic
        + 0.5 * (n + 2) * (e.potential + e.quasi)
        + 0.5 * (radial[0] + radial[1])
        - 2.0 * (n + q) / q * e.coupling
    )


def P_from_parts(e: EnergyBreakdown, radial: tuple[float, float], p: ProblemSpec) -> float:
    n, q = p.dim, p.exponent_sum
    return (
        0.5 * (n - 2) * (e.kinetic + e.quasi)
        + 0.5 * n * e.potential
        + 0.5 * (radial[0] + radial[1])
        - 2.0 * n / q * e.coupling
    )


def constraint_G(s: StatePair, p: ProblemSpec) -> float:
    """The Nehari-Pohozaev constraint functional ``G``."""
    _check_grid(s, p)
    u, v = s.u.values, s.v.values
    return G_from_parts(breakdown(u, v, p), radial_integrals(u, v, p), p)


def pohozaev_P(s: StatePair, p: ProblemSpec) -> float:
    """The Pohozaev functional ``P``; it vanishes on continuum solutions."""
    _check_grid(s, p)
    u, v = s.u.values, s.v.values
    return P_from_parts(breakdown(u, v, p), radial_integrals(u, v, p), p)


def constraint_G_parts(u: NDArray, v: NDArray, p: ProblemSpec):
    """Gradient of :func:`constraint_G` split by homogeneity degree (1, 3, ``alpha+beta-1``)."""
    n, q = p.dim, p.exponent_sum
    A, B = potential_arrays(p)
    RA, RB = radial_arrays(p)
    lu, qu = _stencil_parts(u, p.grid)
    lv, qv = _stencil_parts(v, p.grid)
    cu, cv = _coupling_gradient(u, v, p)
    k = -2.0 * (n + q) / q

    def lin(lap, V, R, w):
        return n * lap + (n + 2) * V * w + R * w

    return (
        (lin(lu, A, RA, u), lin(lv, B, RB, v)),
        ((n + 2) * qu, (n + 2) * qv),
        (k * cu, k * cv),
    )


def nehari_from_parts(e: EnergyBreakdown) -> float:
    """``<I'(s), s>`` from the components; equals ``G - P`` identically."""
    return e.kinetic + e.potential + 2.0 * e.quasi - 2.0 * e.coupling


def dilation_generator(u: NDArray, v: NDArray, grid: GridSpec) -> tuple[NDArray, NDArray]:
    """``d/dt [t w(x/t)]`` at ``t = 1``, i.e. ``w - x . grad w`` with central differences."""
    h, bc = grid.spacing, grid.boundary
    coords = grid.coordinates()

    def one(w):
        out = w.copy()
        for axis, x in enumerate(coords):
            out -= x * central_difference(w, axis, h, bc)
        return out

    return one(u), one(v)


def dilation_generator_adjoint(gu: NDArray, gv: NDArray, grid: GridSpec) -> tuple[NDArray, NDArray]:
    """Adjoint of the linear map :func:`dilation_generator` in the discrete L2 product."""
    h, bc = grid.spacing, grid.boundary
    coords = grid.coordinates()

    def one(w):
        out = w.copy()
        # central difference is skew-adjoint in both boundary modes
        for axis, x in enumerate(coords):
            out += central_difference(x * w, axis, h, bc)
        return out

    return one(gu), one(gv)


def scaling_constraint(s: StatePair, p: ProblemSpec) -> float:
    """Derivative of the discrete energy along the infinitesimal dilation ``w - x . grad w``.

    In the continuum this is exactly ``G``.  On the grid it differs from
    :func:`constraint_G` by ``O(h^2)``, but unlike ``G`` it vanishes at every
    critical point of the discrete energy, which makes ``{scaling_constraint = 0}``
    a natural constraint for the discrete problem.
    """
    _check_grid(s, p)
    u, v = s.u.values, s.v.values
    gu, gv = gradient_arrays(u, v, p)
    xu, xv = dilation_generator(u, v, p.grid)
    return inner(p.grid, gu, xu) + inner(p.grid, gv, xv)
