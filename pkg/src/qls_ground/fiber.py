"""The fiber map ``t -> I(u_t, v_t)`` with ``u_t(x) = t u(x/t)``.

The fiber energy is expanded in closed form from t-independent moments of the
base state.  The potential terms are evaluated analytically at the scaled node
coordinates ``t x``, so no field is resampled while searching for the
maximiser.  Resampling happens once, in :func:`project_to_manifold`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage, optimize

from .errors import BracketError, NoMaximizerError, TruncationWarning, UnsupportedModeError
from .functionals import (
    ProblemSpec,
    _check_grid,
    constraint_G,
    coupling_density,
)
from .grid import Field, StatePair, gradient_square, integrate_array, total_sum

EXPANSION_CAP = 2.0 ** 60
TRUNCATION_LIMIT = 1e-6


@dataclass
class FiberMoments:
    """The t-independent integrals of the fiber expansion.

    ``u2`` and ``v2`` are the quadrature weights ``h^N u^2`` and ``h^N v^2``
    used for the potential terms; leave them ``None`` for synthetic moments
    without potential contributions.
    """

    dim: int
    alpha: float
    beta: float
    K1: float
    K2: float
    C: float
    u2: Optional[NDArray] = field(default=None, repr=False)
    v2: Optional[NDArray] = field(default=None, repr=False)
    problem: Optional[ProblemSpec] = field(default=None, repr=False)

    @classmethod
    def from_state(cls, s: StatePair, p: ProblemSpec) -> "FiberMoments":
        _check_grid(s, p)
        g = p.grid
        u, v = s.u.values, s.v.values
        su, sv = gradient_square(u, g), gradient_square(v, g)
        K1 = integrate_array(g, su) + integrate_array(g, sv)
        K2 = integrate_array(g, u * u * su) + integrate_array(g, v * v * sv)
        C = integrate_array(g, coupling_density(u, v, p.alpha, p.beta))
        vol = g.cell_volume
        return cls(p.dim, p.alpha, p.beta, K1, K2, C, vol * u * u, vol * v * v, p)

    @property
    def exponent_sum(self) -> float:
        return self.alpha + self.beta

    def _scaled_coords(self, t):
        return tuple(t * c for c in self.problem.grid.coordinates())

    def potential_moment(self, t: float) -> float:
        """``int A(t x) u^2 + int B(t x) v^2``."""
        if self.u2 is None:
            return 0.0
        xs = self._scaled_coords(t)
        p = self.problem
        return total_sum(p.potential_A.values(xs) * self.u2) + total_sum(p.potential_B.values(xs) * self.v2)

    def radial_moment(self, t: float) -> float:
        """``int (grad A(t x) . t x) u^2 + int (grad B(t x) . t x) v^2``."""
        if self.u2 is None:
            return 0.0
        xs = self._scaled_coords(t)
        p = self.problem
        return total_sum(p.potential_A.radial_values(xs) * self.u2) + total_sum(
            p.potential_B.radial_values(xs) * self.v2
        )

    def h(self, t: float) -> float:
        n, q = self.dim, self.exponent_sum
        return (
            0.5 * t ** n * self.K1
            + 0.5 * t ** (n + 2) * (self.K2 + self.potential_moment(t))
            - 2.0 * t ** (n + q) / q * self.C
        )

    def dh(self, t: float) -> float:
        n, q = self.dim, self.exponent_sum
        return (
            0.5 * n * t ** (n - 1) * self.K1
            + 0.5 * (n + 2) * t ** (n + 1) * (self.K2 + self.potential_moment(t))
            + 0.5 * t ** (n + 1) * self.radial_moment(t)
            - 2.0 * (n + q) / q * t ** (n + q - 1) * self.C
        )


@dataclass
class FiberResult:
    """Location of the fiber maximum.

    The JSON form carries ``t_bar, h_at_max, iterations, bracket_lo,
    bracket_hi``.  :func:`project_to_manifold` additionally fills
    ``t_projection`` (the scale actually applied to the fields),
    ``interp_error`` (``|G|`` right after resampling at ``t_bar``) and
    ``truncation_loss`` (share of the rescaled ``L2`` mass pushed out of the
    box).
    """

    t_bar: float
    h_at_max: float
    iterations: int
    bracket: tuple[float, float]
    t_projection: Optional[float] = None
    interp_error: Optional[float] = None
    truncation_loss: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "t_bar": self.t_bar,
            "h_at_max": self.h_at_max,
            "iterations": self.iterations,
            "bracket_lo": self.bracket[0],
            "bracket_hi": self.bracket[1],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_t(t: float) -> None:
    if not t > 0:
        raise ValueError(f"fiber parameter must be positive, got {t}")


def fiber_energy(s: StatePair, p: ProblemSpec, t: float) -> float:
    """``h(t) = I(u_t, v_t)`` from the closed-form expansion."""
    _check_t(t)
    return FiberMoments.from_state(s, p).h(t)


def fiber_derivative(s: StatePair, p: ProblemSpec, t: float) -> float:
    """``h'(t)``; note ``h'(1)`` equals ``constraint_G(s)``."""
    _check_t(t)
    return FiberMoments.from_state(s, p).dh(t)


def fiber_max_from_moments(m: FiberMoments, rel_tol: float = 1e-12) -> FiberResult:
    """Bracket the sign change of ``h'`` geometrically from ``t = 1`` and bisect it."""
    if not m.C > 0:
        raise NoMaximizerError("coupling integral is zero: the fiber energy has no maximum")
    iterations = 0
    lo, hi = 1.0, 1.0
    d1 = m.dh(1.0)
    if d1 >= 0:
        hi = 2.0
        while m.dh(hi) >= 0:
            lo, hi = hi, 2.0 * hi
            iterations += 1
            if hi > EXPANSION_CAP:
                raise BracketError("h' stayed non-negative up to t = 2^60")
        if d1 == 0:
            lo = 0.5
    else:
        lo = 0.5
        while m.dh(lo) <= 0:
            hi, lo = lo, 0.5 * lo
            iterations += 1
            if lo < 1.0 / EXPANSION_CAP:
                raise BracketError("h' stayed non-positive down to t = 2^-60")
    bracket = (lo, hi)
    while hi - lo > rel_tol * 0.5 * (lo + hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if m.dh(mid) > 0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    t_bar = 0.5 * (lo + hi)
    h_max = m.h(t_bar)
    worst = max(m.h(t_bar * (1.0 - 1e-3)), m.h(t_bar * (1.0 + 1e-3)))
    if worst > h_max + 1e-12 * abs(h_max):
        raise BracketError(f"t = {t_bar} is not a local maximum of the fiber energy")
    return FiberResult(t_bar, h_max, iterations, bracket)


def find_fiber_max(s: StatePair, p: ProblemSpec) -> FiberResult:
    """Unique maximiser of the fiber energy of a nonzero state with positive coupling."""
    if not (np.any(s.u.values) or np.any(s.v.values)):
        raise NoMaximizerError("the zero state has no fiber maximum")
    return fiber_max_from_moments(FiberMoments.from_state(s, p))


def fiber_scale(f: Field, t: float) -> Field:
    """Resample ``t f(x/t)`` on the same grid by multilinear interpolation.

    Values beyond the box are zero; between the outermost node and the
    first ghost node the interpolation runs towards zero, so the result is
    continuous in ``t``.
    """
    _check_t(t)
    g = f.grid
    if g.boundary != "zero":
        raise UnsupportedModeError("fiber scaling is only defined in zero boundary mode")
    if t == 1.0:
        return Field(g, f.values.copy())
    x = g.axis_coordinates()
    idx = (x / t - x[0]) / g.spacing
    mesh = np.meshgrid(*([idx] * g.dim), indexing="ij")
    vals = ndimage.map_coordinates(f.values, mesh, order=1, mode="grid-constant", cval=0.0)
    return Field(g, t * vals)


def fiber_scale_pair(s: StatePair, t: float) -> StatePair:
    return StatePair(fiber_scale(s.u, t), fiber_scale(s.v, t))


def truncation_loss(s: StatePair, t: float) -> float:
    """Share of the rescaled ``L2`` mass whose image ``t x`` leaves the box."""
    g = s.grid
    inside = np.ones(g.shape, dtype=bool)
    for c in g.coordinates():
        xs = t * c
        inside = inside & (np.abs(xs) <= g.half_extent)
    mass = s.u.values ** 2 + s.v.values ** 2
    total = total_sum(mass)
    if total == 0:
        return 0.0
    return total_sum(np.where(inside, 0.0, mass)) / total


def _refine_scale(s: StatePair, p: ProblemSpec, t0: float, target, tol: float) -> float:
    """Root of ``target(fiber_scale(s, t))`` near ``t0``; ``t0`` if no bracket is found."""

    def residual(t):
        return target(fiber_scale_pair(s, t), p)

    r0 = residual(t0)
    if r0 == 0.0:
        return t0
    for width in (1.02, 1.1, 1.3, 1.7):
        lo, hi = t0 / width, t0 * width
        rlo, rhi = residual(lo), residual(hi)
        if np.sign(rlo) != np.sign(r0):
            return optimize.brentq(residual, lo, t0, xtol=tol * t0, rtol=4 * np.finfo(float).eps)
        if np.sign(rhi) != np.sign(r0):
            return optimize.brentq(residual, t0, hi, xtol=tol * t0, rtol=4 * np.finfo(float).eps)
    return t0


def project_to_manifold(s: StatePair, p: ProblemSpec, target=constraint_G, tol: float = 1e-14):
    """Rescale ``s`` onto ``{target = 0}`` along its fiber.

    The fiber maximiser ``t_bar`` comes from the moment expansion.  Because
    multilinear resampling perturbs the integrals by ``O(h^2)``, the applied
    scale is then polished by a bracketed root search on
    ``target(fiber_scale(s, t))`` started at ``t_bar``.

    Returns the projected state and a :class:`FiberResult`.  Emits
    :class:`~qls_ground.errors.TruncationWarning` when more than ``1e-6`` of
    the ``L2`` mass leaves the box.
    """
    _check_grid(s, p)
    if p.grid.boundary != "zero":
        raise UnsupportedModeError("projection needs zero boundary mode")
    res = find_fiber_max(s, p)
    first = fiber_scale_pair(s, res.t_bar)
    res.interp_error = abs(target(first, p))
    t_proj = _refine_scale(s, p, res.t_bar, target, tol)
    out = first if t_proj == res.t_bar else fiber_scale_pair(s, t_proj)
    res.t_projection = t_proj
    res.truncation_loss = truncation_loss(s, t_proj)
    if res.truncation_loss >= TRUNCATION_LIMIT:
        warnings.warn(
            f"fiber rescaling by t = {t_proj:.4g} moved {res.truncation_loss:.2e} of the mass out of the box",
            TruncationWarning,
            stacklevel=2,
        )
    return out, res


def fiber_concavity_curvature(m: FiberMoments, n_s: int = 64, span: float = 4.0) -> NDArray:
    """Scaled second divided differences of ``h`` as a function of ``s = t^(N+alpha+beta)``.

    Sampled on ``n_s`` log-spaced points of ``t`` in ``[t_bar/span, t_bar*span]``
    (the window where ``h`` is non-negligible).  The returned values are
    ``h''(s) * s^2 / max|h|``; concavity means all are ``<= 0`` up to rounding.
    """
    t_bar = fiber_max_from_moments(m).t_bar
    t = np.logspace(np.log10(t_bar / span), np.log10(t_bar * span), n_s)
    s = t ** (m.dim + m.exponent_sum)
    hv = np.array([m.h(ti) for ti in t])
    ds = np.diff(s)
    slopes = np.diff(hv) / ds
    curv = 2.0 * np.diff(slopes) / (ds[1:] + ds[:-1])
    return curv * s[1:-1] ** 2 / np.max(np.abs(hv))
