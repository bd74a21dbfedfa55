"""Analytic periodic potentials and checks of the structural hypotheses on them.

A potential is ``A(x) = base + sum_k a_k cos(2 pi m_k x_{i_k} / tau_{i_k})``.
It is kept in closed form (never sampled once and interpolated) because the
fiber energy evaluates it at scaled points ``t x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError

KINDS = ("constant", "cosine_sum")


@dataclass(frozen=True)
class CosineTerm:
    amplitude: float
    axis: int
    freq: int

    def __post_init__(self):
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"cosine amplitude must be >= 0, got {self.amplitude}")
        if int(self.axis) != self.axis or self.axis < 0:
            raise ValueError(f"cosine axis must be a non-negative integer, got {self.axis}")
        if int(self.freq) != self.freq or self.freq < 1:
            raise ValueError(f"cosine frequency must be an integer >= 1, got {self.freq}")
        object.__setattr__(self, "axis", int(self.axis))
        object.__setattr__(self, "freq", int(self.freq))
        object.__setattr__(self, "amplitude", float(self.amplitude))


@dataclass(frozen=True)
class PotentialSpec:
    """Closed-form description of a periodic potential.

    Attributes:
        kind: ``"constant"`` or ``"cosine_sum"``.
        base: The constant offset ``c0``.
        floor: Declared lower bound (plays the role of ``A0``).
        terms: Cosine terms; must be empty for ``kind="constant"``.
        periods: One period per axis, a single period shared by all axes,
            or ``None``.  Required for any axis
            carrying a cosine term.  A constant potential is invariant under
            every translation, so its periods are optional.
        strict: When true, reject specs whose guaranteed lower bound
            ``base - sum(a_k)`` falls below ``floor``.  Pass ``False`` to build
            a deliberately violating potential for :func:`validate`.
    """

    kind: str
    base: float
    floor: float
    terms: tuple[CosineTerm, ...] = ()
    periods: Optional[tuple[float, ...]] = None
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"potential kind must be one of {KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.base) and self.base > 0):
            raise ValueError(f"potential base must be positive, got {self.base}")
        if not (np.isfinite(self.floor) and self.floor > 0):
            raise ValueError(f"potential floor must be positive, got {self.floor}")
        terms = tuple(t if isinstance(t, CosineTerm) else CosineTerm(*t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if self.kind == "constant" and terms:
            raise ValueError("a constant potential takes no cosine terms")
        if self.periods is not None:
            periods = tuple(float(p) for p in self.periods)
            if any(not (np.isfinite(p) and p > 0) for p in periods):
                raise ValueError(f"periods must be positive, got {periods}")
            object.__setattr__(self, "periods", periods)
        for t in terms:
            if self.period(t.axis) is None:
                raise ValueError(f"cosine term on axis {t.axis} has no declared period")
        if self.strict and self.lower_bound < self.floor:
            raise ValueError(
                f"base - sum(amplitudes) = {self.lower_bound} is below the declared floor {self.floor}"
            )

    @classmethod
    def constant(cls, value: float, floor: Optional[float] = None, periods=None) -> "PotentialSpec":
        return cls("constant", value, value if floor is None else floor, (), periods)

    @property
    def lower_bound(self) -> float:
        return self.base - sum(t.amplitude for t in self.terms)

    @property
    def is_constant(self) -> bool:
        return all(t.amplitude == 0.0 for t in self.terms)

    def period(self, axis: int) -> Optional[float]:
        if self.periods is None:
            return None
        if len(self.periods) == 1:
            return self.periods[0]
        return self.periods[axis] if axis < len(self.periods) else None

    def _check_dim(self, dim: int) -> None:
        for t in self.terms:
            if t.axis >= dim:
                raise DimensionError(f"cosine term on axis {t.axis} but point has {dim} components")
        if self.periods is not None and len(self.periods) not in (1, dim):
            raise DimensionError(f"{len(self.periods)} periods declared for a {dim}-dimensional point")

    def values(self, coords: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
        """Vectorised evaluation; ``coords`` holds one (broadcastable) array per axis."""
        self._check_dim(len(coords))
        out = np.full(np.broadcast(*coords).shape, self.base, dtype=np.float64)
        for t in self.terms:
            k = 2.0 * np.pi * t.freq / self.period(t.axis)
            out = out + t.amplitude * np.cos(k * coords[t.axis])
        return out

    def radial_values(self, coords: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
        """Vectorised ``grad A(x) . x``."""
        self._check_dim(len(coords))
        out = np.zeros(np.broadcast(*coords).shape, dtype=np.float64)
        for t in self.terms:
            k = 2.0 * np.pi * t.freq / self.period(t.axis)
            x = coords[t.axis]
            out = out - t.amplitude * k * np.sin(k * x) * x
        return out


def eval_potential(p: PotentialSpec, x) -> float:
    """Value of the potential at a single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return float(p.values(tuple(x))[()])


def radial_derivative(p: PotentialSpec, x) -> float:
    """``grad A(x) . x`` at a single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return float(p.radial_values(tuple(x))[()])


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`.

    ``margins`` maps each check name to its worst observed margin (negative
    means violated); ``witnesses`` maps each failed check to the sample point
    where that worst margin occurred.
    """

    positivity_ok: bool
    periodicity_ok: bool
    gradient_condition_ok: bool
    concavity_ok: bool
    margins: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.positivity_ok and self.periodicity_ok and self.gradient_condition_ok and self.concavity_ok

    def failed_checks(self) -> list[str]:
        names = ("positivity", "periodicity", "gradient_condition", "concavity")
        return [n for n in names if not getattr(self, f"{n}_ok")]


PERIODICITY_TOL = 1e-10
GRADIENT_TOL = 1e-10
CONCAVITY_TOL = 1e-8


def _sample_points(dim: int, half_extent: float, density: int) -> NDArray[np.float64]:
    axis = np.linspace(-half_extent, half_extent, density)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def scaled_profile_curvature(p: PotentialSpec, points, dim: int, exponent_sum: float, n_s: int = 64):
    """Scaled second divided differences of ``s -> s^a A(s^b x)`` on log-spaced ``s``.

    Here ``a = (N+2)/(N+alpha+beta)`` and ``b = 1/(N+alpha+beta)``.  Divided
    differences are used because plain second differences of a concave
    function need not be non-positive on a non-uniform grid.  Each estimate of
    the second derivative is multiplied by ``s^2 / |f(s)|`` to make it
    dimensionless.  Returns an array of shape ``(n_points, n_s - 2)``.
    """
    total = dim + exponent_sum
    a, b = (dim + 2) / total, 1.0 / total
    s = np.logspace(-1, 1, n_s)
    pts = np.asarray(points, dtype=np.float64)
    scaled = pts[:, None, :] * (s ** b)[None, :, None]
    f = (s ** a)[None, :] * p.values(tuple(scaled[..., i] for i in range(dim)))
    return second_divided_differences(s, f)


def second_divided_differences(s, f):
    """Dimensionless curvature estimate ``f''(s_i) s_i^2 / |f(s_i)|`` along the last axis."""
    ds = np.diff(s)
    slopes = np.diff(f, axis=-1) / ds
    curv = 2.0 * np.diff(slopes, axis=-1) / (ds[1:] + ds[:-1])
    mid = s[1:-1]
    scale = np.maximum(np.abs(f[..., 1:-1]), np.finfo(float).tiny)
    return curv * mid ** 2 / scale


def validate(p: PotentialSpec, problem, sample_density: int = 8) -> ValidationReport:
    """Check positivity, periodicity, the radial-derivative sign condition and
    the scaled concavity condition on a lattice covering the problem's box.

    Failures are reported, not raised.
    """
    if sample_density < 8:
        raise ValueError("sample_density must be >= 8")
    dim = problem.dim
    grid = problem.grid
    pts = _sample_points(dim, grid.half_extent, sample_density)
    coords = tuple(pts[:, i] for i in range(dim))
    report = ValidationReport(True, True, True, True)

    def record(name, margins):
        worst = int(np.argmin(margins))
        report.margins[name] = float(margins[worst])
        if margins[worst] < 0:
            setattr(report, f"{name}_ok", False)
            report.witnesses[name] = tuple(float(c) for c in pts[worst])

    values = p.values(coords)
    record("positivity", values - p.floor)

    period_margin = np.full(len(pts), PERIODICITY_TOL)
    for axis in range(dim):
        tau = p.period(axis)
        if tau is None:
            continue
        moved = list(coords)
        moved[axis] = coords[axis] + tau
        period_margin = np.minimum(period_margin, PERIODICITY_TOL - np.abs(p.values(tuple(moved)) - values))
    record("periodicity", period_margin)

    exp_sum = problem.alpha + problem.beta
    record("gradient_condition", (exp_sum - 2.0) * values - p.radial_values(coords) + GRADIENT_TOL)

    curv = scaled_profile_curvature(p, pts, dim, exp_sum)
    record("concavity", CONCAVITY_TOL - curv.max(axis=1))
    return report
