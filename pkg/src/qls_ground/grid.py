"""Uniform node-centred grids on the box [-L, L)^N and fields sampled on them.

Nodes sit at ``x_j = (j - M/2) * h`` with ``h = 2L/M``.  Two boundary modes
are supported: ``"zero"`` treats every node outside the box as a zero ghost
value, ``"torus"`` wraps indices cyclically.

Quadrature is the rectangle rule ``h^N * sum(values)``.  Every reduction
sorts the values first and then runs ``numpy.sum`` (a fixed pairwise tree)
over the sorted array.  The result therefore depends only on the multiset of
values: it is reproducible bit for bit and exactly invariant under any
rearrangement, such as a cyclic translation on the torus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, GridMismatchError, NumericInputError

BOUNDARY_MODES = ("zero", "torus")
MAX_DIM = 4


@dataclass(frozen=True)
class GridSpec:
    """Truncated computational domain ``[-L, L)^N`` with ``M`` nodes per axis."""

    dim: int
    half_extent: float
    points_per_dim: int
    boundary: str = "zero"

    def __post_init__(self):
        if int(self.dim) != self.dim or not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dim must be an integer in [1, {MAX_DIM}], got {self.dim}")
        if not (np.isfinite(self.half_extent) and self.half_extent > 0):
            raise ValueError(f"half_extent must be positive, got {self.half_extent}")
        if int(self.points_per_dim) != self.points_per_dim or self.points_per_dim < 4:
            raise ValueError(f"points_per_dim must be an integer >= 4, got {self.points_per_dim}")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        if self.points_per_dim ** self.dim > np.iinfo(np.intp).max:
            raise ValueError("grid point count exceeds the addressable range")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "points_per_dim", int(self.points_per_dim))
        object.__setattr__(self, "half_extent", float(self.half_extent))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.points_per_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_dim ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axis_coordinates(self) -> NDArray[np.float64]:
        """Node coordinates along one axis; mirror pairs are exact negatives."""
        m = self.points_per_dim
        return (np.arange(m) - (m - 1) / 2) * self.spacing

    def coordinates(self) -> tuple[NDArray[np.float64], ...]:
        """Broadcastable coordinate arrays, one per axis (``np.ix_`` style)."""
        x = self.axis_coordinates()
        out = []
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.points_per_dim
            out.append(x.reshape(shape))
        return tuple(out)

    def mesh(self) -> tuple[NDArray[np.float64], ...]:
        """Full coordinate arrays of shape ``self.shape``."""
        return tuple(np.broadcast_to(c, self.shape) for c in self.coordinates())

    def radius_squared(self) -> NDArray[np.float64]:
        r2 = np.zeros(self.shape)
        for c in self.coordinates():
            r2 = r2 + c * c
        return r2

    def sample(self, func) -> "Field":
        """Evaluate ``func(*coords)`` at every node and wrap it as a Field."""
        values = np.broadcast_to(func(*self.coordinates()), self.shape)
        return Field(self, np.array(values, dtype=np.float64))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))


@dataclass(frozen=True)
class Field:
    """A real scalar function sampled at the nodes of ``grid``."""

    grid: GridSpec
    values: NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            if values.size == self.grid.size:
                values = values.reshape(self.grid.shape)
            else:
                raise GridMismatchError(
                    f"field has {values.size} values, grid needs {self.grid.size}"
                )
        if not np.all(np.isfinite(values)):
            raise NumericInputError("field contains non-finite values")
        object.__setattr__(self, "values", np.ascontiguousarray(values))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True)
class StatePair:
    """The unknown ``(u, v)`` of the coupled system."""

    u: Field
    v: Field

    def __post_init__(self):
        _check_same_grid(self.u, self.v)

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: GridSpec, u, v) -> "StatePair":
        return cls(Field(grid, u), Field(grid, v))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "StatePair":
        return cls(grid.zeros(), grid.zeros())

    def swapped(self) -> "StatePair":
        return StatePair(self.v, self.u)

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.u - other.u, self.v - other.v)

    def __mul__(self, scalar: float) -> "StatePair":
        return StatePair(self.u * scalar, self.v * scalar)

    __rmul__ = __mul__


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def total_sum(values: NDArray[np.float64]) -> float:
    """Pairwise sum of all entries in sorted order; invariant under permutations."""
    return float(np.sum(np.sort(values, axis=None)))


def integrate(f: Field) -> float:
    """Rectangle-rule integral ``h^N * sum(values)``."""
    if not np.all(np.isfinite(f.values)):
        raise NumericInputError("non-finite value in integrand")
    return f.grid.cell_volume * total_sum(f.values)


def integrate_array(grid: GridSpec, values: NDArray[np.float64]) -> float:
    """:func:`integrate` for a raw array already known to live on ``grid``."""
    if not np.all(np.isfinite(values)):
        raise NumericInputError("non-finite value in integrand")
    return grid.cell_volume * total_sum(values)


def inner(grid: GridSpec, a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """Discrete L2 inner product ``h^N * sum(a * b)``."""
    return grid.cell_volume * total_sum(a * b)


def shift_values(values: NDArray[np.float64], axis: int, offset: int, boundary: str):
    """Return ``w`` with ``w[j] = values[j + offset]`` along ``axis``.

    Out-of-range reads give zero in ``"zero"`` mode and wrap in ``"torus"`` mode.
    """
    if offset == 0:
        return values.copy()
    if boundary == "torus":
        return np.roll(values, -offset, axis=axis)
    m = values.shape[axis]
    out = np.zeros_like(values)
    if abs(offset) >= m:
        return out
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if offset > 0:
        src[axis] = slice(offset, None)
        dst[axis] = slice(0, m - offset)
    else:
        src[axis] = slice(0, m + offset)
        dst[axis] = slice(-offset, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def central_difference(values, axis: int, h: float, boundary: str):
    return (shift_values(values, axis, 1, boundary) - shift_values(values, axis, -1, boundary)) / (2.0 * h)


def forward_difference(values, axis: int, h: float, boundary: str):
    return (shift_values(values, axis, 1, boundary) - values) / h


def backward_difference(values, axis: int, h: float, boundary: str):
    return (values - shift_values(values, axis, -1, boundary)) / h


def gradient_field(f: Field) -> list[Field]:
    """Central-difference gradient, one Field per axis."""
    g = f.grid
    return [Field(g, central_difference(f.values, axis, g.spacing, g.boundary)) for axis in range(g.dim)]


def gradient_square(values: NDArray[np.float64], grid: GridSpec) -> NDArray[np.float64]:
    """Nodewise ``|grad u|^2`` as the mean of squared forward and backward differences.

    Unlike the squared central difference this form has no grid-scale null
    space: ``sum(gradient_square(u))`` is the quadratic form of the standard
    3-point Laplacian per axis.
    """
    h, bc = grid.spacing, grid.boundary
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        fw = forward_difference(values, axis, h, bc)
        bw = backward_difference(values, axis, h, bc)
        out += 0.5 * (fw * fw + bw * bw)
    return out


def translate(f: Field, shift: Sequence[int]) -> Field:
    """Move the field by ``shift`` nodes: ``out[j] = f[j - shift]``.

    Cyclic on the torus; zero-filled in zero mode.
    """
    shift = [int(s) for s in np.atleast_1d(shift)]
    g = f.grid
    if len(shift) != g.dim:
        raise DimensionError(f"shift has {len(shift)} components, grid has {g.dim}")
    values = f.values
    for axis, s in enumerate(shift):
        if s:
            values = shift_values(values, axis, -s, g.boundary)
    return Field(g, values)


def translate_pair(s: StatePair, shift: Sequence[int]) -> StatePair:
    return StatePair(translate(s.u, shift), translate(s.v, shift))
