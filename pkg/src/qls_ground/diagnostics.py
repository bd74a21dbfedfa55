"""Concentration-compactness checks on finite sequences, and a min-max cross-check of m.

Weak convergence cannot be represented on a finite grid, so a sequence is
modelled by a finite list of states together with its intended limit.  The
usual stand-in is a translated-bump family ``u_n = u + translate(w, n k)``:
as the shift grows the bump separates from ``u`` and the cross terms die.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatchError
from .fiber import find_fiber_max
from .functionals import ProblemSpec, coupling_density
from .grid import StatePair, gradient_square, integrate_array, translate_pair


@dataclass(frozen=True)
class SequenceSample:
    """Finite stand-in for a weakly convergent sequence ``items -> limit``."""

    items: tuple[StatePair, ...]
    limit: StatePair

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("a sequence sample needs at least one item")
        for s in items:
            if s.grid != self.limit.grid:
                raise GridMismatchError("every item must live on the grid of the limit")
        object.__setattr__(self, "items", items)


def _coupling(u, v, grid, alpha, beta) -> float:
    return integrate_array(grid, coupling_density(u, v, alpha, beta))


def brezis_lieb_residual(seq: SequenceSample, p: ProblemSpec) -> list[float]:
    """Per item, ``|C(u_n, v_n) - C(u, v) - C(u_n - u, v_n - v)|`` with ``C = int |u|^alpha |v|^beta``."""
    g = p.grid
    if seq.limit.grid != g:
        raise GridMismatchError("sequence and problem use different grids")
    u, v = seq.limit.u.values, seq.limit.v.values
    base = _coupling(u, v, g, p.alpha, p.beta)
    out = []
    for s in seq.items:
        un, vn = s.u.values, s.v.values
        full = _coupling(un, vn, g, p.alpha, p.beta)
        rest = _coupling(un - u, vn - v, g, p.alpha, p.beta)
        out.append(abs(full - base - rest))
    return out


def _quasi(w, grid) -> float:
    return integrate_array(grid, w * w * gradient_square(w, grid))


def quasilinear_lsc_gap(seq: SequenceSample) -> list[float]:
    """Per item, ``Q(u_n) - Q(u_n - u) - Q(u)`` with ``Q(w) = int w^2 |grad w|^2``, summed over both components.

    The lower semicontinuity statement asks this gap to be non-negative in
    the limit; for a finite family it should stay above minus the
    discretisation error.
    """
    g = seq.limit.grid
    limit = (seq.limit.u.values, seq.limit.v.values)
    q_limit = sum(_quasi(w, g) for w in limit)
    out = []
    for s in seq.items:
        gap = -q_limit
        for wn, w in zip((s.u.values, s.v.values), limit):
            gap += _quasi(wn, g) - _quasi(wn - w, g)
        out.append(gap)
    return out


def min_max_cross_check(p: ProblemSpec, trials: Sequence[StatePair]) -> float:
    """``min`` over the trials of ``max_t I(t u(x/t), t v(x/t))``.

    Every value is an upper bound for the ground-state level, so adding
    trials can only lower the result.
    """
    if len(trials) == 0:
        raise ValueError("at least one trial state is required")
    return float(min(find_fiber_max(s, p).h_at_max for s in trials))


def translated_bump_family(base: StatePair, bump: StatePair, shifts: Sequence[Sequence[int]]) -> SequenceSample:
    """``SequenceSample`` with items ``base + translate(bump, k)`` and limit ``base``."""
    items = tuple(base + translate_pair(bump, k) for k in shifts)
    return SequenceSample(items, base)


def write_residual_csv(values: Sequence[float], path) -> None:
    """Write ``item_index,residual`` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("item_index,residual\n")
        for i, r in enumerate(values):
            fh.write(f"{i},{float(r)!r}\n")


def is_strictly_decreasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))
