"""Constrained descent for the ground-state level of the discrete energy.

A solve runs in two stages that share one iteration counter.

*Warm start.*  The initial guess is moved onto ``{G = 0}`` by its fiber
maximiser and then descended on that set.  ``G`` is a fixed combination of
homogeneous moments, so on ``{G = 0}`` the energy is bounded below by a
positive multiple of the norm and iterates cannot run off to degenerate
states near the box wall.  The stage ends once the tangential part of the
gradient is a small fraction of the full gradient.

*Main stage.*  On the grid, ``G`` is not a natural constraint: at a discrete
critical point it is only ``O(h^2)`` small, so the gradient never vanishes on
``{G = 0}``.  The main stage therefore works on
``{scaling_constraint = 0}``, the derivative of the discrete energy along
the dilation generator ``w - x . grad w``.  Its constrained minimisers
are genuine critical points (the Lagrange multiplier is zero), which is
what lets the gradient norm reach ``grad_tol``.  Only this stage fills
``energy_trace``; the warm-start energies are kept in ``warm_trace``.

Each iteration of either stage:

1. split the gradient into normal and tangential parts in the
   ``(1 - Delta_h)`` metric and form a limited-memory BFGS direction from
   the tangential part;
2. trial point ``s - gamma * d``, made non-negative when positivity
   projection is on, then retracted onto the constraint by an exact
   amplitude rescaling ``s -> lambda s`` (a scalar root problem);
3. Armijo backtracking on the retracted energy, so each trace is
   non-increasing;
4. every ``recenter_every`` iterations, translate by the period lattice to
   keep the mass near the origin (accepted only if the energy does not rise).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import fft, optimize

from .errors import (
    ConfigError,
    DegenerateWindowError,
    NoMaximizerError,
    BracketError,
    StalledError,
    UnsupportedModeError,
    VanishingError,
)
from .fiber import project_to_manifold
from .functionals import (
    ProblemSpec,
    breakdown,
    dilation_generator,
    dilation_generator_adjoint,
    G_from_parts,
    P_from_parts,
    constraint_G_parts,
    gradient_arrays,
    gradient_parts,
    inner,
    radial_integrals,
)
from .grid import GridSpec, StatePair, integrate_array, shift_values, translate_pair

MAX_BACKTRACKS = 60


@dataclass
class SolveOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-5
    step_init: float = 1e-2
    armijo_c: float = 1e-4
    backtrack_ratio: float = 0.5
    recenter_every: int = 50
    positivity_projection: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.backtrack_ratio < 1:
            raise ValueError("backtrack_ratio must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if self.max_iters < 0 or self.recenter_every < 0:
            raise ValueError("max_iters and recenter_every must be non-negative")


REPORT_FIELDS = (
    "m_estimate",
    "iterations",
    "grad_norm",
    "G_residual",
    "P_residual",
    "coercivity_ratio",
    "vanishing_metric",
    "recenter_shifts",
    "converged",
    "energy_trace",
)


@dataclass
class SolveReport:
    """Summary of a solve.

    ``trace_rows`` holds ``(iteration, energy, grad_norm, G_residual)`` per
    accepted iterate for the CSV trace; it is not part of the JSON report.
    """

    m_estimate: float = float("nan")
    iterations: int = 0
    grad_norm: float = float("inf")
    G_residual: float = float("nan")
    P_residual: float = float("nan")
    coercivity_ratio: float = float("inf")
    vanishing_metric: float = float("nan")
    recenter_shifts: list = field(default_factory=list)
    converged: bool = False
    energy_trace: list = field(default_factory=list)
    trace_rows: list = field(default_factory=list, repr=False)
    min_energy: float = field(default=float("inf"), repr=False)
    phase_switch: Optional[int] = field(default=None, repr=False)
    warm_trace: list = field(default_factory=list, repr=False)
    warm_rows: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in REPORT_FIELDS}
        d["recenter_shifts"] = [list(map(int, s)) for s in self.recenter_shifts]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def initial_state(p: ProblemSpec, seed: int) -> StatePair:
    """Gaussian pair ``u = v`` of width ``L/4`` normalised to ``int u^4 = 1``.

    The Gaussian is multiplied by ``1 + 0.01 * xi`` with ``xi`` uniform in
    ``[-1, 1]`` from ``numpy.random.default_rng(seed)``; the same noise is used
    for both components, so the initial pair is exactly symmetric.
    """
    g = p.grid
    sigma = g.half_extent / 4.0
    bump = np.exp(-g.radius_squared() / sigma ** 2)
    amp = integrate_array(g, bump ** 4) ** -0.25
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=g.shape)
    u = amp * bump * (1.0 + 1e-2 * noise)
    return StatePair.from_arrays(g, u, u.copy())


# ---------------------------------------------------------------- lattice ----


def lattice_steps(p: ProblemSpec) -> tuple[int, ...]:
    """Per-axis node step of the common period lattice of both potentials.

    Axes on which neither potential declares a period use a one-node step.
    """
    h = p.grid.spacing
    steps = []
    for axis in range(p.dim):
        step = 1
        for pot in (p.potential_A, p.potential_B):
            tau = pot.period(axis)
            if tau is None:
                continue
            ratio = tau / h
            k = int(round(ratio))
            if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
                raise ConfigError(f"period {tau} on axis {axis} is not a multiple of the grid spacing {h}")
            step = step * k // np.gcd(step, k)
        steps.append(step)
    return tuple(steps)


def lattice_radius(p: ProblemSpec) -> float:
    """Ball radius for recentering and the vanishing monitor: the smallest period.

    With no declared period (constant potentials) the initialiser width
    ``L/4`` is used instead.
    """
    periods = [
        pot.period(axis)
        for pot in (p.potential_A, p.potential_B)
        for axis in range(p.dim)
        if pot.period(axis) is not None
    ]
    return min(periods) if periods else p.grid.half_extent / 4.0


def _ball_offsets(grid: GridSpec, r: float, frac: NDArray) -> NDArray:
    """Integer node offsets ``d`` with ``|(d - frac) h| <= r``."""
    k = int(np.floor(r / grid.spacing)) + 1
    rng = np.arange(-k, k + 2)
    mesh = np.meshgrid(*([rng] * grid.dim), indexing="ij")
    d = np.stack([m.ravel() for m in mesh], axis=1)
    dist2 = np.sum(((d - frac) * grid.spacing) ** 2, axis=1)
    return d[dist2 <= r * r * (1 + 1e-12)]


def _box_centre(grid: GridSpec) -> tuple[int, NDArray]:
    """Base node index and fractional offset of the box centre (the origin)."""
    o = (grid.points_per_dim - 1) / 2.0
    base = int(np.floor(o))
    return base, np.full(grid.dim, o - base)


def ball_masses(s: StatePair, r: float) -> NDArray:
    """``int_{B_r(y)} (u^2 + v^2)`` for every ``y = x_i + (x_c - x_base)``.

    Entry ``i`` is the ball mass around the point offset from node ``i`` by
    the same fraction of a cell as the origin is from its base node, so the
    entry at the base node is the ball mass around the origin.
    """
    g = s.grid
    dens = s.u.values ** 2 + s.v.values ** 2
    _, frac = _box_centre(g)
    out = np.zeros(g.shape)
    for d in _ball_offsets(g, r, frac):
        w = dens
        for axis, off in enumerate(d):
            w = shift_values(w, axis, int(off), g.boundary)
        out += w
    return g.cell_volume * out


def recenter(s: StatePair, p: ProblemSpec, radius: Optional[float] = None):
    """Translate both fields by the period-lattice shift that puts the most
    ``L2`` mass in the ball ``B_r(0)``.

    Returns ``(state, shift)`` with ``shift`` in nodes.  Ties go to the
    shortest shift, so an already centred state is left alone.
    """
    steps = lattice_steps(p)
    r = lattice_radius(p) if radius is None else radius
    g = s.grid
    m = g.points_per_dim
    masses = ball_masses(s, r)
    base, _ = _box_centre(g)
    ranges = [np.arange(-(base // st), (m - 1 - base) // st + 1) for st in steps]
    mesh = np.meshgrid(*ranges, indexing="ij")
    ks = np.stack([x.ravel() for x in mesh], axis=1)
    idx = tuple((base + ks[:, a] * steps[a]) for a in range(g.dim))
    cand = masses[idx]
    best = cand.max()
    ties = np.flatnonzero(cand >= best * (1 - 1e-12))
    norms = np.sum((ks[ties] * np.array(steps)) ** 2, axis=1)
    pick = ties[int(np.argmin(norms))]
    shift = tuple(int(-ks[pick, a] * steps[a]) for a in range(g.dim))
    if not any(shift):
        return s, shift
    return translate_pair(s, shift), shift


def _window_sum(values: NDArray, k: int, boundary: str) -> NDArray:
    out = values
    for axis in range(values.ndim):
        acc = np.zeros_like(out)
        for off in range(-k, k + 1):
            acc = acc + shift_values(out, axis, off, boundary)
        out = acc
    return out


def local_mass_peak(s: StatePair, r: float, q: float):
    """Largest local ``int |u|^q + |v|^q`` over box windows of half-width ``r``.

    The ball ``B_r(y)`` is approximated by the separable box
    ``[y - r, y + r]^N`` of nodes, so the sum over the window factorises into
    one running sum per axis.  Returns ``(value, node_index)``.
    """
    g = s.grid
    if r < g.spacing:
        raise DegenerateWindowError(f"window radius {r} is below the grid spacing {g.spacing}")
    k = int(np.floor(r / g.spacing + 1e-12))
    dens = np.abs(s.u.values) ** q + np.abs(s.v.values) ** q
    sums = g.cell_volume * _window_sum(dens, k, g.boundary)
    flat = int(np.argmax(sums))
    return float(sums.flat[flat]), np.unravel_index(flat, g.shape)


def vanishing_metric(s: StatePair, r: float, q: float) -> float:
    """Discrete ``sup_y int_{B_r(y)} (|u|^q + |v|^q)``; see :func:`local_mass_peak`."""
    return local_mass_peak(s, r, q)[0]


# ----------------------------------------------------------- constraints ----


class _Constraint:
    """A functional ``c(s)`` whose value along rays is ``l^2 c2 + l^4 c4 + l^q cq``."""

    def coefficients(self, u, v, p: ProblemSpec) -> tuple[float, float, float]:
        raise NotImplementedError

    def normal(self, u, v, gu, gv, p: ProblemSpec):
        raise NotImplementedError

    def value(self, u, v, p: ProblemSpec) -> float:
        return float(sum(self.coefficients(u, v, p)))


class _PohozaevCombination(_Constraint):
    """The moment functional ``G``; its gradient is available in closed form."""

    def coefficients(self, u, v, p):
        g = p.grid
        parts = constraint_G_parts(u, v, p)
        degrees = (2.0, 4.0, p.exponent_sum)
        return tuple((inner(g, a, u) + inner(g, b, v)) / d for (a, b), d in zip(parts, degrees))

    def normal(self, u, v, gu, gv, p):
        (a_u, a_v), (b_u, b_v), (c_u, c_v) = constraint_G_parts(u, v, p)
        return a_u + b_u + c_u, a_v + b_v + c_v


class _ScalingDerivative(_Constraint):
    """``<I'(s), w - x . grad w>``, which vanishes at every discrete critical point."""

    def coefficients(self, u, v, p):
        g = p.grid
        xu, xv = dilation_generator(u, v, g)
        return tuple(inner(g, a, xu) + inner(g, b, xv) for a, b in gradient_parts(u, v, p))

    def normal(self, u, v, gu, gv, p):
        return constraint_normal(u, v, gu, gv, p)


MOMENT_CONSTRAINT = _PohozaevCombination()
SCALING_CONSTRAINT = _ScalingDerivative()


def _ray_root(c2: float, c4: float, cq: float, q: float) -> Optional[float]:
    """Positive ``lambda`` nearest 1 solving ``c2 + c4 lambda^2 + cq lambda^(q-2) = 0``."""

    def f(lam):
        return c2 + c4 * lam * lam + cq * lam ** (q - 2.0)

    f1 = f(1.0)
    if f1 == 0.0:
        return 1.0
    factor = 1.25
    lo = hi = 1.0
    for _ in range(40):
        lo, hi = lo / factor, hi * factor
        if np.sign(f(hi)) != np.sign(f1):
            return optimize.brentq(f, hi / factor, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if np.sign(f(lo)) != np.sign(f1):
            return optimize.brentq(f, lo, lo * factor, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return None


def retract(s: StatePair, p: ProblemSpec, constraint: _Constraint = SCALING_CONSTRAINT) -> Optional[StatePair]:
    """Map ``s`` onto ``{constraint = 0}`` by amplitude rescaling; ``None`` if impossible."""
    u, v = s.u.values, s.v.values
    if not (np.any(u) and np.any(v)):
        return None
    lam = _ray_root(*constraint.coefficients(u, v, p), p.exponent_sum)
    if lam is None or not np.isfinite(lam):
        return None
    return StatePair.from_arrays(p.grid, lam * u, lam * v)


def _project_start(p: ProblemSpec, init: StatePair) -> StatePair:
    try:
        s, _ = project_to_manifold(init, p)
    except (NoMaximizerError, BracketError) as exc:
        raise VanishingError(f"initial state cannot be projected: {exc}", SolveReport()) from exc
    out = retract(s, p, MOMENT_CONSTRAINT)
    if out is None:
        raise VanishingError("initial state cannot be placed on the constraint", SolveReport())
    return out


def constraint_normal(u: NDArray, v: NDArray, gu: NDArray, gv: NDArray, p: ProblemSpec):
    """Gradient of :func:`scaling_constraint`: ``H xi + (d xi)^T g``.

    The Hessian-vector product ``H xi`` is a central difference of the exact
    gradient.  Its accuracy only affects the search direction: stationary
    points of the iteration are critical points regardless.
    """
    g = p.grid
    xu, xv = dilation_generator(u, v, g)
    nx = np.sqrt(inner(g, xu, xu) + inner(g, xv, xv))
    ns = np.sqrt(inner(g, u, u) + inner(g, v, v))
    eps = 1e-6 * ns / nx if nx > 0 else 1e-6
    pu, pv = gradient_arrays(u + eps * xu, v + eps * xv, p)
    mu, mv = gradient_arrays(u - eps * xu, v - eps * xv, p)
    au, av = dilation_generator_adjoint(gu, gv, g)
    return (pu - mu) / (2 * eps) + au, (pv - mv) / (2 * eps) + av


# ------------------------------------------------------------------ solve ----


class _Monitor:
    def __init__(self, p: ProblemSpec, report: SolveReport):
        self.p = p
        self.report = report

    def record(self, it: int, s: StatePair, grad_norm: float) -> float:
        p, rep = self.p, self.report
        u, v = s.u.values, s.v.values
        e = breakdown(u, v, p)
        G = G_from_parts(e, radial_integrals(u, v, p), p)
        rep.energy_trace.append(e.total)
        rep.trace_rows.append((it, e.total, grad_norm, G))
        mass = integrate_array(p.grid, u * u) + integrate_array(p.grid, v * v)
        norm = e.kinetic + mass + e.quasi
        rep.coercivity_ratio = min(rep.coercivity_ratio, e.total / norm if norm > 0 else 0.0)
        rep.min_energy = min(rep.min_energy, e.total)
        return e.total


def _finish(report: SolveReport, s: StatePair, p: ProblemSpec, grad_norm: float, it: int) -> None:
    u, v = s.u.values, s.v.values
    e = breakdown(u, v, p)
    rad = radial_integrals(u, v, p)
    report.iterations = it
    report.grad_norm = grad_norm
    report.m_estimate = report.energy_trace[-1] if report.energy_trace else e.total
    report.G_residual = G_from_parts(e, rad, p)
    report.P_residual = P_from_parts(e, rad, p)
    report.vanishing_metric = vanishing_metric(s, max(lattice_radius(p), p.grid.spacing), 2.0)


def _sobolev_symbol(grid: GridSpec) -> NDArray:
    """Eigenvalues of ``1 - Delta_h`` (3-point, zero ghosts) in the DST-I basis."""
    m, h = grid.points_per_dim, grid.spacing
    lam1 = (4.0 / h ** 2) * np.sin(np.pi * np.arange(1, m + 1) / (2.0 * (m + 1))) ** 2
    total = np.ones(grid.shape)
    for axis in range(grid.dim):
        shape = [1] * grid.dim
        shape[axis] = m
        total = total + lam1.reshape(shape)
    return total


def _descend(s, p, constraint, opts, monitor, it, budget, warm_ratio=None):
    """Projected descent on ``{constraint = 0}``.

    Stops when the full gradient norm reaches ``opts.grad_tol`` or, when
    ``warm_ratio`` is given, once the tangential part has dropped below
    ``warm_ratio`` times the full gradient.  Returns
    ``(state, iteration, grad_norm, converged)``.
    """
    g = p.grid
    report = monitor.report
    symbol = _sobolev_symbol(g)
    axes = tuple(range(1, g.dim + 1))

    def ip(a, b):
        return inner(g, a, b)

    def precond(x):
        return fft.idstn(fft.dstn(x, type=1, axes=axes) / symbol, type=1, axes=axes)

    memory: list[tuple[NDArray, NDArray, float]] = []
    prev = None
    while True:
        x = np.stack([s.u.values, s.v.values])
        grad = np.stack(gradient_arrays(x[0], x[1], p))
        grad_norm = float(np.sqrt(ip(grad, grad)))
        energy_now = monitor.record(it, s, grad_norm)
        if not energy_now > 0:
            _finish(report, s, p, grad_norm, it)
            raise VanishingError(f"energy {energy_now} on the constraint is not positive", report)
        if grad_norm <= opts.grad_tol:
            return s, it, grad_norm, True
        if it >= budget:
            return s, it, grad_norm, False

        # tangential part of the gradient, orthogonal in the (1 - Delta_h) metric
        normal = np.stack(constraint.normal(x[0], x[1], grad[0], grad[1], p))
        p_normal = precond(normal)
        nn = ip(normal, p_normal)
        coef = ip(grad, p_normal) / nn if nn > 0 else 0.0
        resid = grad - coef * normal
        if warm_ratio is not None and np.sqrt(ip(resid, resid)) <= warm_ratio * grad_norm:
            return s, it, grad_norm, False

        if prev is not None:
            step_s, step_y = x - prev[0], resid - prev[1]
            sy = ip(step_s, step_y)
            if sy > 1e-12 * np.sqrt(ip(step_s, step_s) * ip(step_y, step_y)):
                memory.append((step_s, step_y, 1.0 / sy))
                del memory[:-MEMORY]
        direction = _two_loop(resid, memory, precond, ip)
        if nn > 0:
            direction = direction - (ip(normal, direction) / nn) * p_normal
        slope = ip(grad, direction)
        if not slope > 0:
            memory.clear()
            direction = precond(resid)
            slope = ip(grad, direction)
        gamma = 1.0 if memory else opts.step_init

        accepted = None
        for _ in range(MAX_BACKTRACKS):
            trial_x = x - gamma * direction
            if opts.positivity_projection:
                trial_x = np.abs(trial_x)
            trial = retract(StatePair.from_arrays(g, trial_x[0], trial_x[1]), p, constraint) if np.all(np.isfinite(trial_x)) else None
            if trial is not None:
                e_trial = breakdown(trial.u.values, trial.v.values, p).total
                if e_trial <= energy_now - opts.armijo_c * gamma * slope and e_trial > 0:
                    accepted = trial
                    break
            gamma *= opts.backtrack_ratio
        if accepted is None:
            _finish(report, s, p, grad_norm, it)
            if breakdown(x[0], x[1], p).coupling <= np.finfo(float).tiny:
                raise VanishingError("coupling collapsed to zero", report)
            raise StalledError(f"line search failed after {MAX_BACKTRACKS} backtracks at iteration {it}", report)

        prev = (x, resid)
        s = accepted
        it += 1

        if opts.recenter_every and it % opts.recenter_every == 0:
            moved, shift = recenter(s, p)
            if any(shift):
                cand = retract(moved, p, constraint)
                if cand is not None:
                    e_old = breakdown(s.u.values, s.v.values, p).total
                    if breakdown(cand.u.values, cand.v.values, p).total <= e_old:
                        s = cand
                        report.recenter_shifts.append(shift)
                        prev = None
                        memory.clear()


MEMORY = 10


def _two_loop(resid, memory, precond, ip):
    """Limited-memory BFGS inverse-Hessian product with ``(1 - Delta_h)^{-1}`` as the base metric."""
    q = resid.copy()
    alphas = []
    for step_s, step_y, rho in reversed(memory):
        a = rho * ip(step_s, q)
        alphas.append(a)
        q -= a * step_y
    if memory:
        step_s, step_y, rho = memory[-1]
        py = precond(step_y)
        z = precond(q) * (1.0 / (rho * ip(step_y, py)))
    else:
        z = precond(q)
    for (step_s, step_y, rho), a in zip(memory, reversed(alphas)):
        b = rho * ip(step_y, z)
        z += (a - b) * step_s
    return z


WARM_RATIO = 0.1


def minimize_on_manifold(p: ProblemSpec, init: StatePair, opts: Optional[SolveOptions] = None):
    """Minimise the energy on the constraint manifold starting from ``init``.

    Returns ``(state, report)``.  Raises :class:`StalledError` when the line
    search fails and :class:`VanishingError` when the coupling collapses;
    both carry the report accumulated so far.
    """
    opts = opts or SolveOptions()
    if p.grid.boundary != "zero":
        raise UnsupportedModeError("the solver needs zero boundary mode")
    if init.grid != p.grid:
        raise ValueError("initial state lives on a different grid")
    if opts.recenter_every:
        lattice_steps(p)

    s = _project_start(p, init)
    report = SolveReport()
    monitor = _Monitor(p, report)
    s, it, grad_norm, done = _descend(s, p, MOMENT_CONSTRAINT, opts, monitor, 0, opts.max_iters, WARM_RATIO)
    if not done and it < opts.max_iters:
        report.phase_switch = it
        report.warm_trace, report.energy_trace = report.energy_trace, []
        report.warm_rows, report.trace_rows = report.trace_rows, []
        switched = retract(s, p, SCALING_CONSTRAINT)
        if switched is None:
            _finish(report, s, p, grad_norm, it)
            raise StalledError("could not move onto the scaling constraint", report)
        s, it, grad_norm, done = _descend(switched, p, SCALING_CONSTRAINT, opts, monitor, it, opts.max_iters)
    report.converged = done
    _finish(report, s, p, grad_norm, it)
    return s, report


def write_trace_csv(report: SolveReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,energy,grad_norm,G_residual\n")
        for it, e, gn, G in report.trace_rows:
            fh.write(f"{it},{e!r},{gn!r},{G!r}\n")
