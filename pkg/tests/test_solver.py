import json

import numpy as np
import pytest
from conftest import gaussian_pair, make_problem, solve_quietly

from qls_ground import (
    PotentialSpec,
    SolveOptions,
    StatePair,
    energy,
    initial_state,
    minimize_on_manifold,
    recenter,
    scaling_constraint,
    translate_pair,
    vanishing_metric,
)
from qls_ground.errors import (
    ConfigError,
    DegenerateWindowError,
    SolveError,
    StalledError,
    UnsupportedModeError,
    VanishingError,
)
from qls_ground.solver import (
    REPORT_FIELDS,
    SCALING_CONSTRAINT,
    lattice_radius,
    lattice_steps,
    local_mass_peak,
    retract,
    write_trace_csv,
)


@pytest.fixture(scope="module")
def line_solve():
    p = make_problem(1, 8.0, 256)
    state, report = solve_quietly(p)
    return p, state, report


def test_initial_state_is_deterministic_and_symmetric():
    p = make_problem(2, 4.0, 16)
    a, b = initial_state(p, 3), initial_state(p, 3)
    np.testing.assert_array_equal(a.u.values, b.u.values)
    np.testing.assert_array_equal(a.u.values, a.v.values)
    c = initial_state(p, 4)
    assert np.max(np.abs(c.u.values - a.u.values)) > 0
    assert energy(a, p).coupling == pytest.approx(1.0, rel=0.05)


def test_one_dimensional_solve_converges(line_solve):
    p, state, rep = line_solve
    assert rep.converged and rep.grad_norm <= 1e-5
    assert rep.m_estimate > 0
    u, v = state.u.values, state.v.values
    assert np.max(np.abs(u - v)) <= 1e-6 * np.max(np.abs(u))


def test_one_dimensional_solve_sits_on_G_zero(line_solve):
    _, _, rep = line_solve
    assert abs(rep.G_residual) <= 1e-6


def test_three_dimensional_solve_is_monotone(ground_state_3d):
    _, _, rep = ground_state_3d
    assert rep.converged and rep.m_estimate > 0
    assert all(b <= a for a, b in zip(rep.energy_trace, rep.energy_trace[1:]))
    assert all(b <= a for a, b in zip(rep.warm_trace, rep.warm_trace[1:]))
    assert rep.phase_switch is not None and rep.iterations > rep.phase_switch


def test_three_dimensional_solve_lies_on_the_scaling_constraint(ground_state_3d):
    p, state, _ = ground_state_3d
    e = energy(state, p)
    assert abs(scaling_constraint(state, p)) <= 1e-8 * (1 + e.kinetic)


def test_disjoint_start_never_converges():
    p = make_problem(1, 8.0, 64)
    x = p.grid.axis_coordinates()
    u = np.exp(-((x + 4) ** 2))
    v = np.exp(-((x - 4) ** 2))
    u[x > 0] = 0.0
    v[x < 0] = 0.0
    with pytest.raises((VanishingError, StalledError)) as info:
        minimize_on_manifold(p, StatePair.from_arrays(p.grid, u, v))
    assert isinstance(info.value, SolveError)
    assert info.value.report.converged is False


def test_solver_refuses_torus():
    p = make_problem(1, 4.0, 32, boundary="torus")
    with pytest.raises(UnsupportedModeError):
        minimize_on_manifold(p, initial_state(p, 0))


def test_zero_budget_returns_projected_start():
    p = make_problem(1, 8.0, 64)
    state, rep = minimize_on_manifold(p, initial_state(p, 0), SolveOptions(max_iters=0))
    assert rep.iterations == 0 and not rep.converged
    assert rep.m_estimate == pytest.approx(energy(state, p).total)


@pytest.mark.parametrize(
    "kwargs",
    [dict(grad_tol=0), dict(backtrack_ratio=1.0), dict(armijo_c=0.0), dict(step_init=-1.0), dict(max_iters=-1)],
)
def test_options_are_validated(kwargs):
    with pytest.raises(ValueError):
        SolveOptions(**kwargs)


def test_report_json_has_the_documented_fields(line_solve, tmp_path):
    _, _, rep = line_solve
    d = json.loads(rep.to_json())
    assert tuple(d) == REPORT_FIELDS
    assert d["iterations"] == rep.iterations and d["converged"] is True
    path = tmp_path / "trace.csv"
    write_trace_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,energy,grad_norm,G_residual"
    assert len(lines) == len(rep.energy_trace) + 1


def test_retraction_lands_on_the_scaling_constraint():
    p = make_problem(2, 6.0, 24)
    s = gaussian_pair(p.grid, width=2.0, amp=3.0)
    out = retract(s, p, SCALING_CONSTRAINT)
    ratio = out.u.values.flat[0] / s.u.values.flat[0]
    np.testing.assert_allclose(out.u.values, ratio * s.u.values, rtol=1e-13)
    assert abs(scaling_constraint(out, p)) <= 1e-10 * energy(out, p).kinetic


def test_retraction_fails_when_the_quasilinear_term_dominates():
    # alpha + beta = 4: quartic and coupling terms share a degree, and on a
    # narrow bump the quartic one wins, so no amplitude reaches the constraint
    p = make_problem(2, 4.0, 16)
    assert retract(gaussian_pair(p.grid, amp=3.0), p, SCALING_CONSTRAINT) is None


# ----------------------------------------------------------- recentering ----

COS = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.1, 0, 1), (0.1, 1, 1)], (2.0,))


def test_lattice_steps_and_radius():
    p = make_problem(2, 8.0, 32, A=COS)
    assert lattice_steps(p) == (4, 4)
    assert lattice_radius(p) == 2.0
    assert lattice_steps(make_problem(2, 8.0, 32)) == (1, 1)
    assert lattice_radius(make_problem(2, 8.0, 32)) == 2.0


def test_incommensurate_period_is_a_config_error():
    bad = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.1, 0, 1)], (1.3,))
    with pytest.raises(ConfigError):
        lattice_steps(make_problem(1, 8.0, 32, A=bad))


def test_centred_state_is_left_alone():
    p = make_problem(2, 8.0, 32, A=COS)
    s = gaussian_pair(p.grid)
    out, shift = recenter(s, p)
    assert shift == (0, 0) and out is s


def test_recenter_inverts_a_period_shift():
    p = make_problem(2, 8.0, 32, A=COS)
    s = gaussian_pair(p.grid)
    moved = translate_pair(s, (4, -8))
    back, shift = recenter(moved, p)
    assert shift == (-4, 8)
    # the forward shift pushed 4 columns past one wall and 8 rows past the other
    keep = (slice(0, 28), slice(8, 32))
    np.testing.assert_allclose(back.u.values[keep], s.u.values[keep], rtol=1e-15, atol=0)


def test_recentering_keeps_the_energy_up_to_boundary_loss():
    p = make_problem(1, 8.0, 64)
    s = gaussian_pair(p.grid, width=1.0)
    moved = translate_pair(s, (10,))
    back, shift = recenter(moved, p)
    assert shift == (-10,)
    assert energy(back, p).total == pytest.approx(energy(s, p).total, rel=1e-12)


# ----------------------------------------------------------- vanishing ----


def test_vanishing_metric_of_zero_state():
    p = make_problem(2, 4.0, 16)
    assert vanishing_metric(StatePair.zeros(p.grid), 1.0, 2.0) == 0.0


def test_vanishing_peak_sits_on_the_bump():
    p = make_problem(2, 8.0, 64)
    centre = np.array([1.5, -2.0])
    s = gaussian_pair(p.grid, centre=centre)
    _, node = local_mass_peak(s, 1.0, 2.0)
    x = p.grid.axis_coordinates()
    found = np.array([x[i] for i in node])
    assert np.all(np.abs(found - centre) <= p.grid.spacing)


def test_splitting_a_bump_lowers_the_metric():
    p = make_problem(1, 16.0, 256)
    one = gaussian_pair(p.grid)
    two = gaussian_pair(p.grid, centre=[-6.0], amp=0.5) + gaussian_pair(p.grid, centre=[6.0], amp=0.5)
    assert vanishing_metric(two, 1.0, 2.0) < vanishing_metric(one, 1.0, 2.0)


def test_window_below_spacing_is_degenerate():
    p = make_problem(1, 4.0, 16)
    with pytest.raises(DegenerateWindowError):
        vanishing_metric(StatePair.zeros(p.grid), 0.1, 2.0)


def test_cosine_potential_solve_converges():
    A = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.2, 0, 1)], (2.0,))
    p = make_problem(1, 8.0, 128, A=A, B=A)
    _, rep = solve_quietly(p, seed=1)
    assert rep.converged and rep.m_estimate > 0
