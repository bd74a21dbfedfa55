import numpy as np
import pytest
from conftest import make_problem

from qls_ground import CosineTerm, PotentialSpec, eval_potential, radial_derivative, validate
from qls_ground.errors import DimensionError
from qls_ground.potentials import second_divided_differences

UNIT_COSINE = PotentialSpec("cosine_sum", 2.0, 1.0, [(1.0, 0, 1)], (1.0,))


def test_constant_potential_value():
    assert eval_potential(PotentialSpec.constant(1.0), [0.3, -2.0, 7.0]) == 1.0


def test_cosine_peak_and_quarter_period():
    assert eval_potential(UNIT_COSINE, [0.0, 0.0, 0.0]) == 3.0
    assert eval_potential(UNIT_COSINE, [0.25, 0.0, 0.0]) == pytest.approx(2.0, abs=1e-15)


def test_radial_derivative_examples():
    assert radial_derivative(PotentialSpec.constant(1.0), [1.0, 2.0]) == 0.0
    assert radial_derivative(UNIT_COSINE, [0.5, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    assert radial_derivative(UNIT_COSINE, [0.25, 0.0, 0.0]) == pytest.approx(-2 * np.pi * 0.25, rel=1e-12)


def test_radial_derivative_matches_finite_difference_of_dilation():
    rng = np.random.default_rng(5)
    pot = PotentialSpec("cosine_sum", 3.0, 1.0, [(0.4, 0, 1), (0.3, 1, 2), (0.2, 2, 3)], (1.5, 2.0, 2.5))
    eps = 1e-5
    for x in rng.uniform(-4, 4, size=(100, 3)):
        fd = (eval_potential(pot, (1 + eps) * x) - eval_potential(pot, (1 - eps) * x)) / (2 * eps)
        exact = radial_derivative(pot, x)
        assert abs(fd - exact) <= 1e-6 * max(abs(exact), 1e-3)


def test_dimension_mismatch_is_rejected():
    with pytest.raises(DimensionError):
        eval_potential(PotentialSpec("cosine_sum", 2.0, 1.0, [(0.5, 2, 1)], (1.0,)), [0.0, 0.0])


def test_construction_checks_the_floor():
    with pytest.raises(ValueError, match="below the declared floor"):
        PotentialSpec("cosine_sum", 1.0, 0.8, [(0.5, 0, 1)], (1.0,))
    loose = PotentialSpec("cosine_sum", 1.0, 0.8, [(0.5, 0, 1)], (1.0,), strict=False)
    assert loose.lower_bound == 0.5


@pytest.mark.parametrize(
    "args",
    [
        ("gaussian", 1.0, 1.0),
        ("constant", -1.0, 1.0),
        ("constant", 1.0, 0.0),
    ],
)
def test_construction_rejects_bad_kind_or_values(args):
    with pytest.raises(ValueError):
        PotentialSpec(*args)


def test_cosine_term_needs_declared_period_and_valid_term():
    with pytest.raises(ValueError):
        PotentialSpec("cosine_sum", 2.0, 1.0, [(0.5, 0, 1)])
    with pytest.raises(ValueError):
        CosineTerm(-0.1, 0, 1)
    with pytest.raises(ValueError):
        CosineTerm(0.1, 0, 0)


def test_single_period_is_shared_by_all_axes():
    pot = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.2, 0, 1), (0.2, 1, 1)], (2.0,))
    assert pot.period(1) == 2.0


def test_periodicity_is_exact_to_rounding():
    pot = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.3, 0, 1), (0.2, 1, 3)], (1.25, 0.5))
    rng = np.random.default_rng(2)
    for x in rng.uniform(-3, 3, size=(50, 2)):
        for axis, tau in enumerate(pot.periods):
            y = x.copy()
            y[axis] += tau
            assert abs(eval_potential(pot, y) - eval_potential(pot, x)) <= 1e-12


@pytest.mark.parametrize("alpha,beta", [(2.0, 2.0), (1.2, 1.3), (3.0, 5.0)])
def test_constant_potential_passes_every_check(alpha, beta):
    rep = validate(PotentialSpec.constant(1.0), make_problem(3, 4.0, 8, alpha=alpha, beta=beta))
    assert rep.ok and rep.failed_checks() == []
    assert all(m >= 0 for m in rep.margins.values())


def test_small_cosine_on_moderate_box_reports_each_check():
    pot = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.1, 0, 1)], (1.0,))
    rep = validate(pot, make_problem(3, 4.0, 8))
    assert set(rep.margins) == {"positivity", "periodicity", "gradient_condition", "concavity"}
    assert rep.positivity_ok and rep.periodicity_ok
    for name in rep.failed_checks():
        assert name in rep.witnesses and rep.margins[name] < 0


def test_floor_violation_is_reported_with_witness():
    pot = PotentialSpec("cosine_sum", 1.0, 0.9, [(0.5, 0, 1)], (1.0,), strict=False)
    rep = validate(pot, make_problem(1, 2.0, 8))
    assert not rep.positivity_ok
    x = rep.witnesses["positivity"]
    assert eval_potential(pot, x) < 0.9


def test_strong_gradient_violates_sign_condition():
    pot = PotentialSpec("cosine_sum", 2.0, 1.0, [(0.9, 0, 1)], (1.0,))
    rep = validate(pot, make_problem(1, 6.0, 8))
    assert not rep.gradient_condition_ok
    x = np.array(rep.witnesses["gradient_condition"])
    assert 2.0 * eval_potential(pot, x) - radial_derivative(pot, x) < 0


def test_validate_needs_density_eight():
    with pytest.raises(ValueError):
        validate(PotentialSpec.constant(1.0), make_problem(1, 2.0, 8), sample_density=4)


def test_divided_differences_of_concave_power_are_nonpositive():
    s = np.logspace(-1, 1, 64)
    assert np.all(second_divided_differences(s, s ** 0.7) < 0)
    np.testing.assert_allclose(second_divided_differences(s, 3 * s + 1), 0.0, atol=1e-10)
