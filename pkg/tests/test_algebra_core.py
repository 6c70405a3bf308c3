import numpy as np
import pytest

from src.exceptions import GradingInconsistencyError, InputError, NotBracketGeneratingError
from src.models import Convergence, LieAlgebraSpec
from src.services import catalog
from src.services.algebra_core import (
    ad_difference,
    bracket_g,
    bracket_n,
    build_filtration,
    build_graded_basis,
    carnot_structure,
    chart_transition_matrix,
    dilate,
    extrapolate_to_zero,
    from_adapted,
    jacobi_residual,
    left_translation_derivative,
    magic_identity_residual,
    matrix_from_adapted,
    matrix_to_adapted,
    nilpotent_bracket_limit,
    nilpotentize,
    structure_tensor,
    to_adapted,
    validate_algebra,
)
from src.services.bch import bch


def test_heisenberg_validates():
    report = validate_algebra(catalog.heisenberg(1))
    assert report.passed
    assert report.jacobi_residual == 0.0
    assert report.antisymmetry_residual == 0.0


def test_corrupted_heisenberg_fails_jacobi():
    spec = catalog.heisenberg(1).with_brackets([(0, 2, 0, 1.0)])
    report = validate_algebra(spec)
    assert not report.passed
    assert report.jacobi_residual == pytest.approx(1.0)


def test_extra_bracket_consistent_with_jacobi_passes():
    # [e2, e3] = e1 on top of [e1, e2] = e3 is still a Lie algebra
    spec = catalog.heisenberg(1).with_brackets([(1, 2, 0, 1.0)])
    assert validate_algebra(spec).passed


def test_conflicting_orders_break_antisymmetry():
    spec = catalog.heisenberg(1).with_brackets([(1, 0, 2, 1.0)])
    report = validate_algebra(spec)
    assert report.antisymmetry_residual == pytest.approx(2.0)
    assert not report.passed


def test_structure_tensor_fills_partner():
    C, residual = structure_tensor(catalog.heisenberg(1))
    assert residual == 0.0
    assert C[0, 1, 2] == 1.0
    assert C[1, 0, 2] == -1.0


def test_index_out_of_range():
    spec = catalog.heisenberg(1).with_brackets([(0, 5, 1, 1.0)])
    with pytest.raises(InputError):
        structure_tensor(spec)


def test_sussmann_jacobi_for_any_parameters():
    for alpha, beta in [(1.0, 1.0), (2.0, -0.5), (0.0, 3.0)]:
        C, _ = structure_tensor(catalog.sussmann(alpha, beta))
        assert jacobi_residual(C) < 1e-12


def test_sussmann_rejects_zero_beta():
    with pytest.raises(InputError):
        catalog.sussmann(beta=0.0)


def test_filtration_dims():
    assert build_filtration(catalog.heisenberg(1)).dims == [2, 3]
    assert build_filtration(catalog.sussmann()).dims == [2, 3, 4]
    assert build_filtration(catalog.free_step2(3)).dims == [3, 6]


def test_not_bracket_generating():
    spec = catalog.heisenberg(1).model_copy(update={"generators": [0]})
    with pytest.raises(NotBracketGeneratingError) as exc:
        build_filtration(spec)
    assert exc.value.stabilized_dim == 1

    with pytest.raises(NotBracketGeneratingError):
        build_filtration(catalog.abelian(2, generators=[0]))


def test_graded_basis_of_h1():
    spec = catalog.heisenberg(1)
    carnot = build_graded_basis(spec, build_filtration(spec))
    assert carnot.words == [(0,), (1,), (0, 1)]
    assert carnot.layer_of == [1, 1, 2]
    np.testing.assert_allclose(carnot.graded_basis, np.eye(3))
    assert carnot.group_structure[0, 1, 2] == pytest.approx(1.0)
    assert carnot.nilpotent_structure is None


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heisenberg_homogeneous_dimension(n):
    carnot = carnot_structure(catalog.heisenberg(n))
    assert carnot.homogeneous_dimension == 2 * n + 2
    assert carnot.layer_dims == [2 * n, 1]
    assert carnot.is_carnot


def test_sussmann_structure(sussmann):
    assert sussmann.homogeneous_dimension == 7
    assert sussmann.layer_dims == [2, 1, 1]
    assert sussmann.words == [(0,), (1,), (0, 1), (0, 0, 1)]
    np.testing.assert_allclose(sussmann.graded_basis, np.eye(4))
    assert not sussmann.is_carnot


def test_sussmann_nilpotentisation_is_engel(sussmann, engel):
    table = sussmann.nilpotent_table()
    assert [(i, j, k) for i, j, k, _ in table] == [(0, 1, 2), (0, 2, 3)]
    for *_, c in table:
        assert c == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(sussmann.nilpotent_structure, engel.nilpotent_structure, atol=1e-12)


def test_abelian_is_its_own_nilpotentisation():
    carnot = carnot_structure(catalog.abelian(3))
    assert carnot.step == 1
    assert carnot.homogeneous_dimension == 3
    assert carnot.nilpotent_table() == []


def test_grade_raising_bracket_is_rejected(sussmann):
    C = sussmann.group_structure.copy()
    C[0, 1, 3] = 0.5
    C[1, 0, 3] = -0.5
    broken = sussmann.model_copy(update={"group_structure": C, "nilpotent_structure": None})
    with pytest.raises(GradingInconsistencyError):
        nilpotentize(catalog.sussmann(), broken)


@pytest.mark.parametrize("fixture", ["h1", "h2", "sussmann", "free3"])
def test_nilpotent_bracket_limit_matches_closed_form(fixture, request, rng):
    carnot = request.getfixturevalue(fixture)
    spec = {
        "h1": catalog.heisenberg(1),
        "h2": catalog.heisenberg(2),
        "sussmann": catalog.sussmann(),
        "free3": catalog.free_step2(3),
    }[fixture]
    for _ in range(20):
        x, y = rng.normal(size=(2, carnot.dim))
        limit = nilpotent_bracket_limit(spec, carnot, x, y)
        assert limit.status == Convergence.CONVERGED
        np.testing.assert_allclose(limit.value, bracket_n(carnot, x, y), atol=1e-8)


def test_dilation_is_an_automorphism_of_the_nilpotent_bracket(engel, rng):
    x, y = rng.normal(size=(2, 4))
    eps = 0.3
    lhs = bracket_n(engel, dilate(engel, eps, x), dilate(engel, eps, y))
    np.testing.assert_allclose(lhs, dilate(engel, eps, bracket_n(engel, x, y)), atol=1e-14)


def test_extrapolation_is_exact_on_polynomials():
    eps = [0.4, 0.2, 0.1, 0.05]
    values = [np.array([1.0 + 2 * e - 3 * e**2, 5 * e**3]) for e in eps]
    np.testing.assert_allclose(extrapolate_to_zero(eps, values), [1.0, 0.0], atol=1e-12)


def test_magic_identity_vanishes_on_carnot_groups(h1, engel, rng):
    for carnot, spec in [(h1, catalog.heisenberg(1)), (engel, catalog.engel())]:
        X, U, V = rng.normal(size=(3, carnot.dim))
        report = magic_identity_residual(spec, carnot, X, U, V)
        assert report.residual <= 1e-12
        assert report.dilation_residual <= 1e-12


def test_magic_identity_is_recorded_for_sussmann(sussmann, rng):
    X, U, V = rng.normal(size=(3, 4))
    report = magic_identity_residual(catalog.sussmann(), sussmann, X, U, V)
    assert np.isfinite(report.residual)
    assert report.eps_grid


def test_ad_difference_vanishes_when_graded(h2, sussmann):
    X = np.arange(1.0, 6.0)
    np.testing.assert_allclose(ad_difference(h2, X), 0.0)
    assert np.linalg.norm(ad_difference(sussmann, np.ones(4))) > 0


def test_left_translation_derivative_is_bch_jacobian_in_step_two(h1, rng):
    X, Y = rng.normal(size=(2, 3))
    h = 1e-6
    jac = np.column_stack(
        [
            (bch(h1.nilpotent_structure, X, Y + h * e, 2) - bch(h1.nilpotent_structure, X, Y - h * e, 2))
            / (2 * h)
            for e in np.eye(3)
        ]
    )
    np.testing.assert_allclose(left_translation_derivative(h1, X), jac, atol=1e-8)


def test_chart_transition_is_identity_on_carnot_groups(engel, rng):
    X, Y = 0.3 * rng.normal(size=(2, 4))
    np.testing.assert_allclose(chart_transition_matrix(engel, X, Y), np.eye(4), atol=1e-12)


def test_bracket_g_differs_from_bracket_n_on_sussmann(sussmann):
    e2, e3 = np.eye(4)[1], np.eye(4)[2]
    np.testing.assert_allclose(bracket_g(sussmann, e2, e3), [1.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(bracket_n(sussmann, e2, e3), 0.0)


def test_adapted_coordinates_of_a_permuted_basis(rng):
    # centre listed first: [e1, e2] = e0
    spec = LieAlgebraSpec(name="h1_permuted", dim=3, brackets=[(1, 2, 0, 1.0)], generators=[1, 2])
    carnot = carnot_structure(spec)
    np.testing.assert_array_equal(carnot.graded_basis, np.eye(3)[:, [1, 2, 0]])
    np.testing.assert_allclose(to_adapted(carnot, [7.0, 1.0, 2.0]), [1.0, 2.0, 7.0])
    np.testing.assert_allclose(from_adapted(carnot, [1.0, 2.0, 7.0]), [7.0, 1.0, 2.0])
    X = rng.normal(size=(5, 3))
    np.testing.assert_allclose(from_adapted(carnot, to_adapted(carnot, X)), X, atol=1e-14)
    # delta_2 written in the input basis scales the centre e0 by 4
    D = np.diag([4.0, 2.0, 2.0])
    np.testing.assert_allclose(matrix_to_adapted(carnot, D), np.diag([2.0, 2.0, 4.0]))
    np.testing.assert_allclose(matrix_from_adapted(carnot, matrix_to_adapted(carnot, D)), D)
