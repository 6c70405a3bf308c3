import numpy as np
import pytest

from src.exceptions import InputError
from src.models import Convergence, LinearClass, SampledCurve
from src.services.algebra_core import dilate
from src.services.group_ops import bch_multiply
from src.services.pansu import (
    beta_limit,
    classify_linear,
    default_probes,
    develop_curve,
    finite_difference,
    hl_matrix_sussmann,
    i_area,
    lift_curve,
    linear_candidate,
    morphism_residual,
    named_map,
    pansu_derivative_estimate,
)


def test_left_translation_difference_quotient_is_identity(sussmann, rng):
    a, x = 0.5 * rng.normal(size=(2, 4))
    f = named_map(sussmann, "left", a)
    Y = rng.normal(size=(6, 4))
    np.testing.assert_allclose(finite_difference(sussmann, f, x, 0.05, Y), Y, atol=1e-9)


def test_left_translation_is_hl(sussmann, rng):
    a, x = 0.5 * rng.normal(size=(2, 4))
    estimate = pansu_derivative_estimate(sussmann, named_map(sussmann, "left", a), x)
    assert estimate.status == Convergence.CONVERGED
    np.testing.assert_allclose(estimate.candidate.matrix, np.eye(4), atol=1e-8)
    assert classify_linear(estimate.candidate, sussmann) == LinearClass.HL


def test_right_translation_by_non_central_element_diverges(h1):
    f = named_map(h1, "right", [0.5, 0.3, 0.0])
    estimate = pansu_derivative_estimate(h1, f, [0.2, -0.1, 0.4], [0.2, 0.1, 0.05, 0.025, 0.0125])
    assert estimate.status == Convergence.DIVERGENT
    assert estimate.order < 0.1
    assert estimate.discrepancies[-1] >= estimate.discrepancies[0]


def test_right_translation_by_central_element_is_smooth(h1):
    f = named_map(h1, "right", [0.0, 0.0, 2.0])
    estimate = pansu_derivative_estimate(h1, f, [0.2, -0.1, 0.4])
    assert estimate.status == Convergence.CONVERGED
    np.testing.assert_allclose(estimate.candidate.matrix, np.eye(3), atol=1e-8)


def test_dilation_is_its_own_derivative(engel, rng):
    f = named_map(engel, "dilation", [2.0])
    estimate = pansu_derivative_estimate(engel, f, rng.normal(size=4))
    np.testing.assert_allclose(estimate.candidate.matrix, np.diag([2.0, 2.0, 4.0, 8.0]), atol=1e-7)
    assert classify_linear(estimate.candidate, engel) == LinearClass.HL


def test_classify_linear_cases(h1):
    assert classify_linear(linear_candidate(h1, np.diag([1.0, 2.0, 2.0])), h1) == LinearClass.HL
    assert classify_linear(linear_candidate(h1, np.diag([1.0, 2.0, 1.0])), h1) == LinearClass.NOT_LINEAR
    assert classify_linear(linear_candidate(h1, np.diag([1.0, 0.0, 0.0])), h1) == LinearClass.END_ONLY
    shear = np.eye(3)
    shear[2, 0] = 1.0
    assert morphism_residual(h1, shear) == pytest.approx(0.0)
    assert classify_linear(linear_candidate(h1, shear), h1) == LinearClass.END_ONLY


def test_sussmann_hl_family(sussmann):
    M = hl_matrix_sussmann(2.0, -0.7, 0.5)
    candidate = linear_candidate(sussmann, M)
    assert candidate.morphism_residual == pytest.approx(0.0, abs=1e-14)
    assert candidate.dilation_residual == 0.0
    assert classify_linear(candidate, sussmann) == LinearClass.HL


def test_estimate_input_checks(h1):
    f = named_map(h1, "identity")
    with pytest.raises(InputError):
        pansu_derivative_estimate(h1, f, np.zeros(3), [0.1, 0.05])
    with pytest.raises(InputError):
        pansu_derivative_estimate(h1, f, np.zeros(3), probes=np.eye(3)[:2])


def test_named_map_errors(h1):
    with pytest.raises(InputError):
        named_map(h1, "left", [1.0, 2.0])
    with pytest.raises(InputError):
        named_map(h1, "dilation", [1.0, 2.0])
    with pytest.raises(InputError):
        named_map(h1, "twist")


def test_default_probes_span(engel):
    probes = default_probes(engel, 10, seed=1)
    assert probes.shape == (14, 4)
    assert np.linalg.matrix_rank(probes) == 4


def test_develop_then_lift_recovers_curve(engel, rng):
    times = np.linspace(0.0, 1.0, 41)
    increments = 0.05 * rng.normal(size=(40, 4))
    points = np.zeros((41, 4))
    for k, step in enumerate(increments):
        points[k + 1] = bch_multiply(engel, points[k], step)
    curve = SampledCurve(times=times, points=points)
    sigma = develop_curve(engel, curve)
    np.testing.assert_allclose(sigma.points[0], 0.0)
    np.testing.assert_allclose(sigma.points[-1], increments.sum(axis=0), atol=1e-12)
    np.testing.assert_allclose(lift_curve(engel, sigma).points, points, atol=1e-10)


def test_horizontal_line_is_its_own_development(h1):
    times = np.linspace(0.0, 1.0, 11)
    points = np.column_stack([times, 2 * times, np.zeros(11)])
    sigma = develop_curve(h1, SampledCurve(times=times, points=points))
    np.testing.assert_allclose(sigma.points, points, atol=1e-14)
    lifted = lift_curve(h1, sigma)
    assert lifted.diagnostics["vertical_velocity"] == pytest.approx(0.0, abs=1e-12)


def test_i_area_of_unit_square(h1):
    corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 0]], dtype=float)
    area = i_area(h1, SampledCurve(times=np.arange(5.0), points=corners), 1)
    np.testing.assert_allclose(area.points[-1], [0.0, 0.0, 2.0])
    with pytest.raises(InputError):
        i_area(h1, SampledCurve(times=np.arange(5.0), points=corners), 0)


def test_beta_limit_recovers_nilpotent_product(sussmann, rng):
    for _ in range(10):
        x, y = 0.5 * rng.normal(size=(2, 4))
        limit = beta_limit(sussmann, x, y, [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625])
        np.testing.assert_allclose(limit.value, bch_multiply(sussmann, x, y), atol=1e-6)


def test_beta_limit_is_exact_on_carnot_groups(h2, rng):
    x, y = rng.normal(size=(2, 5))
    limit = beta_limit(h2, x, y)
    np.testing.assert_allclose(limit.value, bch_multiply(h2, x, y), atol=1e-10)
    np.testing.assert_allclose(
        dilate(h2, 0.5, limit.value), bch_multiply(h2, dilate(h2, 0.5, x), dilate(h2, 0.5, y)), atol=1e-10
    )


def test_curves_need_two_samples(h1):
    with pytest.raises(InputError):
        SampledCurve(times=[0.0], points=[[0.0, 0.0, 0.0]])
    with pytest.raises(InputError):
        develop_curve(h1, SampledCurve(times=[], points=np.zeros((0, 3))))
