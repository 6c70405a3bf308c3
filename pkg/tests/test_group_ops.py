import math

import numpy as np
import pytest

from src.exceptions import InputError, UnsupportedStepError
from src.models import GroupElement, HorizontalPath, LieAlgebraSpec, NormKind
from src.services.algebra_core import carnot_structure, dilate
from src.services.group_ops import (
    bch_multiply,
    box_constants_estimate,
    box_membership,
    cc_distance_upper,
    commutator_word,
    group_inverse,
    hausdorff_dimension_estimate,
    homogeneous_norm,
    packing_count,
    path_endpoint,
    quasi_distance,
    sample_box,
    word_factorization,
    word_product,
)
from src.services.heisenberg import cc_norm_exact


def test_heisenberg_product(h1):
    z = bch_multiply(h1, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(z, [1.0, 1.0, 0.5])


def test_group_element_inputs(h1):
    x = GroupElement(coords=[1.0, 2.0, 3.0])
    np.testing.assert_allclose(bch_multiply(h1, x, group_inverse(x)), 0.0, atol=1e-14)


def test_group_element_rejects_nan():
    with pytest.raises(InputError):
        GroupElement(coords=[1.0, float("nan")])


def test_inverse_and_identity(sussmann, rng):
    x = rng.normal(size=4)
    for use_group in (False, True):
        np.testing.assert_allclose(
            bch_multiply(sussmann, x, group_inverse(x), use_group_bracket=use_group), 0.0, atol=1e-12
        )
        np.testing.assert_allclose(bch_multiply(sussmann, np.zeros(4), x, use_group_bracket=use_group), x)


@pytest.mark.parametrize("kind", [NormKind.ONE, NormKind.INF])
def test_norm_is_homogeneous_and_symmetric(engel, rng, kind):
    x = rng.normal(size=4)
    r = homogeneous_norm(engel, x, kind)
    assert homogeneous_norm(engel, dilate(engel, 0.37, x), kind) == pytest.approx(0.37 * r)
    assert homogeneous_norm(engel, group_inverse(x), kind) == pytest.approx(r)
    assert homogeneous_norm(engel, np.zeros(4), kind) == 0.0


def test_norm_batches(h2, rng):
    X = rng.normal(size=(7, 5))
    norms = homogeneous_norm(h2, X, NormKind.INF)
    assert norms.shape == (7,)
    assert norms[3] == pytest.approx(homogeneous_norm(h2, X[3], NormKind.INF))


def test_quasi_distance_left_invariant(h1, rng):
    x, y, g = rng.normal(size=(3, 3))
    d = quasi_distance(h1, x, y)
    assert quasi_distance(h1, bch_multiply(h1, g, x), bch_multiply(h1, g, y)) == pytest.approx(d)


def test_box_membership(h1):
    assert box_membership(h1, 1.0, [0.5, 0.5, 0.9])
    assert not box_membership(h1, 1.0, [0.0, 0.0, 1.1])
    assert box_membership(h1, 2.0, [0.0, 0.0, 3.9])


def test_sample_box_stays_in_box(engel, rng):
    points = sample_box(engel, rng, 200, 0.5)
    assert all(box_membership(engel, 0.5, p) for p in points)


def test_box_constants_with_exact_distance(h1, rng):
    samples = sample_box(h1, rng, 500, 1.0)
    constants = box_constants_estimate(h1, samples, distance_fn=lambda p: cc_norm_exact(p))
    assert 0 < constants.c_hat <= constants.C_hat < math.inf
    assert constants.violations == 0
    # |x|_inf <= d for the exact CC distance, with equality on horizontal points
    assert constants.C_hat <= 1.0 + 1e-9


def test_box_constants_need_samples(h1):
    with pytest.raises(InputError):
        box_constants_estimate(h1, np.zeros((0, 3)), distance_fn=lambda p: 1.0)


def test_commutator_word_lengths():
    assert len(commutator_word((0,), 0.3)) == 1
    assert len(commutator_word((0, 1), 0.3)) == 4
    assert len(commutator_word((0, 0, 1), 0.3)) == 10
    assert len(commutator_word((1, 0, 0, 1), 0.3)) == 22


def test_commutator_word_leading_term(h1):
    s = -0.2
    z = word_product(h1, commutator_word(h1.words[2], s))
    np.testing.assert_allclose(z, [0.0, 0.0, s * abs(s)], atol=1e-15)


@pytest.mark.parametrize("fixture", ["h1", "engel", "free3"])
def test_word_factorization_reproduces_point(fixture, request, rng):
    carnot = request.getfixturevalue(fixture)
    x = 0.3 * rng.normal(size=carnot.dim)
    result = word_factorization(carnot, x)
    assert result.residual <= 1e-6
    np.testing.assert_allclose(word_product(carnot, result.letters), x, atol=1e-6)
    assert all(0 <= g < carnot.horizontal_dim for _, g in result.letters)


def test_word_factorization_rescales_large_points(h1):
    x = np.array([3.0, -1.0, 25.0])
    result = word_factorization(h1, x)
    assert result.rescaling < 1.0
    np.testing.assert_allclose(word_product(h1, result.letters), x, atol=1e-6)


def test_word_factorization_of_identity(engel):
    result = word_factorization(engel, np.zeros(4))
    assert result.letters == []
    assert result.residual == 0.0


def test_cc_distance_horizontal_segment(h1):
    result = cc_distance_upper(h1, np.zeros(3), [1.0, 0.0, 0.0], starts=2)
    assert result.distance == pytest.approx(1.0, abs=1e-4)
    assert result.residual <= 1e-6


def test_cc_distance_vertical_point(h1):
    s = 0.25
    result = cc_distance_upper(h1, np.zeros(3), [0.0, 0.0, s])
    exact = 2.0 * math.sqrt(math.pi * s)
    assert exact * (1 - 1e-6) <= result.distance <= 4.0 * math.sqrt(s) * 1.05
    assert result.path.length == pytest.approx(result.distance)


def test_cc_distance_identity_and_segments(h1):
    assert cc_distance_upper(h1, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).distance == 0.0
    with pytest.raises(InputError):
        cc_distance_upper(h1, np.zeros(3), [1.0, 0.0, 0.0], n_segments=0)


def test_packing_count_grows_as_eps_shrinks(h1):
    rng = np.random.default_rng(3)
    points = sample_box(h1, rng, 4000, 0.8)
    coarse = packing_count(h1, points, 0.4, 0.6)
    fine = packing_count(h1, points, 0.2, 0.6)
    assert 0 < coarse < fine


def test_dimension_estimate_needs_four_scales(h1):
    with pytest.raises(InputError):
        hausdorff_dimension_estimate(h1, [0.2, 0.1, 0.05])


@pytest.mark.slow
def test_hausdorff_dimension_of_heisenberg_box(h1):
    estimate = hausdorff_dimension_estimate(h1, np.geomspace(0.24, 0.06, 5), seed=0)
    assert estimate.estimate == pytest.approx(4.0, abs=0.3)
    assert estimate.ci_low <= estimate.estimate <= estimate.ci_high
    assert estimate.counts == sorted(estimate.counts)


def test_step_beyond_bch_order_is_unsupported():
    # filiform algebra of step 7: [e0, e_i] = e_{i+1}
    spec = LieAlgebraSpec(
        name="filiform7",
        dim=8,
        brackets=[(0, i, i + 1, 1.0) for i in range(1, 7)],
        generators=[0, 1],
    )
    carnot = carnot_structure(spec)
    assert carnot.step == 7
    with pytest.raises(UnsupportedStepError):
        bch_multiply(carnot, np.zeros(8), np.zeros(8))


@pytest.mark.parametrize("fixture", ["h2", "engel", "free3", "sussmann"])
def test_nilpotent_product_is_associative(fixture, request, rng):
    carnot = request.getfixturevalue(fixture)
    for x, y, z in 0.8 * rng.normal(size=(20, 3, carnot.dim)):
        left = bch_multiply(carnot, bch_multiply(carnot, x, y), z)
        right = bch_multiply(carnot, x, bch_multiply(carnot, y, z))
        np.testing.assert_allclose(left, right, atol=1e-10)


@pytest.mark.parametrize("fixture", ["h1", "engel"])
def test_group_product_is_associative_on_carnot_groups(fixture, request, rng):
    carnot = request.getfixturevalue(fixture)
    x, y, z = 0.5 * rng.normal(size=(3, carnot.dim))
    left = bch_multiply(carnot, bch_multiply(carnot, x, y, use_group_bracket=True), z, use_group_bracket=True)
    right = bch_multiply(carnot, x, bch_multiply(carnot, y, z, use_group_bracket=True), use_group_bracket=True)
    np.testing.assert_allclose(left, right, atol=1e-10)


@pytest.mark.parametrize("fixture", ["h2", "engel", "sussmann"])
@pytest.mark.parametrize("eps", [0.1, 0.5, 3.0])
def test_dilation_is_a_group_morphism(fixture, eps, request, rng):
    carnot = request.getfixturevalue(fixture)
    X, Y = rng.normal(size=(2, 10, carnot.dim))
    lhs = dilate(carnot, eps, bch_multiply(carnot, X, Y))
    rhs = bch_multiply(carnot, dilate(carnot, eps, X), dilate(carnot, eps, Y))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("fixture", ["h2", "engel", "free3"])
def test_sum_and_sup_norms_are_equivalent(fixture, request, rng):
    carnot = request.getfixturevalue(fixture)
    X = rng.normal(size=(500, carnot.dim)) * rng.uniform(0.01, 10.0, size=(500, 1))
    one = homogeneous_norm(carnot, X, NormKind.ONE)
    sup = homogeneous_norm(carnot, X, NormKind.INF)
    assert np.all(sup <= one * (1 + 1e-12))
    assert np.all(one <= carnot.step * sup * (1 + 1e-12))


def test_quasi_triangle_constant_of_heisenberg_sup_norm(h1, rng):
    # sqrt(|z1 + z2 + omega/2|) <= sqrt(a^2 + b^2 + ab/2) <= a + b
    X, Y = rng.normal(size=(2, 1000, 3))
    lhs = homogeneous_norm(h1, bch_multiply(h1, X, Y), NormKind.INF)
    rhs = homogeneous_norm(h1, X, NormKind.INF) + homogeneous_norm(h1, Y, NormKind.INF)
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_quasi_triangle_constant_is_scale_free(engel, rng):
    X, Y = rng.normal(size=(2, 1000, 4))

    def worst(eps):
        Xe, Ye = dilate(engel, eps, X), dilate(engel, eps, Y)
        lhs = homogeneous_norm(engel, bch_multiply(engel, Xe, Ye), NormKind.INF)
        rhs = homogeneous_norm(engel, Xe, NormKind.INF) + homogeneous_norm(engel, Ye, NormKind.INF)
        return float(np.max(lhs / rhs))

    K = worst(1.0)
    assert 0.0 < K < math.inf
    assert worst(0.01) == pytest.approx(K, rel=1e-9)
    assert worst(50.0) == pytest.approx(K, rel=1e-9)


def test_cc_upper_bound_dominates_sup_norm(h1):
    # |x|_inf <= d_CC(0, x) on H(1): horizontal projection and the isoperimetric inequality
    for x in ([0.3, -0.2, 0.1], [0.0, 0.4, -0.05], [0.1, 0.1, 0.3]):
        result = cc_distance_upper(h1, np.zeros(3), x, starts=4)
        assert result.distance >= float(quasi_distance(h1, np.zeros(3), x)) * (1 - 1e-6)


def test_cc_upper_bound_scales_under_dilation(h1):
    x = np.array([0.3, -0.2, 0.1])
    full = cc_distance_upper(h1, np.zeros(3), x, starts=4).distance
    half = cc_distance_upper(h1, np.zeros(3), dilate(h1, 0.5, x), starts=4).distance
    assert half / full == pytest.approx(0.5, rel=0.1)


def test_cc_path_is_horizontal_and_reaches_target(h1):
    x = np.array([0.3, -0.2, 0.1])
    result = cc_distance_upper(h1, np.zeros(3), x, starts=2)
    assert result.path.horizontal_dim == 2
    np.testing.assert_allclose(result.path.controls[:, 2], 0.0)
    np.testing.assert_allclose(path_endpoint(h1, result.path), x, atol=1e-5)


def test_horizontal_path_validation(h1):
    good = HorizontalPath(controls=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], durations=[0.5, 0.5], horizontal_dim=2)
    np.testing.assert_allclose(path_endpoint(h1, good), [0.5, 0.5, 0.125])
    with pytest.raises(InputError):
        HorizontalPath(controls=[[1.0, 0.0, 0.1]], durations=[1.0], horizontal_dim=2)
    with pytest.raises(InputError):
        HorizontalPath(controls=[[1.0, 0.0, 0.0]], durations=[0.0], horizontal_dim=2)
    with pytest.raises(InputError):
        HorizontalPath(controls=[[1.0, 0.0, 0.0]], durations=[1.0, 1.0], horizontal_dim=2)
    with pytest.raises(InputError):
        path_endpoint(h1, HorizontalPath(controls=[[1.0, 0.0]], durations=[1.0], horizontal_dim=2))


def test_letters_must_be_horizontal(h1):
    with pytest.raises(InputError):
        word_product(h1, [(0.5, 2)])
    with pytest.raises(InputError):
        word_product(h1, [(float("inf"), 0)])
    with pytest.raises(InputError):
        commutator_word((), 0.1)
    with pytest.raises(InputError):
        commutator_word((0, -1), 0.1)
    with pytest.raises(InputError):
        commutator_word((0, 1), float("nan"))
