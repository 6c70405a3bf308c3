import math

import numpy as np
import pytest

from src.exceptions import InputError, NotSymplecticError, UndefinedInvariantError
from src.models import HamiltonianKind, HamiltonianSpec, HPoint, LinearClass, SampledCurve
from src.services.group_ops import bch_multiply
from src.services.heisenberg import (
    CylinderRegion,
    ImageRegion,
    LiftedMap,
    MembershipRegion,
    ball_ratio_estimate,
    cc_norm_exact,
    generating_function_along_flow,
    h_bracket,
    h_dilate,
    h_inv,
    h_mul,
    h_mul_array,
    hamiltonian_flow,
    hl_heisenberg,
    hofer_length,
    hofer_lower_bound_check,
    invariants_width_heights,
    is_conformal_symplectic,
    lift_planar_curve,
    lift_symplectomorphism,
    pansu_derivative_closed_form,
    vertical_flow_check,
)
from src.services.pansu import classify_linear, linear_candidate


def _rotation(angle):
    return np.array([[math.cos(angle), math.sin(angle)], [-math.sin(angle), math.cos(angle)]])


def _bump(**kwargs):
    return HamiltonianSpec(kind=HamiltonianKind.QUADRATIC_BUMP, **kwargs)


def test_group_law_matches_bch_product(h2, rng):
    P, Q = rng.normal(size=(2, 5))
    np.testing.assert_allclose(h_mul_array(P, Q), bch_multiply(h2, P, Q), atol=1e-14)


def test_inverse_dilation_and_bracket():
    p = HPoint(x=[1.0, 2.0], xbar=0.5)
    q = HPoint(x=[0.0, 1.0], xbar=-1.0)
    np.testing.assert_allclose(h_mul(p, h_inv(p)).as_array(), 0.0)
    assert h_mul(p, q).xbar == pytest.approx(0.5 - 1.0 + 0.5)
    np.testing.assert_allclose(h_dilate(2.0, p).as_array(), [2.0, 4.0, 2.0])
    assert h_bracket(p, q).xbar == pytest.approx(1.0)
    with pytest.raises(InputError):
        h_mul(p, HPoint(x=[1.0, 0.0, 0.0, 0.0]))


def test_odd_horizontal_part_is_rejected():
    with pytest.raises(InputError):
        HPoint(x=[1.0, 2.0, 3.0])


def test_cc_norm_closed_forms():
    assert float(cc_norm_exact([0.6, 0.8, 0.0])) == pytest.approx(1.0)
    assert float(cc_norm_exact([0.0, 0.0, 0.25])) == pytest.approx(2.0 * math.sqrt(math.pi * 0.25))
    # continuous as the horizontal part shrinks
    assert float(cc_norm_exact([1e-6, 0.0, 0.25])) == pytest.approx(math.sqrt(math.pi), rel=1e-4)


def test_cc_norm_is_homogeneous_and_batched(rng):
    P = rng.normal(size=(6, 3))
    norms = cc_norm_exact(P)
    assert norms.shape == (6,)
    scaled = np.column_stack([0.3 * P[:, :2], 0.09 * P[:, 2]])
    np.testing.assert_allclose(cc_norm_exact(scaled), 0.3 * norms, rtol=1e-10)
    assert np.all(norms >= np.linalg.norm(P[:, :2], axis=1) - 1e-12)


def test_conformal_symplectic_matrices():
    ok, a = is_conformal_symplectic(2.0 * _rotation(0.4))
    assert ok
    assert a == pytest.approx(4.0)
    ok, _ = is_conformal_symplectic(np.diag([2.0, 1.0, 1.0, 1.0]))
    assert not ok
    with pytest.raises(InputError):
        hl_heisenberg(np.diag([2.0, 1.0, 1.0, 1.0]))


def test_hl_heisenberg_is_graded_automorphism(h1):
    M = hl_heisenberg(2.0 * _rotation(0.4))
    np.testing.assert_allclose(M[-1], [0.0, 0.0, 4.0])
    assert classify_linear(linear_candidate(h1, M), h1) == LinearClass.HL


def test_lift_of_circle_encloses_its_area():
    t = np.linspace(0.0, 2 * math.pi, 2001)
    r = 0.7
    curve = SampledCurve(times=t, points=r * np.column_stack([np.cos(t), np.sin(t)]))
    lifted = lift_planar_curve(curve, xbar0=1.0)
    assert lifted.points.shape == (2001, 3)
    assert lifted.points[0, -1] == 1.0
    assert lifted.diagnostics["area_change"] == pytest.approx(math.pi * r**2, rel=1e-5)


def test_lift_of_odd_curve_is_rejected():
    t = np.linspace(0.0, 1.0, 5)
    with pytest.raises(InputError):
        lift_planar_curve(SampledCurve(times=t, points=np.column_stack([t, t, t])))


def test_linear_symplectic_lift_shifts_by_constant(rng):
    A = np.array([[1.0, 0.5], [0.0, 1.0]])
    lifted = lift_symplectomorphism(lambda X: X @ A.T, 1, a=0.3)
    assert lifted.loop_residual <= 1e-12
    P = rng.normal(size=(5, 3))
    image = lifted(P)
    np.testing.assert_allclose(image[:, :2], P[:, :2] @ A.T, atol=1e-12)
    np.testing.assert_allclose(image[:, 2], P[:, 2] + 0.3, atol=1e-12)
    np.testing.assert_allclose(lifted.inverse(image), P, atol=1e-10)
    assert np.linalg.det(lifted.jacobian(P[0])) == pytest.approx(1.0, abs=1e-8)


def test_non_symplectic_map_is_rejected():
    with pytest.raises(NotSymplecticError):
        lift_symplectomorphism(lambda X: X @ np.diag([2.0, 1.0]), 1)


def test_unknown_path_strategy():
    with pytest.raises(InputError):
        LiftedMap(lambda X: X, 1, path="spiral")


def test_composition_applies_in_order(rng):
    R = _rotation(0.3)
    S = np.array([[1.0, 0.0], [0.7, 1.0]])
    first = lift_symplectomorphism(lambda X: X @ S.T, 1, a=0.2)
    second = lift_symplectomorphism(lambda X: X @ R.T, 1, a=0.3)
    P = rng.normal(size=(4, 3))
    np.testing.assert_allclose(second.compose(first)(P), second(first(P)), atol=1e-10)


def test_closed_form_derivative_of_linear_lift():
    A = _rotation(0.8)
    lifted = lift_symplectomorphism(lambda X: X @ A.T, 1)
    expected = np.zeros((3, 3))
    expected[:2, :2] = A
    expected[2, 2] = 1.0
    np.testing.assert_allclose(pansu_derivative_closed_form(lifted, [0.4, -0.3, 0.2]), expected, atol=1e-8)


def test_quadratic_flow_rotates_clockwise():
    H = HamiltonianSpec(kind=HamiltonianKind.QUADRATIC)
    flow = hamiltonian_flow(H, [1.0, 0.0], T=math.pi / 2, steps=200)
    np.testing.assert_allclose(flow.points[-1], [0.0, -1.0], atol=1e-8)
    assert flow.diagnostics["energy_drift"] <= 1e-8
    # H = |x|^2 / 2 has H + lambda(X_H) = 0
    np.testing.assert_allclose(generating_function_along_flow(H, [[1.0, 0.0], [0.2, 0.5]]), 0.0, atol=1e-14)


def test_generating_function_vanishes_outside_support():
    H = _bump(amplitude=1.0, support_radius=1.0)
    F = generating_function_along_flow(H, [[2.0, 0.0], [0.0, -1.5]])
    np.testing.assert_allclose(F, 0.0)


def test_flow_lift_preserves_volume_and_inverts(rng):
    lifted = LiftedMap.from_flow(_bump(amplitude=1.0, support_radius=1.0))
    P = np.column_stack([rng.uniform(-0.8, 0.8, size=(3, 2)), rng.uniform(-1, 1, size=3)])
    for p in P:
        assert np.linalg.det(lifted.jacobian(p)) == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(lifted.inverse(lifted(P)), P, atol=1e-6)


def test_vertical_part_of_lifted_flow():
    H = _bump(amplitude=1.0, support_radius=1.0)
    assert vertical_flow_check(H, [0.3, -0.2], T=1.0, steps=1000) <= 1e-4


def test_hofer_length_of_bump():
    # max of r^2 (1 - r^2)^3 / 2 is 27/512, reached at r = 1/2
    assert hofer_length(_bump(amplitude=1.0)).value == pytest.approx(27 / 512, rel=1e-6)
    assert hofer_length(_bump(amplitude=1.0, modulation=0.5)).value == pytest.approx(27 / 512, rel=1e-6)


def test_hofer_length_needs_sampler_without_compact_support():
    H = HamiltonianSpec(kind=HamiltonianKind.QUADRATIC)
    with pytest.raises(InputError):
        hofer_length(H)
    value = hofer_length(H, domain_sampler=lambda: np.array([[1.0, 0.0], [0.0, 2.0]])).value
    assert value == pytest.approx(2.0)


def test_ball_ratio_is_cached_and_bounded():
    ratio, stderr = ball_ratio_estimate(1)
    assert ball_ratio_estimate(1) == (ratio, stderr)
    # the CC ball sits in the cylinder |x| <= 1, |xbar| <= 1/(4 pi) of volume 1/2
    assert 0.0 < ratio < 0.5 / (4.0 * math.pi / 3.0)
    assert stderr < 0.01 * ratio


def test_hofer_lower_bound_holds():
    check = hofer_lower_bound_check(_bump(amplitude=1.0, support_radius=1.0), region_radius=1.0)
    assert check.passed
    assert check.lhs <= check.rhs
    assert check.region_volume == pytest.approx(math.pi)


def test_hofer_check_needs_support_inside_region():
    with pytest.raises(InputError):
        hofer_lower_bound_check(_bump(support_radius=1.0), region_radius=0.5)
    with pytest.raises(InputError):
        hofer_lower_bound_check(HamiltonianSpec(kind=HamiltonianKind.QUADRATIC))


def test_cylinder_invariants():
    region = CylinderRegion([0.0, 0.0], 1.0, -0.25, 0.5)
    inv = invariants_width_heights(region, orders=(1, 2), samples=4000)
    assert inv.width == pytest.approx(0.75)
    assert inv.heights[0] == pytest.approx(0.75)
    assert inv.heights[1] == pytest.approx((0.75**0.5 / inv.projected_volume) ** 0.5)
    assert inv.h_inf == pytest.approx(0.75)
    assert inv.projected_volume == pytest.approx(math.pi, abs=0.15)


def test_width_is_preserved_by_lifted_rotation():
    R = _rotation(0.5)
    lifted = lift_symplectomorphism(lambda X: X @ R.T, 1)
    image = ImageRegion(CylinderRegion([0.0, 0.0], 1.0, 0.0, 0.75), lifted)
    inv = invariants_width_heights(image, orders=(1,), samples=2000)
    assert inv.width == pytest.approx(0.75, abs=5e-3)


def test_empty_region_has_no_invariants():
    region = MembershipRegion(lambda X, Z: np.zeros(Z.shape, dtype=bool), [-1.0, -1.0, 0.0], [1.0, 1.0, 1.0])
    with pytest.raises(UndefinedInvariantError):
        invariants_width_heights(region, samples=200)
    with pytest.raises(InputError):
        invariants_width_heights(region, orders=(0,), samples=200)


def _leaking(**kwargs):
    # claims support in the unit ball but is |x|^2 everywhere
    return HamiltonianSpec(
        kind=HamiltonianKind.CUSTOM,
        value_fn=lambda t, X: np.sum(X * X, axis=1),
        gradient_fn=lambda t, X: 2.0 * X,
        **kwargs,
    )


def test_hamiltonian_leaking_out_of_its_support_is_rejected():
    H = _leaking()
    assert H.check_support(np.random.default_rng(0)) > 1.0
    with pytest.raises(InputError):
        hamiltonian_flow(H, [0.1, 0.0])
    with pytest.raises(InputError):
        hofer_length(H)
    with pytest.raises(InputError):
        LiftedMap.from_flow(H)
    with pytest.raises(InputError):
        hofer_lower_bound_check(_leaking(support_radius=0.5), region_radius=1.0, samples=100)


def test_custom_hamiltonian_inside_its_support_is_accepted():
    bump = _bump(amplitude=1.0, support_radius=1.0)
    H = HamiltonianSpec(kind=HamiltonianKind.CUSTOM, value_fn=bump.value, gradient_fn=bump.gradient)
    assert H.check_support(np.random.default_rng(0)) == 0.0
    flow = hamiltonian_flow(H, [0.3, -0.2], steps=50)
    np.testing.assert_allclose(flow.points[-1], hamiltonian_flow(bump, [0.3, -0.2], steps=50).points[-1])
    assert hofer_length(H).value == pytest.approx(27 / 512, rel=1e-6)


def test_symplectomorphism_loop_points_follow_the_seed():
    A = _rotation(0.3)
    seen = []

    def phi(X):
        seen.append(np.array(X, copy=True))
        return X @ A.T

    def loop_points(seed):
        seen.clear()
        lift_symplectomorphism(phi, 1, seed=seed)
        return np.concatenate([s.ravel() for s in seen])

    first = loop_points(5)
    np.testing.assert_array_equal(loop_points(5), first)
    again = loop_points(6)
    assert again.shape != first.shape or not np.array_equal(again, first)
