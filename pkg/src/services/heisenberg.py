"""Heisenberg group H(n) in closed form.

Conventions: omega(x, y) = x^T J y with J = [[0, I], [-I, 0]], lambda_x(v) = omega(x, v) / 2
(so d lambda = omega), Hamiltonian vector field X_H = J grad H.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma

from config.settings import settings
from src.exceptions import InputError, IntegrationError, NotSymplecticError, UndefinedInvariantError
from src.models import (
    HamiltonianKind,
    HamiltonianSpec,
    HoferCheck,
    HoferLength,
    HPoint,
    Invariants,
    SampledCurve,
)

logger = logging.getLogger(__name__)

PlanarMap = Callable[[np.ndarray], np.ndarray]


def symplectic_matrix(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def omega(x, y) -> np.ndarray:
    """x^T J y along the last axis"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1] // 2
    return np.sum(x[..., :n] * y[..., n:] - x[..., n:] * y[..., :n], axis=-1)


# --- group law ------------------------------------------------------------


def h_mul_array(P, Q) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape[-1] != Q.shape[-1]:
        raise InputError(f"Dimension mismatch: {P.shape[-1]} vs {Q.shape[-1]}")
    x, y = P[..., :-1], Q[..., :-1]
    vertical = P[..., -1] + Q[..., -1] + 0.5 * omega(x, y)
    return np.concatenate([x + y, vertical[..., None]], axis=-1)


def h_dilate_array(eps: float, P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    return np.concatenate([eps * P[..., :-1], eps**2 * P[..., -1:]], axis=-1)


def _check_pair(p: HPoint, q: HPoint) -> None:
    if p.n != q.n:
        raise InputError(f"Points of H({p.n}) and H({q.n}) cannot be combined")


def h_mul(p: HPoint, q: HPoint) -> HPoint:
    _check_pair(p, q)
    return HPoint.from_array(h_mul_array(p.as_array(), q.as_array()))


def h_inv(p: HPoint) -> HPoint:
    return HPoint(x=-p.x, xbar=-p.xbar)


def h_dilate(eps: float, p: HPoint) -> HPoint:
    return HPoint(x=eps * p.x, xbar=eps**2 * p.xbar)


def h_bracket(p: HPoint, q: HPoint) -> HPoint:
    """[(x, a), (y, b)] = (0, omega(x, y))"""
    _check_pair(p, q)
    return HPoint(x=np.zeros_like(p.x), xbar=float(omega(p.x, q.x)))


# --- CC norm and H-linear maps ---------------------------------------------


def _chord_ratio(theta: np.ndarray) -> np.ndarray:
    """(2 theta - sin 2 theta) / (8 sin^2 theta), increasing from 0 to infinity on [0, pi)"""
    t = 2.0 * theta
    small = t < 1e-2
    numerator = np.where(small, t**3 / 6 - t**5 / 120 + t**7 / 5040, t - np.sin(t))
    denominator = 8.0 * np.sin(theta) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(theta == 0, 0.0, numerator / denominator)


def cc_norm_exact(x, xbar=None) -> np.ndarray:
    """
    Carnot-Caratheodory distance from the identity to (x, xbar) in H(n).

    Geodesics project to circular arcs: d = 2 sqrt(pi |xbar|) when x = 0, and
    otherwise d = |x| theta / sin(theta) with theta in [0, pi) solving
    (2 theta - sin 2 theta) / (8 sin^2 theta) = |xbar| / |x|^2.
    """
    if isinstance(x, HPoint):
        x, xbar = x.x, x.xbar
    elif xbar is None:
        arr = np.asarray(x, dtype=float)
        x, xbar = arr[..., :-1], arr[..., -1]
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    z = np.abs(np.asarray(xbar, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.where(r > 0, z / np.where(r > 0, r, 1.0) ** 2, 0.0)
    lo = np.zeros_like(target)
    hi = np.full_like(target, math.pi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        above = _chord_ratio(mid) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    theta = 0.5 * (lo + hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(theta < 1e-8, 1.0, theta / np.sin(theta))
    return np.where(r > 0, r * ratio, 2.0 * np.sqrt(math.pi * z))


def is_conformal_symplectic(A, tolerance: float = 1e-9) -> Tuple[bool, float]:
    """A^T J A = a J for some a != 0; returns (flag, a)"""
    A = np.asarray(A, dtype=float)
    n = A.shape[0] // 2
    J = symplectic_matrix(n)
    pulled = A.T @ J @ A
    a = float(pulled[0, n])
    scale = max(1.0, float(np.linalg.norm(A, 2)) ** 2)
    residual = float(np.max(np.abs(pulled - a * J)))
    return (residual <= tolerance * scale and abs(a) > tolerance * scale), a


def hl_heisenberg(A) -> np.ndarray:
    """The H-linear map (x, xbar) -> (A x, a xbar) of a conformally symplectic A"""
    A = np.asarray(A, dtype=float)
    ok, a = is_conformal_symplectic(A)
    if not ok:
        raise InputError("Matrix is not conformally symplectic")
    M = np.zeros((A.shape[0] + 1, A.shape[0] + 1))
    M[:-1, :-1] = A
    M[-1, -1] = a
    return M


# --- lifts ----------------------------------------------------------------


def lift_planar_curve(curve: SampledCurve, xbar0: float = 0.0) -> SampledCurve:
    """
    Horizontal lift: xbar(t) = xbar0 + 1/2 int omega(c, dc).

    On the linear interpolation each segment contributes omega(c_k, c_{k+1}) / 2 exactly;
    ``quadrature_error`` compares against the half-resolution sum.
    """
    c = curve.points
    if c.shape[1] % 2:
        raise InputError("Planar curve must have even dimension")
    increments = 0.5 * omega(c[:-1], c[1:])
    xbar = xbar0 + np.concatenate([[0.0], np.cumsum(increments)])
    coarse = c[::2]
    coarse_total = 0.5 * float(np.sum(omega(coarse[:-1], coarse[1:])))
    fine_total = float(np.sum(increments[: 2 * (coarse.shape[0] - 1)]))
    diagnostics = {
        "quadrature_error": abs(fine_total - coarse_total) / 3.0,
        "area_change": float(xbar[-1] - xbar0),
    }
    return SampledCurve(times=curve.times, points=np.column_stack([c, xbar]), diagnostics=diagnostics)


def _polygon_action(nodes: np.ndarray, images: np.ndarray) -> np.ndarray:
    """
    int_gamma (phi^* lambda - lambda) along polygonal paths, Richardson-combined from
    all nodes and every other node. ``nodes`` and ``images`` have shape (..., L, 2n), L odd.
    """

    def chords(P):
        return 0.5 * np.sum(omega(P[..., :-1, :], P[..., 1:, :]), axis=-1)

    fine = chords(images) - chords(nodes)
    coarse = chords(images[..., ::2, :]) - chords(nodes[..., ::2, :])
    return (4.0 * fine - coarse) / 3.0


def axis_paths(base: np.ndarray, X: np.ndarray, nodes: int) -> np.ndarray:
    """L-shaped paths from base to each row of X, moving one coordinate at a time"""
    X = np.atleast_2d(X)
    k, d = X.shape
    t = np.linspace(0.0, 1.0, nodes + 1)[1:]
    current = np.broadcast_to(base, (k, d)).copy()
    legs = [current[:, None, :].copy()]
    for j in range(d):
        leg = np.repeat(current[:, None, :], nodes, axis=1)
        leg[:, :, j] = current[:, j, None] + t[None, :] * (X[:, j] - current[:, j])[:, None]
        legs.append(leg)
        current[:, j] = X[:, j]
    return np.concatenate(legs, axis=1)


def segment_paths(base: np.ndarray, X: np.ndarray, nodes: int) -> np.ndarray:
    X = np.atleast_2d(X)
    t = np.linspace(0.0, 1.0, 2 * nodes + 1)
    return base[None, None, :] + t[None, :, None] * (X - base)[:, None, :]


def square_loops(points: np.ndarray, size: float, nodes: int) -> np.ndarray:
    """Closed squares of side ``size`` at each point, one per coordinate plane (a < b)"""
    points = np.atleast_2d(points)
    d = points.shape[1]
    t = np.linspace(0.0, 1.0, nodes + 1)[1:, None]
    loops = []
    for a in range(d):
        for b in range(a + 1, d):
            ea, eb = np.eye(d)[a] * size, np.eye(d)[b] * size
            for p in points:
                corners = [p, p + ea, p + ea + eb, p + eb, p]
                sides = [corners[i] + t * (corners[i + 1] - corners[i]) for i in range(4)]
                loops.append(np.vstack([p[None, :]] + sides))
    return np.stack(loops)


class LiftedMap:
    """
    (x, xbar) -> (phi(x), xbar + F(x)) with dF = phi^* lambda - lambda.

    ``primitive`` overrides the line-integral reconstruction of F (for flows the
    action integral along trajectories is cheaper); ``inverse_phi`` overrides the
    Newton inversion.
    """

    def __init__(
        self,
        phi: PlanarMap,
        n: int,
        a: float = 0.0,
        base_point: Optional[np.ndarray] = None,
        nodes: Optional[int] = None,
        path: str = "axis",
        primitive: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        inverse_phi: Optional[PlanarMap] = None,
    ):
        if path not in ("axis", "segment"):
            raise InputError(f"Unknown path strategy '{path}'")
        self.phi = phi
        self.n = n
        self.a = float(a)
        self.base_point = np.zeros(2 * n) if base_point is None else np.asarray(base_point, dtype=float)
        self.nodes = settings.path_nodes if nodes is None else nodes
        if self.nodes % 2:
            self.nodes += 1
        self.path = path
        self._primitive = primitive
        self._inverse_phi = inverse_phi
        self.loop_residual = 0.0

    def primitive(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._primitive is not None:
            return self.a + np.asarray(self._primitive(X), dtype=float)
        builder = axis_paths if self.path == "axis" else segment_paths
        paths = builder(self.base_point, X, self.nodes)
        images = self.phi(paths.reshape(-1, 2 * self.n)).reshape(paths.shape)
        return self.a + _polygon_action(paths, images)

    def __call__(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        X = P[:, :-1]
        return np.column_stack([self.phi(X), P[:, -1] + self.primitive(X)])

    def inverse_phi(self, Y, max_iterations: int = 50, tolerance: float = 1e-12) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self._inverse_phi is not None:
            return self._inverse_phi(Y)
        X = Y.copy()
        d = 2 * self.n
        for _ in range(max_iterations):
            R = self.phi(X) - Y
            if np.max(np.abs(R), initial=0.0) <= tolerance:
                break
            h = 1e-7
            jac = np.stack(
                [(self.phi(X + h * e) - self.phi(X - h * e)) / (2 * h) for e in np.eye(d)], axis=2
            )
            X = X - np.linalg.solve(jac, R[..., None])[..., 0]
        return X

    def inverse(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        X = self.inverse_phi(P[:, :-1])
        return np.column_stack([X, P[:, -1] - self.primitive(X)])

    def jacobian(self, p, h: float = 1e-5) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        d = p.size
        shifts = np.eye(d) * h
        plus = self(p + shifts)
        minus = self(p - shifts)
        return ((plus - minus) / (2 * h)).T

    def compose(self, other: "LiftedMap") -> "LiftedMap":
        """self after other; F adds along the composition"""

        def phi(X):
            return self.phi(other.phi(X))

        def primitive(X):
            return other.primitive(X) + self.primitive(other.phi(X)) - self.a - other.a

        return LiftedMap(phi, self.n, a=self.a + other.a, primitive=primitive)

    @classmethod
    def from_flow(cls, H: HamiltonianSpec, T: float = 1.0, steps: Optional[int] = None, a: float = 0.0):
        """Lift of the time-T map with F given by the action along trajectories"""
        require_compact_support(H)
        return cls(
            time_one_map(H, T, steps),
            H.n,
            a=a,
            primitive=lambda X: generating_function_along_flow(H, X, T, steps),
            inverse_phi=time_one_map(H, T, steps, backward=True),
        )


def loop_residual(
    phi: PlanarMap,
    n: int,
    probes: np.ndarray,
    size: Optional[float] = None,
    nodes: Optional[int] = None,
) -> float:
    """max |loop integral of phi^* lambda - lambda| over small coordinate squares at the probes"""
    size = settings.loop_size if size is None else size
    nodes = settings.path_nodes if nodes is None else nodes
    loops = square_loops(probes, size, nodes + nodes % 2)
    images = phi(loops.reshape(-1, 2 * n)).reshape(loops.shape)
    return float(np.max(np.abs(_polygon_action(loops, images))))


def lift_symplectomorphism(
    phi: PlanarMap,
    n: int,
    a: float = 0.0,
    base_point: Optional[np.ndarray] = None,
    path: str = "axis",
    probes: Optional[np.ndarray] = None,
    tolerance: Optional[float] = None,
    nodes: Optional[int] = None,
    seed: Optional[int] = None,
) -> LiftedMap:
    """
    Lift phi to a volume preserving map of H(n), F(base_point) = a.

    Without explicit ``probes`` the loop test uses the base point and three points drawn from ``seed``.

    Raises:
        NotSymplecticError: If the loop integrals on the probe squares exceed ``tolerance``
    """
    tolerance = settings.loop_tolerance if tolerance is None else tolerance
    lifted = LiftedMap(phi, n, a=a, base_point=base_point, nodes=nodes, path=path)
    if probes is None:
        rng = np.random.default_rng(settings.seed if seed is None else seed)
        probes = np.vstack([lifted.base_point, rng.uniform(-1.0, 1.0, size=(3, 2 * n))])
    residual = loop_residual(phi, n, probes, nodes=nodes)
    lifted.loop_residual = residual
    if not np.isfinite(residual) or residual > tolerance:
        raise NotSymplecticError(residual, tolerance)
    logger.info(f"Lifted symplectomorphism, loop residual {residual:.2e}")
    return lifted


def pansu_derivative_closed_form(ftilde: Callable[[np.ndarray], np.ndarray], p, h: float = 1e-5) -> np.ndarray:
    """
    Differential of a smooth map of H(n) in left-invariant frames at p.

    Columns are the images of X_j = (e_j, omega(x, e_j)/2) and Z = (0, 1); rows are
    horizontal coordinates followed by the left-invariant vertical component at f(p).
    For a contact map the last row and column reduce to (0, ..., 0, a).
    """
    p = p.as_array() if isinstance(p, HPoint) else np.asarray(p, dtype=float)
    d = p.size - 1
    x = p[:-1]
    frame = np.zeros((d + 1, d + 1))
    frame[:d, :d] = np.eye(d)
    frame[d, :d] = 0.5 * omega(x[None, :], np.eye(d))
    frame[d, d] = 1.0
    q = np.atleast_2d(ftilde(p[None, :]))[0]
    plus = np.atleast_2d(ftilde(p[None, :] + h * frame.T))
    minus = np.atleast_2d(ftilde(p[None, :] - h * frame.T))
    images = (plus - minus) / (2 * h)
    horizontal = images[:, :d]
    vertical = images[:, d] - 0.5 * omega(q[None, :d], horizontal)
    return np.column_stack([horizontal, vertical]).T


# --- Hamiltonian flows ----------------------------------------------------


def _vector_field(H: HamiltonianSpec, t: float, X: np.ndarray) -> np.ndarray:
    return H.gradient(t, X) @ symplectic_matrix(H.n).T


def _action_density(H: HamiltonianSpec, t: float, X: np.ndarray) -> np.ndarray:
    """H + lambda(X_H) = H - x . grad H / 2"""
    return H.value(t, X) - 0.5 * np.sum(X * H.gradient(t, X), axis=1)


def _lift_density(H: HamiltonianSpec, t: float, X: np.ndarray) -> np.ndarray:
    """omega(x, X_H) / 2"""
    return -0.5 * np.sum(X * H.gradient(t, X), axis=1)


def integrate_flow(
    H: HamiltonianSpec,
    X0,
    T: float = 1.0,
    steps: Optional[int] = None,
    t0: float = 0.0,
    integrand: Optional[Callable] = None,
    keep: bool = True,
):
    """
    Classical RK4 for x' = J grad H(t, x), batched over the rows of X0.

    Returns (times, trajectory, accumulated integrand); trajectory has shape
    (steps + 1, k, 2n) when ``keep`` and (k, 2n) otherwise.

    Raises:
        IntegrationError: On non-finite states
    """
    steps = settings.flow_steps if steps is None else steps
    if steps < 1:
        raise InputError("steps must be >= 1")
    X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    k = X.shape[0]
    dt = T / steps
    times = t0 + dt * np.arange(steps + 1)
    trajectory = [X] if keep else None
    acc = np.zeros(k)
    accumulated = [acc] if keep else None

    def g(t, Y):
        return integrand(H, t, Y) if integrand is not None else np.zeros(Y.shape[0])

    for i in range(steps):
        t = times[i]
        k1 = _vector_field(H, t, X)
        X2 = X + 0.5 * dt * k1
        k2 = _vector_field(H, t + 0.5 * dt, X2)
        X3 = X + 0.5 * dt * k2
        k3 = _vector_field(H, t + 0.5 * dt, X3)
        X4 = X + dt * k3
        k4 = _vector_field(H, t + dt, X4)
        if integrand is not None:
            acc = acc + dt / 6.0 * (g(t, X) + 2 * g(t + 0.5 * dt, X2) + 2 * g(t + 0.5 * dt, X3) + g(t + dt, X4))
        X = X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise IntegrationError(float(t))
        if keep:
            trajectory.append(X)
            accumulated.append(acc)
    if keep:
        return times, np.stack(trajectory), np.stack(accumulated)
    return times, X, acc


def require_compact_support(H: HamiltonianSpec, tolerance: Optional[float] = None, seed: Optional[int] = None) -> None:
    """
    Reject a compactly supported kind whose values leak outside the declared ball.

    Raises:
        InputError: If |H| sampled outside the support exceeds ``tolerance``
    """
    if not H.has_compact_support:
        return
    tolerance = settings.support_tolerance if tolerance is None else tolerance
    seed = settings.seed if seed is None else seed
    leak = H.check_support(np.random.default_rng(seed))
    if not np.isfinite(leak) or leak > tolerance:
        raise InputError(
            f"Hamiltonian reaches |H| = {leak:.3e} outside its support ball of radius {H.support_radius:g}"
        )


def hamiltonian_flow(H: HamiltonianSpec, x0, T: float = 1.0, steps: Optional[int] = None) -> SampledCurve:
    require_compact_support(H)
    times, trajectory, _ = integrate_flow(H, x0, T, steps)
    points = trajectory[:, 0, :]
    diagnostics = {}
    if H.modulation == 0.0 and H.kind != HamiltonianKind.CUSTOM:
        energy = H.value(0.0, points)
        diagnostics["energy_drift"] = float(np.max(np.abs(energy - energy[0])))
    return SampledCurve(times=times, points=points, diagnostics=diagnostics)


def time_one_map(
    H: HamiltonianSpec, T: float = 1.0, steps: Optional[int] = None, backward: bool = False
) -> PlanarMap:
    """x -> phi_T(x), or its inverse when ``backward``"""

    def phi(X):
        if backward:
            _, end, _ = integrate_flow(H, X, -T, steps, t0=T, keep=False)
        else:
            _, end, _ = integrate_flow(H, X, T, steps, keep=False)
        return end

    return phi


def generating_function_along_flow(H: HamiltonianSpec, X, T: float = 1.0, steps: Optional[int] = None) -> np.ndarray:
    """F_T(x) = int_0^T (H + lambda(X_H))(t, phi_t x) dt, zero outside the support"""
    _, _, action = integrate_flow(H, X, T, steps, integrand=_action_density, keep=False)
    return action


def _outside_support(H: HamiltonianSpec) -> np.ndarray:
    if not H.has_compact_support:
        return np.zeros(2 * H.n)
    return H.center_array + 2.0 * H.support_radius * np.eye(2 * H.n)[0]


def vertical_flow_check(
    H: HamiltonianSpec,
    x0,
    T: float = 1.0,
    steps: Optional[int] = None,
    nodes: Optional[int] = None,
) -> float:
    """
    max_t |d/dt v(t) + H(t, phi_t x0) - (H + lambda(X_H))(t, phi_t b)| where v is the
    vertical part of (lift of phi_t)^-1 applied to the horizontal lift of the trajectory
    through (x0, 0), and b is the base point of the primitive.

    With b outside the support the last term vanishes and v' = -H along the trajectory.
    """
    steps = settings.flow_steps if steps is None else steps
    nodes = settings.path_nodes if nodes is None else nodes
    nodes += nodes % 2
    x0 = np.asarray(x0, dtype=float)
    base = _outside_support(H)
    paths = axis_paths(base, x0[None, :], nodes)[0]
    points = np.vstack([x0[None, :], base[None, :], paths])
    times, trajectory, lifted = integrate_flow(H, points, T, steps, integrand=_lift_density)

    primitive = _polygon_action(paths[None, :, :], trajectory[:, 2:, :])
    vertical = lifted[:, 0] - primitive
    dt = times[1] - times[0]
    derivative = (vertical[2:] - vertical[:-2]) / (2 * dt)
    inner = range(1, len(times) - 1)
    expected = np.array(
        [
            -H.value(times[j], trajectory[j, 0:1])[0] + _action_density(H, times[j], trajectory[j, 1:2])[0]
            for j in inner
        ]
    )
    residual = float(np.max(np.abs(derivative - expected), initial=0.0))
    logger.info(f"Vertical flow residual {residual:.3e} over {steps} steps")
    return residual


# --- Hofer length and the lower bound ----------------------------------------


def _grid(H: HamiltonianSpec, points_per_axis: int) -> Tuple[np.ndarray, float]:
    d = 2 * H.n
    per_axis = max(3, min(points_per_axis, int(1e6 ** (1.0 / d))))
    center, radius = H.center_array, H.support_radius
    axes = [np.linspace(c - radius, c + radius, per_axis) for c in center]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return mesh, 2.0 * radius / (per_axis - 1)


def hofer_length(
    H: HamiltonianSpec,
    domain_sampler: Optional[Callable[[], np.ndarray]] = None,
    grid: Optional[int] = None,
    times: Optional[int] = None,
) -> HoferLength:
    """int_0^1 max_x |H(t, x)| dt (trapezoid in t, max over a deterministic grid or the sampler's points)"""
    grid = settings.hofer_grid if grid is None else grid
    times = settings.hofer_times if times is None else times
    if domain_sampler is not None:
        points = np.atleast_2d(domain_sampler())
        spacing = float("nan")
    elif H.has_compact_support:
        points, spacing = _grid(H, grid)
    else:
        raise InputError("Hofer length of a non-compact Hamiltonian needs a domain sampler")
    require_compact_support(H)
    ts = np.linspace(0.0, 1.0, times)
    sup = np.array([np.max(np.abs(H.value(t, points))) for t in ts])
    value = float(trapezoid(sup, ts))
    return HoferLength(value=value, grid_points=int(points.shape[0]), grid_spacing=spacing, times=times)


def _ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** (d / 2) / float(gamma(d / 2 + 1)) * radius**d


def _uniform_ball(rng: np.random.Generator, count: int, d: int, center, radius: float) -> np.ndarray:
    directions = rng.normal(size=(count, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=count) ** (1.0 / d)
    return np.asarray(center, dtype=float) + directions * radii[:, None]


@lru_cache(maxsize=16)
def ball_ratio_estimate(n: int, samples: Optional[int] = None, seed: int = 0) -> Tuple[float, float]:
    """vol(B_CC(0,1)) / vol(B_E(0,1)) in H(n), with its Monte Carlo standard error"""
    samples = settings.ball_ratio_samples if samples is None else samples
    rng = np.random.default_rng(seed)
    d = 2 * n
    height = 1.0 / (4.0 * math.pi)
    X = _uniform_ball(rng, samples, d, np.zeros(d), 1.0)
    Z = rng.uniform(-height, height, size=samples)
    inside = cc_norm_exact(X, Z) <= 1.0
    p = float(np.mean(inside))
    enclosing = _ball_volume(d) * 2.0 * height
    euclidean = _ball_volume(d + 1)
    ratio = enclosing * p / euclidean
    stderr = enclosing * math.sqrt(p * (1 - p) / samples) / euclidean
    logger.info(f"Ball ratio for H({n}): {ratio:.5f} +- {stderr:.1e}")
    return ratio, stderr


def hofer_lower_bound_check(
    H: HamiltonianSpec,
    region_center: Optional[Sequence[float]] = None,
    region_radius: float = 1.0,
    samples: Optional[int] = None,
    steps: Optional[int] = None,
    seed: Optional[int] = None,
    tolerance: float = 1e-9,
) -> HoferCheck:
    """
    C V(phi, A) <= vol(A) * hofer_length(H) for the time-one map of H and a ball A.

    V(phi, A) = min_c int_A |F - c| is attained at the median of F.

    Raises:
        InputError: If the support of H is not inside A
    """
    samples = settings.invariant_samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    d = 2 * H.n
    center = np.zeros(d) if region_center is None else np.asarray(region_center, dtype=float)
    if not H.has_compact_support:
        raise InputError("Hofer check needs a compactly supported Hamiltonian")
    if float(np.linalg.norm(H.center_array - center)) + H.support_radius > region_radius * (1 + 1e-12):
        raise InputError("Hamiltonian support is not contained in the region A")
    require_compact_support(H, seed=seed)

    rng = np.random.default_rng(seed)
    X = _uniform_ball(rng, samples, d, center, region_radius)
    F = generating_function_along_flow(H, X, 1.0, steps)
    volume = _ball_volume(d, region_radius)
    oscillation = volume * float(np.mean(np.abs(F - np.median(F))))
    ratio, ratio_stderr = ball_ratio_estimate(H.n)
    length = hofer_length(H).value
    lhs = ratio * oscillation
    rhs = volume * length
    passed = lhs <= rhs + tolerance
    logger.info(f"Hofer check: lhs={lhs:.5g}, rhs={rhs:.5g}, passed={passed}")
    return HoferCheck(
        lhs=lhs,
        rhs=rhs,
        ball_ratio=ratio,
        ball_ratio_stderr=ratio_stderr,
        oscillation=oscillation,
        hofer_length=length,
        region_volume=volume,
        passed=passed,
    )


# --- regions and invariants -------------------------------------------------


class CylinderRegion:
    """Ball(center, radius) x [bottom, top]"""

    def __init__(self, center, radius: float, bottom: float, top: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.bottom = float(bottom)
        self.top = float(top)

    def contains(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        inside = np.linalg.norm(np.atleast_2d(X) - self.center, axis=1) <= self.radius
        return inside[:, None] & (Z >= self.bottom) & (Z <= self.top)

    def horizontal_bounds(self):
        return self.center - self.radius, self.center + self.radius

    def vertical_bounds(self):
        return self.bottom, self.top


class MembershipRegion:
    """Region given by a membership oracle contains(X, Z) and a bounding box"""

    def __init__(self, contains, lower: Sequence[float], upper: Sequence[float]):
        self._contains = contains
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)

    def contains(self, X, Z):
        return np.asarray(self._contains(np.atleast_2d(X), Z), dtype=bool)

    def horizontal_bounds(self):
        return self.lower[:-1], self.upper[:-1]

    def vertical_bounds(self):
        return float(self.lower[-1]), float(self.upper[-1])


class ImageRegion:
    """phi_tilde(source): (y, ybar) belongs iff (phi^-1 y, ybar - F(phi^-1 y)) is in the source"""

    def __init__(self, source, lifted: LiftedMap, probes: int = 2000, seed: int = 0):
        self.source = source
        self.lifted = lifted
        lo, hi = source.horizontal_bounds()
        zlo, zhi = source.vertical_bounds()
        rng = np.random.default_rng(seed)
        X = rng.uniform(lo, hi, size=(probes, lo.size))
        Z = np.linspace(zlo, zhi, 32)
        keep = source.contains(X, np.broadcast_to(Z, (probes, Z.size))).any(axis=1)
        X = X[keep]
        Y = lifted.phi(X)
        F = lifted.primitive(X)
        pad = 0.1 * (Y.max(axis=0) - Y.min(axis=0)) + 1e-9
        self._lower = Y.min(axis=0) - pad
        self._upper = Y.max(axis=0) + pad
        vpad = 0.1 * (zhi - zlo + F.max() - F.min())
        self._vertical = (zlo + F.min() - vpad, zhi + F.max() + vpad)

    def contains(self, Y, Z):
        Y = np.atleast_2d(Y)
        X = self.lifted.inverse_phi(Y)
        F = self.lifted.primitive(X)
        return self.source.contains(X, np.asarray(Z) - F[:, None])

    def horizontal_bounds(self):
        return self._lower, self._upper

    def vertical_bounds(self):
        return self._vertical


def _invariants_from(lengths: np.ndarray, box_volume: float, orders: Sequence[int]):
    projected = box_volume * float(np.mean(lengths > 0))
    volume = box_volume * float(np.mean(lengths))
    if projected <= 0:
        return None
    width = volume / projected
    heights = [
        (box_volume * float(np.mean(lengths ** (1.0 / i))) / projected**i) ** (1.0 / i) for i in orders
    ]
    return volume, projected, width, heights


def invariants_width_heights(
    region,
    orders: Sequence[int] = (1, 2),
    samples: Optional[int] = None,
    resolution: Optional[int] = None,
    seed: Optional[int] = None,
    batches: int = 20,
    chunk: int = 500,
) -> Invariants:
    """
    Monte Carlo width w = vol / vol(A) and i-heights
    h_i^i = vol(A)^-i int_A l(x)^(1/i) dx, with l(x) the vertical fiber length.

    Raises:
        UndefinedInvariantError: If no sample has a nonempty fiber
    """
    samples = settings.invariant_samples if samples is None else samples
    resolution = settings.fiber_resolution if resolution is None else resolution
    seed = settings.seed if seed is None else seed
    if any(i < 1 for i in orders):
        raise InputError("Height orders must be >= 1")

    lo, hi = region.horizontal_bounds()
    zlo, zhi = region.vertical_bounds()
    dz = (zhi - zlo) / resolution
    Z = zlo + dz * (np.arange(resolution) + 0.5)
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(samples, np.size(lo)))
    lengths = np.concatenate(
        [
            region.contains(X[s : s + chunk], np.broadcast_to(Z, (X[s : s + chunk].shape[0], resolution))).sum(axis=1)
            * dz
            for s in range(0, samples, chunk)
        ]
    )
    box_volume = float(np.prod(np.asarray(hi) - np.asarray(lo)))
    overall = _invariants_from(lengths, box_volume, orders)
    if overall is None:
        raise UndefinedInvariantError("Region has zero projected volume")
    volume, projected, width, heights = overall

    per_batch = [_invariants_from(part, box_volume, orders) for part in np.array_split(lengths, batches)]
    per_batch = [b for b in per_batch if b is not None]
    scale = 1.0 / math.sqrt(max(len(per_batch), 1))
    width_stderr = float(np.std([b[2] for b in per_batch], ddof=1)) * scale if len(per_batch) > 1 else 0.0
    height_stderrs = [
        float(np.std([b[3][j] for b in per_batch], ddof=1)) * scale if len(per_batch) > 1 else 0.0
        for j in range(len(orders))
    ]
    logger.info(f"Invariants: w={width:.5f} +- {width_stderr:.1e}, vol(A)={projected:.5f}")
    return Invariants(
        width=width,
        width_stderr=width_stderr,
        heights=heights,
        height_stderrs=height_stderrs,
        h_inf=float(lengths.max()),
        volume=volume,
        projected_volume=projected,
    )
