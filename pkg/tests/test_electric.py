"""Field, truncation, window-energy, and anisotropy tests.

The anisotropy oracle below is a second partition-of-unity integrator,
parameterized differently on purpose: cubic blending instead of quintic,
smaller patch radii, polar annuli around each charge plus a flat
Cartesian base mesh.  It shares no grid code with the production routine,
so agreement is evidence rather than repetition.
"""

import math

import numpy as np
import pytest

from coulombgas.electric import (
    anisotropy_A,
    anisotropy_ani,
    electric_energy,
    nearest_neighbor_radii,
    points_count,
    transport_field,
    truncated_field_at,
)
from coulombgas.measures import make_measure
from coulombgas.testfunctions import TestFunction

PINNED = np.array([[0.25, 0.1], [-0.3, 0.2], [0.1, -0.35], [-0.1, -0.05]])


@pytest.fixture(scope="module")
def uniform():
    return make_measure("uniform")


# ---------------------------------------------------------------- radii


def test_radii_two_unit_separated_points(uniform):
    r = nearest_neighbor_radii(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert np.allclose(r, math.sqrt(2.0) / 8.0, rtol=1e-15)


def test_radii_near_coincident_pair():
    r = nearest_neighbor_radii(np.array([[0.0, 0.0], [1e-6, 0.0]]))
    assert np.allclose(r, 2.5e-7, rtol=1e-15)


def test_radii_match_brute_force():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.0, 1.0, size=(100, 2))
    r = nearest_neighbor_radii(pts)
    n = len(pts)
    for i in range(n):
        nn = min(math.hypot(*(pts[i] - pts[j])) for j in range(n) if j != i)
        assert r[i] == pytest.approx(0.25 * min(n ** -0.5, nn), rel=1e-14)


def test_radii_rejects_degenerate_input():
    with pytest.raises(ValueError):
        nearest_neighbor_radii(np.array([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        nearest_neighbor_radii(np.array([[0.1, 0.2], [0.1, 0.2], [0.5, 0.5]]))


# ---------------------------------------------------------------- fields


def test_single_charge_probe_closed_form(uniform):
    # one charge at the origin, probe inside the support
    E = truncated_field_at(np.array([[0.0, 0.0]]), uniform, None,
                           np.array([[0.5, 0.0]]))
    assert np.allclose(E, [[-1.5, 0.0]], atol=1e-14)


def test_field_additive_in_charges(uniform):
    rng = np.random.default_rng(3)
    a = rng.uniform(-0.5, 0.5, size=(4, 2))
    b = rng.uniform(-0.5, 0.5, size=(3, 2))
    probes = rng.uniform(-0.9, 0.9, size=(20, 2))
    both = truncated_field_at(np.vstack([a, b]), uniform, None, probes)
    parts = (truncated_field_at(a, uniform, None, probes)
             + truncated_field_at(b, uniform, None, probes))
    assert np.allclose(both, parts, atol=1e-12)


def test_background_gradient_against_ray_quadrature(uniform):
    # independent route: integrate the field kernel along rays from the
    # probe to the support boundary; for a radial density the radial
    # integral of the kernel is m0 * ray length
    z = np.array([0.5, 0.0])
    theta = (np.arange(4096) + 0.5) * (2.0 * math.pi / 4096)
    e = np.column_stack([np.cos(theta), np.sin(theta)])
    proj = -z @ e.T
    ray = proj + np.sqrt(np.maximum(proj ** 2 + 1.0 - z @ z, 0.0))
    m0 = 1.0 / math.pi
    grad_quad = (e * ray[:, None]).sum(axis=0) * m0 * (2.0 * math.pi / 4096)
    grad = uniform.potential_gradient(z[None, :])[0]
    assert np.allclose(grad, grad_quad, atol=1e-4)
    E = truncated_field_at(np.array([[0.0, 0.0]]), uniform, None, z[None, :])[0]
    assert np.allclose(E, [-2.0, 0.0] - grad_quad, atol=1e-4)


def test_truncation_changes_only_nearby_probe(uniform):
    pts = PINNED
    eta = np.full(4, 0.05)
    near = pts[0] + np.array([0.01, 0.0])
    far = np.array([0.6, 0.6])
    probes = np.vstack([near, far])
    full = truncated_field_at(pts, uniform, None, probes)
    trunc = truncated_field_at(pts, uniform, eta, probes)
    assert not np.allclose(full[0], trunc[0])
    assert np.allclose(full[1], trunc[1], atol=1e-15)


def test_truncation_hump_gradient_mass():
    # the local correction -log(|x|/eta) has gradient magnitude 1/|x| on
    # |x| < eta; its L1 mass is 2 pi eta, below the 7 eta budget
    eta = 0.3
    h = eta / 400.0
    ax = (np.arange(-420, 420) + 0.5) * h
    X, Y = np.meshgrid(ax, ax)
    r = np.hypot(X, Y)
    mass = float(np.sum((1.0 / r)[r < eta])) * h * h
    assert mass <= 7.0 * eta
    assert mass >= 5.0 * eta


# ------------------------------------------------------- window energy


def test_window_energy_positive_and_refusals(uniform):
    val, err = electric_energy(PINNED, uniform, (0.0, 0.0), 0.3)
    assert val > 0.0
    assert err >= 0.0
    assert electric_energy(PINNED, uniform, (0.0, 0.0), 0.0) == (0.0, 0.0)
    with pytest.raises(ValueError, match="support"):
        electric_energy(PINNED, uniform, (0.9, 0.0), 0.3)
    with pytest.raises(ValueError, match="resolution too coarse"):
        electric_energy(PINNED, uniform, (0.0, 0.0), 0.3, h=0.5)


def test_window_energy_refines_consistently(uniform):
    eta = nearest_neighbor_radii(PINNED)
    h = float(eta.min()) / 4.0
    v1, e1 = electric_energy(PINNED, uniform, (0.0, 0.0), 0.3, h=h)
    v2, e2 = electric_energy(PINNED, uniform, (0.0, 0.0), 0.3, h=h / 2.0)
    assert e2 < e1
    assert abs(v1 - v2) <= 2.0 * e1


def test_points_count_tie_rule():
    n = 4
    thresh = 0.1 + n ** -0.5
    pts = np.array([[thresh, 0.0],
                    [thresh + 1e-9, 0.0],
                    [0.05, 0.0],
                    [-2.0, 0.0]])
    assert points_count(pts, (0.0, 0.0), 0.1) == 2
    assert points_count(pts, (5.0, 5.0), 0.1) == 0
    assert points_count(pts, (0.0, 0.0), 10.0) == 4


# ----------------------------------------------------------- anisotropy


class _StubField:
    """Minimal field interface for anisotropy routines."""

    def __init__(self, center, radius, matrix_fn, div_fn):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self._matrix_fn = matrix_fn
        self._div_fn = div_fn

    def anisotropy_matrix(self, pts):
        return self._matrix_fn(np.atleast_2d(pts))

    def divergence(self, pts):
        return self._div_fn(np.atleast_2d(pts))


def test_linear_field_annihilates(uniform):
    # psi(x) = x has 2 Dpsi - div psi I = 0, so Ani vanishes identically
    # while the divergence correction survives in A
    stub = _StubField((0.0, 0.0), 0.5,
                      lambda p: np.zeros((len(p), 2, 2)),
                      lambda p: np.full(len(p), 2.0))
    res = anisotropy_ani(PINNED, uniform, stub)
    assert res.value == 0.0
    assert res.converged
    shifted = anisotropy_A(PINNED, uniform, stub)
    assert shifted.value == pytest.approx(0.25 * 2.0 * len(PINNED), abs=1e-15)


def test_divergence_free_field_A_equals_ani(uniform):
    # rotated gradient of a bump: divergence-free but anisotropic
    chi = TestFunction(radius=0.5)

    def matrix(pts):
        H = chi.hessian(pts)
        D = np.empty_like(H)
        D[:, 0, 0] = -H[:, 1, 0]
        D[:, 0, 1] = -H[:, 1, 1]
        D[:, 1, 0] = H[:, 0, 0]
        D[:, 1, 1] = H[:, 0, 1]
        return 2.0 * D

    stub = _StubField((0.0, 0.0), 0.5, matrix,
                      lambda p: np.zeros(len(p)))
    ani = anisotropy_ani(PINNED, uniform, stub)
    shifted = anisotropy_A(PINNED, uniform, stub)
    assert shifted.value == ani.value
    assert np.isfinite(ani.value)


def test_anisotropy_matrix_is_trace_free(uniform):
    phi = TestFunction(radius=0.8)
    psi = transport_field(phi, uniform)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.2, 1.2, size=(64, 2))
    M = psi.anisotropy_matrix(pts)
    assert np.allclose(M[:, 0, 0] + M[:, 1, 1], 0.0, atol=1e-12)
    outside = np.hypot(pts[:, 0], pts[:, 1]) >= 0.8
    assert np.all(M[outside] == 0.0)


def test_ladder_is_cauchy(uniform):
    phi = TestFunction(radius=0.8)
    psi = transport_field(phi, uniform)
    rng = np.random.default_rng(17)
    pts = rng.uniform(-0.55, 0.55, size=(12, 2))
    res = anisotropy_ani(pts, uniform, psi)
    v = np.asarray(res.ladder_values)
    assert abs(v[2] - v[1]) <= 1.05 * abs(v[1] - v[0]) + 1e-9


def test_A_shift_is_quarter_divergence_sum(uniform):
    phi = TestFunction(radius=0.8)
    psi = transport_field(phi, uniform)
    ani = anisotropy_ani(PINNED, uniform, psi)
    shifted = anisotropy_A(PINNED, uniform, psi)
    corr = 0.25 * float(np.sum(psi.divergence(PINNED)))
    assert shifted.value == pytest.approx(ani.value + corr, rel=1e-12)


# ------------------------------------------------- independent oracle


def _direct_field(points, measure, z, skip=None, eta=0.0):
    """Plain O(N) sum at probes z; charge `skip` omitted, others live
    whenever their distance exceeds eta."""
    z = np.atleast_2d(z)
    n = len(points)
    E = np.zeros_like(z)
    for j in range(n):
        if j == skip:
            continue
        d0 = z[:, 0] - points[j, 0]
        d1 = z[:, 1] - points[j, 1]
        r2 = d0 * d0 + d1 * d1
        live = r2 >= eta * eta
        E[:, 0] -= np.where(live, d0 / np.maximum(r2, 1e-300), 0.0)
        E[:, 1] -= np.where(live, d1 / np.maximum(r2, 1e-300), 0.0)
    return E - n * measure.potential_gradient(z)


def _cubic_blend(d, core, edge):
    # 1 below core, 0 above edge, cubic in between
    s = np.clip((edge - d) / (edge - core), 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _quadratic_form(E, M):
    return (M[:, 0, 0] * E[:, 0] ** 2
            + 2.0 * M[:, 0, 1] * E[:, 0] * E[:, 1]
            + M[:, 1, 1] * E[:, 1] ** 2)


def _oracle_ani_ladder(points, measure, phi, etas):
    """Dense reference values of the truncated anisotropy integral."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    nn = np.array([min(math.hypot(*(pts[i] - pts[j]))
                       for j in range(n) if j != i) for i in range(n)])
    b = 1.6 * 0.25 * np.minimum(n ** -0.5, nn)

    def matrix_at(z):
        H = phi.hessian(z)
        lap = phi.laplacian(z)
        M = 2.0 * H
        M[:, 0, 0] -= lap
        M[:, 1, 1] -= lap
        return M * math.pi  # uniform density: psi = pi grad phi

    # base mesh is eta independent except through the blend cores
    R = phi.radius * 1.01
    h = 0.004
    m = int(math.ceil(2.0 * R / h))
    ax = phi.center[0] - R + (np.arange(m) + 0.5) * h
    ay = phi.center[1] - R + (np.arange(m) + 0.5) * h
    X, Y = np.meshgrid(ax, ay)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    d_all = np.stack([np.hypot(nodes[:, 0] - p[0], nodes[:, 1] - p[1])
                      for p in pts], axis=1)
    nearest = np.argmin(d_all, axis=1)
    d_near = d_all[np.arange(len(nodes)), nearest]

    out = []
    for eta in etas:
        core = np.maximum(0.55 * b, 1.05 * eta)
        w = 1.0 - _cubic_blend(d_near, core[nearest], b[nearest])
        keep = w > 1e-14
        zz = nodes[keep]
        E = _direct_field(pts, measure, zz)
        total = float(np.sum(_quadratic_form(E, matrix_at(zz)) * w[keep])) * h * h

        for i in range(n):
            # radial panels: smooth interior disk, then annuli out to b
            bounds = [0.0, eta / 3.0, 2.0 * eta / 3.0, eta]
            lo = eta
            while lo < b[i]:
                hi = min(lo * 1.3, b[i])
                if core[i] > lo and core[i] < hi:
                    bounds.append(core[i])
                bounds.append(hi)
                lo = hi
            bounds = sorted(set(bounds))
            n_t = 192
            tt = (np.arange(n_t) + 0.5) * (2.0 * math.pi / n_t)
            ct, st = np.cos(tt), np.sin(tt)
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                gl_x, gl_w = np.polynomial.legendre.leggauss(8)
                rr = 0.5 * (hi - lo) * gl_x + 0.5 * (hi + lo)
                wr = 0.5 * (hi - lo) * gl_w
                zx = pts[i, 0] + rr[:, None] * ct[None, :]
                zy = pts[i, 1] + rr[:, None] * st[None, :]
                zz = np.column_stack([zx.ravel(), zy.ravel()])
                if hi <= eta:
                    E = _direct_field(pts, measure, zz, skip=i)
                else:
                    E = _direct_field(pts, measure, zz)
                q = _quadratic_form(E, matrix_at(zz)).reshape(len(rr), n_t)
                chi = _cubic_blend(rr, core[i], b[i])
                total += float(np.dot(wr * rr * chi, q.sum(axis=1))) \
                    * (2.0 * math.pi / n_t)
        out.append(total / (4.0 * math.pi))
    return out


@pytest.mark.slow
def test_anisotropy_against_independent_quadrature(uniform):
    phi = TestFunction(radius=0.8)
    psi = transport_field(phi, uniform)
    res = anisotropy_ani(PINNED, uniform, psi)
    assert res.converged
    etas = list(res.eta_ladder)
    ref = _oracle_ani_ladder(PINNED, uniform, phi, etas)
    for got, want in zip(res.ladder_values, ref):
        assert got == pytest.approx(want, rel=1e-2)
    # both routes extrapolate to the same limit
    r1, r2 = ref[1] - ref[0], ref[2] - ref[1]
    p = math.log2(abs(r1) / abs(r2))
    ref_limit = ref[2] + r2 / (2.0 ** p - 1.0)
    assert res.value == pytest.approx(ref_limit, rel=1e-2)
