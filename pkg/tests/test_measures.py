import numpy as np
import pytest
from numpy.testing import assert_allclose

from coulombgas.measures import (
    make_measure, UniformDisk, QuadraticDisk, ConfiningPotential,
)

import oracles


@pytest.fixture(scope="module")
def uniform():
    return UniformDisk()


@pytest.fixture(scope="module")
def quadratic():
    return QuadraticDisk()


class TestUniformDisk:
    def test_mass(self, uniform):
        assert_allclose(uniform.mass(), 1.0, atol=1e-12)

    def test_potential_values(self, uniform):
        # center: 1/2; boundary: 0; outside at |z| = 2: -log 2
        assert_allclose(uniform.log_potential(np.array([0.0, 0.0])), 0.5, atol=1e-15)
        assert_allclose(uniform.log_potential(np.array([1.0, 0.0])), 0.0, atol=1e-15)
        assert_allclose(uniform.log_potential(np.array([2.0, 0.0])), -np.log(2.0), atol=1e-15)

    def test_potential_continuous_at_boundary(self, uniform):
        inside = uniform.log_potential(np.array([1.0 - 1e-9, 0.0]))
        outside = uniform.log_potential(np.array([1.0 + 1e-9, 0.0]))
        assert abs(inside - outside) < 1e-8

    def test_self_energy(self, uniform):
        assert uniform.self_energy == 0.25
        quad = oracles.radial_self_energy(oracles.uniform_rho, 1.0)
        assert_allclose(quad, 0.25, atol=1e-9)

    def test_gradient_closed_form(self, uniform):
        pts = np.array([[0.3, -0.2], [0.0, 0.9], [1.5, 0.5]])
        g = uniform.potential_gradient(pts)
        assert_allclose(g[0], -pts[0], atol=1e-14)
        assert_allclose(g[1], -pts[1], atol=1e-14)
        assert_allclose(g[2], -pts[2] / np.dot(pts[2], pts[2]), atol=1e-14)

    def test_laplacian_is_minus_2pi_density(self, uniform):
        # 5-point stencil on the potential
        h = 1e-3
        for z in [np.array([0.1, 0.2]), np.array([-0.4, 0.35])]:
            stencil = (
                uniform.log_potential(z + [h, 0]) + uniform.log_potential(z - [h, 0])
                + uniform.log_potential(z + [0, h]) + uniform.log_potential(z - [0, h])
                - 4 * uniform.log_potential(z)
            ) / h**2
            target = -2.0 * np.pi * uniform.density(z)
            assert abs(stencil - target) < 1e-3 * abs(target)


class TestQuadraticDisk:
    def test_mass(self, quadratic):
        assert_allclose(quadratic.mass(), 1.0, atol=1e-10)

    def test_density_normalization_constant(self, quadratic):
        assert_allclose(quadratic.c, 2.0 / (3.0 * np.pi), rtol=1e-14)
        assert quadratic.c_min > 0
        pts, _ = oracles.disk_quad_2d, None  # noqa: F841 (kept terse)
        grid = np.linspace(0, 0.999, 50)
        vals = quadratic.density(np.column_stack([grid, np.zeros_like(grid)]))
        assert np.all(vals >= quadratic.c_min - 1e-12)

    def test_potential_against_closed_form(self, quadratic):
        # derived by hand from the radial reduction and checked against
        # adaptive quadrature before being frozen here:
        # p(s) = 7/12 - (2/3) s^2 + s^4/12 inside the disk
        s = np.linspace(0.0, 1.0, 41)
        pts = np.column_stack([s, np.zeros_like(s)])
        closed = 7.0 / 12.0 - (2.0 / 3.0) * s**2 + s**4 / 12.0
        assert_allclose(quadratic.log_potential(pts), closed, atol=2e-9)

    def test_potential_against_adaptive_quadrature(self, quadratic):
        for s in [0.0, 0.37, 0.82]:
            want = oracles.radial_potential(oracles.quadratic_rho, 1.0, s)
            got = quadratic.log_potential(np.array([s, 0.0]))
            assert_allclose(got, want, atol=1e-8)

    def test_potential_against_2d_lens_quadrature(self, quadratic):
        # fully 2D oracle: validates the radial reduction itself
        probe = np.array([0.55, -0.2])
        want = oracles.lens_polar_potential(oracles.quadratic_rho, 1.0, probe)
        got = quadratic.log_potential(probe)
        assert_allclose(got, want, atol=1e-6)

    def test_self_energy(self, quadratic):
        # 67/216, derived by hand and confirmed by adaptive quadrature
        assert_allclose(quadratic.self_energy, 67.0 / 216.0, atol=1e-9)

    def test_gradient_matches_finite_differences(self, quadratic):
        h = 1e-6
        for z in [np.array([0.3, 0.1]), np.array([0.0, 0.75]), np.array([1.4, -0.3])]:
            g = quadratic.potential_gradient(z)
            fd = np.array([
                (quadratic.log_potential(z + [h, 0]) - quadratic.log_potential(z - [h, 0])) / (2 * h),
                (quadratic.log_potential(z + [0, h]) - quadratic.log_potential(z - [0, h])) / (2 * h),
            ])
            assert_allclose(g, fd, atol=1e-7)

    def test_laplacian_is_minus_2pi_density(self, quadratic):
        h = 2e-3
        for z in [np.array([0.15, 0.1]), np.array([-0.5, 0.2])]:
            stencil = (
                quadratic.log_potential(z + [h, 0]) + quadratic.log_potential(z - [h, 0])
                + quadratic.log_potential(z + [0, h]) + quadratic.log_potential(z - [0, h])
                - 4 * quadratic.log_potential(z)
            ) / h**2
            target = -2.0 * np.pi * quadratic.density(z)
            assert abs(stencil - target) < 1e-3 * abs(target)

    def test_density_gradient(self, quadratic):
        z = np.array([0.4, -0.3])
        g = quadratic.density_gradient(z)
        assert_allclose(g, -2.0 * quadratic.c * z, rtol=1e-12)


class TestConfiningPotential:
    def test_zero_on_support(self, uniform):
        zeta = ConfiningPotential(uniform)
        pts = np.array([[0.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
        assert_allclose(zeta(pts), 0.0, atol=0)

    def test_positive_and_growing_outside(self, uniform):
        zeta = ConfiningPotential(uniform)
        r = np.array([1.1, 2.0, 10.0, 100.0])
        vals = zeta(np.column_stack([r, np.zeros_like(r)]))
        assert np.all(np.diff(vals) > 0)
        assert np.all(vals > 0)
        # beats (2 + gamma) log|x| at large distance
        assert vals[-1] > 2.5 * np.log(100.0)


def test_make_measure():
    assert make_measure("uniform").name == "uniform"
    assert make_measure("quadratic").name == "quadratic"
    with pytest.raises(ValueError, match="unknown measure preset"):
        make_measure("nope")
