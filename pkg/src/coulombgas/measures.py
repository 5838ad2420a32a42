"""Equilibrium measures on a disk and the confining potential.

Every measure here is a radial probability density m0 supported on a disk
centered at the origin.  The logarithmic potential

    p(z) = integral of -log|z - y| m0(y) dy

follows from the circle average of the log kernel,
avg over |y|=r of -log|z-y| = -log max(|z|, r), which gives

    p(s)  = -log(s) M(s) - 2 pi * integral_s^R r m0(r) log r dr
    p'(s) = -M(s) / s          (M(s) = mass within radius s)

Outside the support p(s) = -log s since the total mass is 1.  The uniform
preset has closed forms throughout; the variable-density preset evaluates
the radial integrals by panel Gauss-Legendre quadrature and interpolates
with splines.
"""

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import gauss_legendre


def _as_points(pts):
    pts = np.asarray(pts, dtype=float)
    scalar = pts.ndim == 1
    if scalar:
        pts = pts[None, :]
    return pts, scalar


class RadialDiskMeasure:
    """Base class: radial probability density on the disk |x| <= radius."""

    name = "radial"

    def __init__(self, radius=1.0):
        self.radius = float(radius)
        self.center = np.zeros(2)

    # subclasses provide: _density_r(r), _density_dr(r), _density_d2r(r),
    # _potential_r(s), _mass_r(s), self_energy, c_min

    def density(self, pts):
        pts, scalar = _as_points(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        out = np.where(r <= self.radius, self._density_r(r), 0.0)
        return out[0] if scalar else out

    def log_density(self, pts):
        d = self.density(pts)
        return np.log(d)

    def density_gradient(self, pts):
        """Gradient of m0 where it is defined (inside the support)."""
        pts, scalar = _as_points(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        dr = self._density_dr(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, dr / np.maximum(r, 1e-300), 0.0)
        grad = pts * scale[:, None]
        return grad[0] if scalar else grad

    def log_potential(self, pts):
        pts, scalar = _as_points(pts)
        s = np.hypot(pts[:, 0], pts[:, 1])
        out = np.empty_like(s)
        inside = s <= self.radius
        out[inside] = self._potential_r(s[inside])
        out[~inside] = -np.log(s[~inside])
        return out[0] if scalar else out

    def potential_gradient(self, pts):
        """grad p(z) = -M(|z|) z / |z|^2; equals -z * mean density near 0."""
        pts, scalar = _as_points(pts)
        s = np.hypot(pts[:, 0], pts[:, 1])
        out = np.empty_like(pts)
        tiny = s < 1e-12
        sn = np.where(tiny, 1.0, s)
        mass = np.where(s >= self.radius, 1.0, self._mass_r(np.minimum(s, self.radius)))
        out = -pts * (mass / sn**2)[:, None]
        if np.any(tiny):
            out[tiny] = -pts[tiny] * (np.pi * self._density_r(np.zeros(1))[0])
        return out[0] if scalar else out

    def potential_scalar(self, y0, y1):
        # hot path for single-particle moves; avoids array plumbing
        s = math.hypot(y0, y1)
        if s >= self.radius:
            return -math.log(s)
        return float(self._potential_r(s))

    def contains(self, pts, margin=0.0):
        pts, scalar = _as_points(pts)
        inside = np.hypot(pts[:, 0], pts[:, 1]) <= self.radius - margin
        return inside[0] if scalar else inside

    def distance_outside(self, pts):
        pts, scalar = _as_points(pts)
        d = np.maximum(np.hypot(pts[:, 0], pts[:, 1]) - self.radius, 0.0)
        return d[0] if scalar else d

    def mass(self, n_r=400):
        r, w = gauss_legendre(n_r, 0.0, self.radius)
        return float(2.0 * np.pi * np.dot(w, r * self._density_r(r)))


class UniformDisk(RadialDiskMeasure):
    """Uniform density 1/pi on the unit disk (closed forms throughout)."""

    name = "uniform"

    def __init__(self):
        super().__init__(radius=1.0)
        self.c_min = 1.0 / np.pi
        self.self_energy = 0.25

    def _density_r(self, r):
        return np.full_like(np.asarray(r, dtype=float), 1.0 / np.pi)

    def _density_dr(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def density_hessian(self, pts):
        pts, scalar = _as_points(pts)
        out = np.zeros((pts.shape[0], 2, 2))
        return out[0] if scalar else out

    def _potential_r(self, s):
        return 0.5 * (1.0 - s**2)

    def _mass_r(self, s):
        return s**2


class QuadraticDisk(RadialDiskMeasure):
    """Density c (2 - |x|^2) on the unit disk, c = 2/(3 pi).

    The potential and self-energy come from the radial quadrature
    machinery; closed-form values exist and are pinned in the tests as
    oracles for this code path.
    """

    name = "quadratic"

    def __init__(self, n_knots=2000, n_gl=12):
        super().__init__(radius=1.0)
        self.c = 2.0 / (3.0 * np.pi)
        self.c_min = self.c  # density at the edge, minimum over the disk
        self._build_tables(n_knots, n_gl)

    def _density_r(self, r):
        r = np.asarray(r, dtype=float)
        return self.c * (2.0 - r**2)

    def _density_dr(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 * self.c * r

    def density_hessian(self, pts):
        pts, scalar = _as_points(pts)
        out = np.zeros((pts.shape[0], 2, 2))
        out[:, 0, 0] = -2.0 * self.c
        out[:, 1, 1] = -2.0 * self.c
        return out[0] if scalar else out

    def _build_tables(self, n_knots, n_gl):
        R = self.radius
        # graded knots: dense near 0 so the r log r integrand is resolved
        knots = R * np.linspace(0.0, 1.0, n_knots) ** 1.5
        mass_inc = np.zeros(n_knots)
        logm_inc = np.zeros(n_knots)
        for k in range(1, n_knots):
            r, w = gauss_legendre(n_gl, knots[k - 1], knots[k])
            rho = self._density_r(r)
            mass_inc[k] = 2.0 * np.pi * np.dot(w, r * rho)
            logm_inc[k] = 2.0 * np.pi * np.dot(w, r * rho * np.log(r))
        mass = np.cumsum(mass_inc)
        # J(s) = 2 pi int_s^R r rho log r dr, computed from the tail
        jtail = np.cumsum(logm_inc[::-1])[::-1]
        jtail = np.concatenate([jtail[1:], [0.0]])
        pot = np.empty(n_knots)
        with np.errstate(divide="ignore"):
            logk = np.log(knots)
        pot[0] = -jtail[0]
        pot[1:] = -logk[1:] * mass[1:] - jtail[1:]
        self._mass_spline = CubicSpline(knots, mass, bc_type=((1, 0.0), (1, 2.0 * np.pi * R * self._density_r(np.array([R]))[0])))
        self._pot_spline = CubicSpline(knots, pot, bc_type=((1, 0.0), (1, -1.0 / R)))
        r, w = gauss_legendre(400, 0.0, R)
        self.self_energy = float(2.0 * np.pi * np.dot(w, r * self._density_r(r) * self._pot_spline(r)))

    def _potential_r(self, s):
        return self._pot_spline(np.asarray(s, dtype=float))

    def _mass_r(self, s):
        return self._mass_spline(np.asarray(s, dtype=float))


class ConfiningPotential:
    """Confinement zeta: zero on the support, growing outside.

    zeta(x) = 3 log(1 + d) + d^2 with d = dist(x, support); the quadratic
    term dominates any (2 + gamma) log|x| growth condition at infinity.
    """

    def __init__(self, measure):
        self.measure = measure

    def __call__(self, pts):
        d = self.measure.distance_outside(pts)
        return 3.0 * np.log1p(d) + d**2

    def scalar(self, y0, y1):
        d = math.hypot(y0, y1) - self.measure.radius
        if d <= 0.0:
            return 0.0
        return 3.0 * math.log1p(d) + d * d


_PRESETS = {
    "uniform": UniformDisk,
    "quadratic": QuadraticDisk,
}


def make_measure(preset):
    try:
        return _PRESETS[preset]()
    except KeyError:
        raise ValueError(f"unknown measure preset {preset!r}; options: {sorted(_PRESETS)}")
