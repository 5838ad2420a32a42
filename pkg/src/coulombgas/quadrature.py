"""Tensor-product quadrature on disks and annuli.

Polar grids pair Gauss-Legendre nodes in the radius with a uniform
(trapezoidal) angular rule; for smooth integrands the angular rule is
spectrally accurate because the integrand is periodic.  The r dr Jacobian
is folded into the weights, which also removes the mild singularity of
log-kernel integrands at the grid center.
"""

import numpy as np


def gauss_legendre(n, a, b):
    """Nodes and weights for the n-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def disk_grid(center, radius, n_r=48, n_t=96):
    """Polar tensor grid on a disk.

    Returns (points, weights) with points of shape (n_r * n_t, 2); the
    weights integrate f(x) dx exactly for polynomials of modest degree.
    """
    center = np.asarray(center, dtype=float)
    r, wr = gauss_legendre(n_r, 0.0, radius)
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    wt = 2.0 * np.pi / n_t
    cos, sin = np.cos(theta), np.sin(theta)
    pts = np.empty((n_r * n_t, 2))
    pts[:, 0] = center[0] + np.outer(r, cos).ravel()
    pts[:, 1] = center[1] + np.outer(r, sin).ravel()
    w = np.outer(wr * r, np.full(n_t, wt)).ravel()
    return pts, w


def annulus_grid(center, r_inner, r_outer, n_r=16, n_t=64, panels=None):
    """Polar grid on an annulus, optionally with explicit radial panels.

    panels: increasing sequence of radial breakpoints replacing the single
    [r_inner, r_outer] panel; n_r nodes are placed per panel.
    """
    center = np.asarray(center, dtype=float)
    if panels is None:
        panels = [r_inner, r_outer]
    rs, wrs = [], []
    for lo, hi in zip(panels[:-1], panels[1:]):
        r, wr = gauss_legendre(n_r, lo, hi)
        rs.append(r)
        wrs.append(wr)
    r = np.concatenate(rs)
    wr = np.concatenate(wrs)
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    wt = 2.0 * np.pi / n_t
    cos, sin = np.cos(theta), np.sin(theta)
    pts = np.empty((r.size * n_t, 2))
    pts[:, 0] = center[0] + np.outer(r, cos).ravel()
    pts[:, 1] = center[1] + np.outer(r, sin).ravel()
    w = np.outer(wr * r, np.full(n_t, wt)).ravel()
    return pts, w


def disk_integrate(f, center, radius, n_r=48, n_t=96):
    pts, w = disk_grid(center, radius, n_r, n_t)
    return float(np.dot(w, f(pts)))


def geometric_panels(r_inner, r_outer, ratio=2.0):
    """Radial breakpoints growing geometrically from r_inner to r_outer."""
    assert 0 < r_inner < r_outer
    panels = [r_inner]
    r = r_inner
    while r * ratio < r_outer:
        r *= ratio
        panels.append(r)
    panels.append(r_outer)
    return panels


def midpoint_box_grid(lo, hi, step):
    """Cartesian midpoint grid covering the box [lo, hi]^2 (2D)."""
    nx = max(1, int(np.ceil((hi[0] - lo[0]) / step)))
    ny = max(1, int(np.ceil((hi[1] - lo[1]) / step)))
    hx = (hi[0] - lo[0]) / nx
    hy = (hi[1] - lo[1]) / ny
    xs = lo[0] + hx * (np.arange(nx) + 0.5)
    ys = lo[1] + hy * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, np.full(pts.shape[0], hx * hy)


_SQUARE_LOG_CONST = None


def unit_square_log_integral():
    """integral of -log|u| over the centered unit square, computed once.

    Used as the exact self-cell value when a log kernel is integrated on a
    Cartesian midpoint grid: the cell [x-h/2, x+h/2]^2 contributes
    h^2 * (-log h) + h^2 * C with C this constant.
    """
    global _SQUARE_LOG_CONST
    if _SQUARE_LOG_CONST is None:
        # polar integration over the square: 8-fold symmetry reduces it to
        # the triangle 0 <= theta <= pi/4, r <= 1/(2 cos theta)
        t, wt = gauss_legendre(80, 0.0, np.pi / 4.0)
        rmax = 0.5 / np.cos(t)
        # inner integral of -r log r dr from 0 to R: R^2/4 - R^2/2 log R
        inner = rmax**2 / 4.0 - rmax**2 / 2.0 * np.log(rmax)
        _SQUARE_LOG_CONST = float(8.0 * np.dot(wt, inner))
    return _SQUARE_LOG_CONST
