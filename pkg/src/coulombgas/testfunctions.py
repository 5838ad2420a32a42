"""Smooth compactly supported test functions.

The base profile is the polynomial bump (1 - |x|^2)^6 on the unit disk,
extended by zero.  It is C^5 across the support boundary (six powers of
the vanishing factor), and all derivatives inside the disk are exact
polynomial expressions.  Scaled copies phi(x) = bump((x - center)/radius)
obey the sup-norm scaling |phi|_k = |bump|_k / radius^k.

"Macroscopic" mode treats the bookkeeping scale ell as 1 regardless of the
geometric support radius; "mesoscopic" mode sets ell to the support radius.
The scale ell only enters bound formulas and window checks, never the
pointwise values.
"""

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import comb

from .quadrature import disk_grid

_BUMP_POWER = 6


def _bump_coeffs():
    """Coefficient matrix C[i, j] of x^i y^j for (1 - x^2 - y^2)^6."""
    n = _BUMP_POWER
    C = np.zeros((2 * n + 1, 2 * n + 1))
    for k in range(n + 1):
        ck = comb(n, k, exact=True) * (-1.0) ** k
        for a in range(k + 1):
            C[2 * a, 2 * (k - a)] += ck * comb(k, a, exact=True)
    return C

_COEFFS = _bump_coeffs()
_SUP_CACHE = {}
_GRADSQ_CACHE = {}


def _base_sup_norm(k):
    """Max over the unit disk of |d^alpha bump| over all |alpha| = k."""
    if k not in _SUP_CACHE:
        pts, _ = disk_grid((0.0, 0.0), 1.0, n_r=80, n_t=160)
        sup = 0.0
        for i in range(k + 1):
            C = _COEFFS
            for _ in range(i):
                C = npoly.polyder(C, axis=0)
            for _ in range(k - i):
                C = npoly.polyder(C, axis=1)
            vals = npoly.polyval2d(pts[:, 0], pts[:, 1], C)
            sup = max(sup, float(np.max(np.abs(vals))))
        _SUP_CACHE[k] = sup
    return _SUP_CACHE[k]


class TestFunction:
    """Scaled bump phi(x) = (1 - |(x - center)/radius|^2)^6 inside its disk.

    mode: "macroscopic" (ell = 1) or "mesoscopic" (ell = radius).
    When a measure is supplied the support must sit at distance >= min_gap
    inside the measure's support; violations raise ValueError.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    def __init__(self, center=(0.0, 0.0), radius=0.8, mode="macroscopic",
                 measure=None, min_gap=0.02):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("support radius must be positive")
        if mode not in ("macroscopic", "mesoscopic"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.ell = 1.0 if mode == "macroscopic" else self.radius
        if measure is not None:
            gap = measure.radius - (np.linalg.norm(self.center - measure.center) + self.radius)
            if gap < min_gap:
                raise ValueError(
                    f"support must sit at least {min_gap} inside the measure "
                    f"support; gap is {gap:.4f}")
        self._cache = {}

    def _local(self, pts):
        pts = np.asarray(pts, dtype=float)
        scalar = pts.ndim == 1
        if scalar:
            pts = pts[None, :]
        z = (pts - self.center) / self.radius
        u = 1.0 - z[:, 0] ** 2 - z[:, 1] ** 2
        return z, np.maximum(u, 0.0), scalar

    def value(self, pts):
        _, u, scalar = self._local(pts)
        out = u**6
        return out[0] if scalar else out

    def gradient(self, pts):
        z, u, scalar = self._local(pts)
        out = (-12.0 / self.radius) * u[:, None] ** 5 * z
        return out[0] if scalar else out

    def hessian(self, pts):
        z, u, scalar = self._local(pts)
        out = np.zeros((z.shape[0], 2, 2))
        u4 = u**4
        out[:, 0, 0] = 120.0 * u4 * z[:, 0] ** 2 - 12.0 * u4 * u
        out[:, 1, 1] = 120.0 * u4 * z[:, 1] ** 2 - 12.0 * u4 * u
        out[:, 0, 1] = out[:, 1, 0] = 120.0 * u4 * z[:, 0] * z[:, 1]
        out /= self.radius**2
        return out[0] if scalar else out

    def laplacian(self, pts):
        _, u, scalar = self._local(pts)
        out = (120.0 * u**4 - 144.0 * u**5) / self.radius**2
        return out[0] if scalar else out

    def derivative_sup_norm(self, k):
        """Sup norm of the k-th derivative tensor, |phi|_k = |bump|_k / radius^k."""
        return _base_sup_norm(k) / self.radius**k

    def support_grid(self, n_r=48, n_t=96):
        return disk_grid(self.center, self.radius, n_r, n_t)

    def background_integral(self, measure):
        """integral of phi dmu, cached per measure."""
        key = ("bg", id(measure))
        if key not in self._cache:
            pts, w = self.support_grid()
            self._cache[key] = float(np.dot(w, self.value(pts) * measure.density(pts)))
        return self._cache[key]

    def grad_sq_integral(self):
        """integral of |grad phi|^2 dx (scale invariant in 2D)."""
        key = round(np.log(self.radius), 12)
        if key not in _GRADSQ_CACHE:
            pts, w = self.support_grid()
            g = self.gradient(pts)
            _GRADSQ_CACHE[key] = float(np.dot(w, np.sum(g * g, axis=1)))
        return _GRADSQ_CACHE[key]

    def laplacian_logdensity_integral(self, measure):
        """integral of (Laplacian phi) log m0 dx over the support, cached."""
        key = ("laplogm", id(measure))
        if key not in self._cache:
            pts, w = self.support_grid()
            self._cache[key] = float(np.dot(w, self.laplacian(pts) * measure.log_density(pts)))
        return self._cache[key]
