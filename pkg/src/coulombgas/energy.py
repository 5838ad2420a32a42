"""Logarithmic energy, fluctuations and the Gibbs log-density.

For points X = (x_1 .. x_N) against a background measure with potential p
and self-energy S:

    F(X, mu0) = sum_{i<j} -log|x_i - x_j|  -  N sum_i p(x_i)  +  N^2/2 * S

Coincident points give +inf.  The fluctuation of a test function is
sum_i phi(x_i) - N * integral of phi dmu0, and the Gibbs log-density is
-beta (F + 2 N sum_i zeta(x_i)), reported unnormalized.
"""

import numpy as np


class PointConfiguration:
    """Immutable-by-convention array of N planar points."""

    def __init__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("points must have shape (N, 2)")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        self.points = points

    @property
    def n(self):
        return self.points.shape[0]

    def __len__(self):
        return self.points.shape[0]


def interaction_matrix(points):
    """Matrix of -log|x_i - x_j| with zero diagonal; +inf marks duplicates."""
    diff = points[:, None, :] - points[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    np.fill_diagonal(d2, 1.0)
    with np.errstate(divide="ignore"):
        mat = -0.5 * np.log(d2)
    np.fill_diagonal(mat, 0.0)
    return mat


def pairwise_interaction(points):
    """sum_{i<j} -log|x_i - x_j|; +inf when two points coincide."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        return 0.0
    mat = interaction_matrix(points)
    if np.isinf(mat).any():
        return float("inf")
    return float(np.sum(mat) / 2.0)


def log_energy(config, measure):
    pts = config.points
    n = config.n
    pair = pairwise_interaction(pts)
    if np.isinf(pair):
        return float("inf")
    pot = float(np.sum(measure.log_potential(pts)))
    return pair - n * pot + 0.5 * n * n * measure.self_energy


def fluctuation(phi, config, measure):
    """<phi, X - N mu0> = sum_i phi(x_i) - N * integral phi dmu0."""
    return float(np.sum(phi.value(config.points))) - config.n * phi.background_integral(measure)


def zeta_bar(zeta, config):
    """Confinement term 2 N sum_i zeta(x_i)."""
    return 2.0 * config.n * float(np.sum(zeta(config.points)))


def gibbs_log_density(config, measure, zeta, beta):
    """Unnormalized log density -beta (F + zeta_bar); -inf on coincidence."""
    f = log_energy(config, measure)
    if np.isinf(f):
        return float("-inf")
    return -beta * (f + zeta_bar(zeta, config))
