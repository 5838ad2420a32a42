"""Transport maps and deterministic verification of the first-order
expansions of energy, fluctuation, and Jacobian under x -> x + t psi(x).

Each verify_* routine compares a central finite difference of the exact
left-hand side against the paper-style decomposition of the right-hand
side (quadrature integrals plus fluctuation terms), so the two routes
share no code path.  Residual ladders certify the O(eps^2) remainders.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .electric import anisotropy_A, anisotropy_ani, transport_field
from .energy import PointConfiguration, fluctuation, log_energy
from .quadrature import gauss_legendre, unit_square_log_integral

DEFAULT_T_LADDER = tuple(10.0 ** e for e in
                         (-2.5, -3.0, -3.5, -4.0, -4.5, -5.0))


class TransportMap:
    """x -> x + t psi(x); valid while t keeps it a diffeomorphism."""

    def __init__(self, psi, t, check=True):
        self.psi = psi
        self.t = float(t)
        if not hasattr(psi, "_sup_jac"):
            psi._sup_jac = psi.sup_jacobian_norm()
        self.threshold = 0.5 / psi._sup_jac if psi._sup_jac > 0 else math.inf
        if check and abs(self.t) >= self.threshold:
            raise ValueError(
                f"not a diffeomorphism: |t|={abs(t):.3e} >= {self.threshold:.3e}")

    def apply(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts + self.t * self.psi.value(pts)

    def jacobian_matrix(self, pts):
        out = self.t * self.psi.jacobian(pts)
        out[:, 0, 0] += 1.0
        out[:, 1, 1] += 1.0
        return out

    def jacobian_det(self, pts):
        J = self.jacobian_matrix(pts)
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    def invert(self, y, tol=1e-13, max_iter=40):
        """Newton inversion of the map on an array of targets."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        x = y.copy()
        for _ in range(max_iter):
            r = x + self.t * self.psi.value(x) - y
            if np.max(np.abs(r)) < tol:
                break
            J = self.jacobian_matrix(x)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            dx0 = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / det
            dx1 = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / det
            x[:, 0] -= dx0
            x[:, 1] -= dx1
        return x

    def pushforward_density_at(self, x):
        """Exact transported density evaluated at T(x): m0(x)/det DT(x)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.psi.measure.density(x) / self.jacobian_det(x)

    def pushforward_surrogate(self, y):
        """First-order model m0 - t*Laplacian(phi), evaluated at y."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return self.psi.measure.density(y) - self.t * self.psi.phi.laplacian(y)

    def pushforward_mass(self, n_r=96, n_t=192):
        """Quadrature of the transported density over the support via the
        inverse map; equals 1 up to inversion and quadrature error."""
        measure = self.psi.measure
        rr, wr = gauss_legendre(n_r, 0.0, measure.radius)
        tt = (np.arange(n_t) + 0.5) * (2.0 * np.pi / n_t)
        R, T = np.meshgrid(rr, tt, indexing="ij")
        nodes = np.column_stack([(R * np.cos(T)).ravel(),
                                 (R * np.sin(T)).ravel()])
        x = self.invert(nodes)
        dens = self.psi.measure.density(x) / self.jacobian_det(x)
        w = (wr[:, None] * rr[:, None] * np.full((1, n_t), 2.0 * np.pi / n_t)).ravel()
        return float(np.dot(w, dens))


def jacobian_product(tmap, points):
    """Product of det DT over the configuration; exact, no expansion."""
    det = tmap.jacobian_det(np.asarray(points, dtype=float))
    if np.any(det <= 0.0):
        raise ValueError("nonpositive Jacobian determinant at a particle")
    return float(np.exp(np.sum(np.log(det))))


@dataclass
class ExpansionReport:
    identity: str
    eps_ladder: tuple
    derivative_estimate: float
    prediction: float
    mismatch: float
    tolerance: float
    passed: bool
    order: float
    order_r2: float
    order_window: tuple = ()
    second_differences: tuple = ()
    details: dict = field(default_factory=dict)
    flagged: bool = False

    def as_dict(self):
        return {
            "identity": self.identity,
            "eps_ladder": list(self.eps_ladder),
            "derivative_estimate": self.derivative_estimate,
            "prediction": self.prediction,
            "mismatch": self.mismatch,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "order": self.order,
            "order_r2": self.order_r2,
            "second_differences": list(self.second_differences),
            "details": self.details,
            "flagged": bool(self.flagged),
        }


def _fit_order(eps, residuals, floor=1e-13):
    """Least-squares slope of log|residual| vs log eps, ignoring values that
    have fallen to arithmetic noise."""
    eps = np.asarray(eps, dtype=float)
    res = np.abs(np.asarray(residuals, dtype=float))
    scale = res.max() if res.size else 0.0
    keep = res > max(floor, 1e-9 * scale)
    if keep.sum() < 3:
        return float("nan"), 0.0, ()
    x = np.log(eps[keep])
    y = np.log(res[keep])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2, tuple(eps[keep])


def _derivative_fit(eps, central, tail=3):
    """Fit D(eps) = a + b eps^2 on the `tail` smallest rungs; returns the
    extrapolated derivative a.  Restricting to small eps keeps the eps^4
    truncation of the model below the round-off floor of the differences."""
    eps = np.asarray(eps, dtype=float)
    central = np.asarray(central, dtype=float)
    idx = np.argsort(eps)[:max(2, tail)]
    eps, central = eps[idx], central[idx]
    A = np.column_stack([np.ones_like(eps), eps ** 2])
    coef, *_ = np.linalg.lstsq(A, central, rcond=None)
    return float(coef[0]), float(coef[1])


def _ladder_scan(g, eps_ladder):
    """g at 0 and +-eps for every rung; returns centrals and second diffs."""
    g0 = g(0.0)
    centrals, seconds = [], []
    for e in eps_ladder:
        gp, gm = g(e), g(-e)
        centrals.append((gp - gm) / (2.0 * e))
        seconds.append((gp + gm - 2.0 * g0) / e ** 2)
    return g0, np.asarray(centrals), np.asarray(seconds)


def _report(identity, eps_ladder, est, pred, tol, seconds, details=None,
            flagged=False):
    order, r2, window = _fit_order(eps_ladder,
                                   np.asarray(seconds) * np.asarray(eps_ladder) ** 2)
    mismatch = abs(est - pred)
    return ExpansionReport(
        identity=identity, eps_ladder=tuple(eps_ladder),
        derivative_estimate=est, prediction=pred, mismatch=mismatch,
        tolerance=tol, passed=bool(mismatch <= tol), order=order,
        order_r2=r2, order_window=window,
        second_differences=tuple(np.asarray(seconds, dtype=float)),
        details=details or {}, flagged=flagged)


def verify_energy_expansion(points, measure, phi, omega, t_ladder=None,
                            ani_kw=None):
    """First-order energy response: d/d eps F(T_eps X, mu0) at 0 against
    (1/N omega) A + (2 pi / omega) <phi, fluctuation>."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    psi = transport_field(phi, measure)
    t_ladder = tuple(t_ladder or DEFAULT_T_LADDER)
    eps_ladder = tuple(t * omega * n for t in t_ladder)

    def g(eps):
        if eps == 0.0:
            return log_energy(PointConfiguration(pts), measure)
        tmap = TransportMap(psi, eps / (omega * n))
        moved = tmap.apply(pts)
        return log_energy(PointConfiguration(moved), measure)

    _, centrals, seconds = _ladder_scan(g, eps_ladder)
    est, _ = _derivative_fit(eps_ladder, centrals)

    ani = anisotropy_A(pts, measure, psi, **(ani_kw or {}))
    fluct = fluctuation(phi, PointConfiguration(pts), measure)
    pred = ani.value / (n * omega) + (2.0 * math.pi / omega) * fluct
    tol = max(2.0 * ani.error / (n * omega), 1e-3 * abs(est))
    details = {"ani_value": ani.value, "ani_error": ani.error,
               "ani_converged": ani.converged, "fluctuation": fluct}
    return _report("energy-response", eps_ladder, est, pred, tol, seconds,
                   details, flagged=not ani.converged)


def verify_fluctuation_expansion(points, measure, phi, omega, t_ladder=None):
    """Fluctuation response: d/d eps <phi, T_eps X - N mu0> at 0 against
    (1/omega) [ integral |grad phi|^2 + (1/N) <|grad phi|^2/m0, fluct> ]."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    psi = transport_field(phi, measure)
    t_ladder = tuple(t_ladder or DEFAULT_T_LADDER)
    eps_ladder = tuple(t * omega * n for t in t_ladder)
    bg = phi.background_integral(measure)

    def q(eps):
        if eps == 0.0:
            moved = pts
        else:
            moved = TransportMap(psi, eps / (omega * n)).apply(pts)
        return float(np.sum(phi.value(moved))) - n * bg

    _, centrals, seconds = _ladder_scan(q, eps_ladder)
    est, _ = _derivative_fit(eps_ladder, centrals)

    grad_sq = phi.grad_sq_integral()
    # <h, M_N> with h = |grad phi|^2 / m0; its mu0 integral is grad_sq again
    g = phi.gradient(pts)
    h_at = (g[:, 0] ** 2 + g[:, 1] ** 2) / measure.density(pts)
    h_fluct = float(np.sum(h_at)) - n * grad_sq
    pred = (grad_sq + h_fluct / n) / omega
    tol = 1e-6 * max(1.0, abs(pred))
    details = {"grad_sq_integral": grad_sq, "h_fluctuation": h_fluct}
    return _report("fluctuation-response", eps_ladder, est, pred, tol, seconds,
                   details)


def verify_jacobian_expansion(points, measure, phi, omega, t_ladder=None):
    """Jacobian response: d/d eps log prod det DT_eps(x_i) at 0 against
    (1/omega) integral(Lap phi log m0) + (1/(omega N)) <div psi, fluct>."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    psi = transport_field(phi, measure)
    t_ladder = tuple(t_ladder or DEFAULT_T_LADDER)
    eps_ladder = tuple(t * omega * n for t in t_ladder)

    def lp(eps):
        if eps == 0.0:
            return 0.0
        tmap = TransportMap(psi, eps / (omega * n))
        return math.log(jacobian_product(tmap, pts))

    _, centrals, seconds = _ladder_scan(lp, eps_ladder)
    est, _ = _derivative_fit(eps_ladder, centrals)

    lap_log = phi.laplacian_logdensity_integral(measure)
    div_at = psi.divergence(pts)
    div_fluct = float(np.sum(div_at)) - n * lap_log
    pred = lap_log / omega + div_fluct / (omega * n)
    tol = 1e-6 * max(1.0, abs(pred))
    details = {"laplacian_logdensity_integral": lap_log,
               "div_fluctuation": div_fluct}
    return _report("jacobian-response", eps_ladder, est, pred, tol, seconds,
                   details)


def verify_anisotropy_transport(points, measure, phi, omega, t_ladder=None,
                                ani_kw=None):
    """Stability of Ani under transport: |Ani(T_eps X) - Ani(X)| along the
    ladder, with a fitted linear slope in eps.  A shape certificate, not an
    identity: the paper's constant is unquantified."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    psi = transport_field(phi, measure)
    t_ladder = tuple(t_ladder or DEFAULT_T_LADDER[:4])
    eps_ladder = tuple(t * omega * n for t in t_ladder)
    kw = ani_kw or {}

    base = anisotropy_ani(pts, measure, psi, **kw)
    flagged = not base.converged
    diffs, diffs_neg = [], []
    for eps in eps_ladder:
        for sign, box in ((1.0, diffs), (-1.0, diffs_neg)):
            moved = TransportMap(psi, sign * eps / (omega * n)).apply(pts)
            res = anisotropy_ani(moved, measure, psi, **kw)
            flagged = flagged or not res.converged
            box.append(res.value - base.value)
    diffs = np.asarray(diffs)
    diffs_neg = np.asarray(diffs_neg)
    eps_arr = np.asarray(eps_ladder)
    # |d| approx slope * eps: least squares through the origin
    slope = float(np.dot(np.abs(diffs), eps_arr) / np.dot(eps_arr, eps_arr))
    # even parts, bounded by the O(eps^2) remainder
    evens = np.abs(diffs + diffs_neg)
    order, r2, _ = _fit_order(eps_arr, np.abs(diffs))
    noise = 4.0 * base.error
    # shape certificate: the difference decays with eps, down to the
    # extrapolation noise of the two Ani evaluations it subtracts
    top = float(np.abs(diffs).max())
    bottom = float(np.abs(diffs)[np.argmin(eps_arr)])
    decays = bottom <= 0.5 * top + noise
    mismatch = top
    tol = slope * eps_arr.max() + max(noise, 0.25 * slope * eps_arr.max())
    return ExpansionReport(
        identity="anisotropy-transport", eps_ladder=tuple(eps_ladder),
        derivative_estimate=slope, prediction=0.0, mismatch=mismatch,
        tolerance=tol, passed=bool(mismatch <= tol and decays), order=order,
        order_r2=r2,
        second_differences=tuple(evens),
        details={"slope": slope, "ani_error": base.error,
                 "decays": bool(decays),
                 "differences": diffs.tolist(),
                 "differences_negative": diffs_neg.tolist()},
        flagged=flagged)


def verify_kernel_identity(f, laplacian, probes, support_center, support_radius,
                           h=0.01, n_theta=256, n_r=12, panel_ratio=1.4):
    """Max relative residual of the log-kernel identity
    integral(-log|x-y| Lap f(y) dy) = -2 pi f(x) over the probes.

    The disk |y - x| <= h is integrated analytically against the probe
    value of Lap f; outside, geometric Gauss-Legendre panels in radius
    times a uniform angle grid.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    theta = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
    ct, st = np.cos(theta), np.sin(theta)
    w_t = 2.0 * np.pi / n_theta
    worst = 0.0
    for x in probes:
        r_max = math.hypot(x[0] - support_center[0],
                           x[1] - support_center[1]) + support_radius
        # inner cell: integral of -log r over the disk, times Lap f(x)
        inner = laplacian(x[None, :])[0] * math.pi * h * h * (0.5 - math.log(h))
        total = inner
        lo = h
        while lo < r_max:
            hi = min(lo * panel_ratio, r_max)
            rr, wr = gauss_legendre(n_r, lo, hi)
            zx = x[0] + rr[:, None] * ct[None, :]
            zy = x[1] + rr[:, None] * st[None, :]
            lap = laplacian(np.column_stack([zx.ravel(), zy.ravel()]))
            lap = lap.reshape(len(rr), n_theta)
            integrand = (-np.log(rr))[:, None] * lap
            total += float(np.dot(wr * rr, integrand.sum(axis=1)) * w_t)
            lo = hi
        target = -2.0 * math.pi * float(f(x[None, :])[0])
        rel = abs(total - target) / (1.0 + abs(target))
        worst = max(worst, rel)
    return worst


def quadratic_energy_of_difference(tmap, n_cells=160):
    """Interaction energy of N(m_eps - m0) with itself: the Term II
    remainder.  Midpoint grid over the support of the density change with
    an analytically integrated log-kernel self cell."""
    psi = tmap.psi
    measure = psi.measure
    c = np.asarray(psi.center, dtype=float)
    R = psi.radius * 1.02
    h = 2.0 * R / n_cells
    ax = c[0] - R + (np.arange(n_cells) + 0.5) * h
    ay = c[1] - R + (np.arange(n_cells) + 0.5) * h
    X, Y = np.meshgrid(ax, ay)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    keep = (nodes[:, 0] - c[0]) ** 2 + (nodes[:, 1] - c[1]) ** 2 <= R * R
    nodes = nodes[keep]
    x = tmap.invert(nodes)
    m_eps = measure.density(x) / tmap.jacobian_det(x)
    diff = m_eps - measure.density(nodes)
    # self-cell: integral of -log|u| over an h-square is h^2(C0 - log h)
    c0 = unit_square_log_integral()
    diag = h * h * (c0 - math.log(h))
    total = 0.0
    m = nodes.shape[0]
    chunk = 2048
    for lo in range(0, m, chunk):
        zz = nodes[lo:lo + chunk]
        d2 = ((zz[:, None, 0] - nodes[None, :, 0]) ** 2
              + (zz[:, None, 1] - nodes[None, :, 1]) ** 2)
        block = np.where(d2 > 0, -0.5 * np.log(np.maximum(d2, 1e-300)) * h * h,
                         diag)
        total += float(diff[lo:lo + chunk] @ block @ diff)
    return 0.5 * total * h * h


def term_two_order(measure, phi, omega, n, t_ladder=None, n_cells=160):
    """Fitted eps-order of the quadratic remainder: the self-energy of the
    density change N(m_eps - m0) must vanish like eps^2."""
    psi = transport_field(phi, measure)
    t_ladder = tuple(t_ladder or (1e-3, 10 ** -3.5, 1e-4, 10 ** -4.5, 1e-5))
    eps_ladder = tuple(t * omega * n for t in t_ladder)
    vals = []
    for t in t_ladder:
        tmap = TransportMap(psi, t)
        e2 = abs(quadratic_energy_of_difference(tmap, n_cells=n_cells)) * n * n
        vals.append(e2)
    order, r2, _ = _fit_order(eps_ladder, vals)
    return order, r2, tuple(vals), eps_ladder
