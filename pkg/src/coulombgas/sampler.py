"""Metropolis sampling of the Coulomb gas Gibbs measure.

Single-particle Gaussian moves against exp(-beta (F + 2 N sum zeta)).  The
O(N) move cost comes from cached per-particle interaction sums; the full
interaction matrix is kept so an accepted move updates one row and column.
Caches are revalidated against a fresh recomputation on a fixed schedule
and the relative drift is required to stay below 1e-9.

Mesoscopic runs can bias the choice of the moved particle toward the
neighborhood of the test function (twice its support radius).  The
selection probability then depends on the state, so the acceptance rule
carries the exact Hastings ratio of the mixture kernel; a plain mixture
without that factor is not reversible.

Chains are independent given spawned seeds; per-chain estimator partials
are exact (math.fsum) so merging them is associative and reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import interaction_matrix


@dataclass
class SamplerSettings:
    sigma_prop: float | None = None      # default 0.5 / sqrt(N)
    burn_in_sweeps: int | None = None    # default 50 N
    thinning_sweeps: int = 1
    local_bias: bool = False
    bias_prob: float = 0.5
    revalidate_every: int = 512          # sweeps between cache audits

    def resolve(self, n):
        sigma = self.sigma_prop if self.sigma_prop is not None else 0.5 / math.sqrt(n)
        burn = self.burn_in_sweeps if self.burn_in_sweeps is not None else 50 * n
        return sigma, burn


def initial_configuration(n, measure, rng):
    """Draw n points iid from the equilibrium measure (radial rejection)."""
    pts = np.empty((n, 2))
    have = 0
    ceiling = measure.density(np.zeros((1, 2)))[0] * 1.0001
    while have < n:
        m = 2 * (n - have) + 8
        cand = rng.uniform(-measure.radius, measure.radius, (m, 2))
        r2 = cand[:, 0] ** 2 + cand[:, 1] ** 2
        inside = r2 <= measure.radius**2
        cand = cand[inside]
        keep = rng.random(len(cand)) * ceiling <= measure.density(cand)
        cand = cand[keep]
        take = min(n - have, len(cand))
        pts[have:have + take] = cand[:take]
        have += take
    return pts


class Chain:
    """One Markov chain with cached interaction state."""

    def __init__(self, points, measure, zeta, beta, phi, settings, seed, chain_id=0):
        points = np.asarray(points, dtype=float)
        self.n = points.shape[0]
        self.measure = measure
        self.zeta = zeta
        self.beta = float(beta)
        self.phi = phi
        self.settings = settings
        self.chain_id = chain_id
        self.rng = np.random.default_rng(seed)
        self.sigma, self.burn_in = settings.resolve(self.n)

        self.x0 = points[:, 0].copy()
        self.x1 = points[:, 1].copy()
        self._pot_scalar = getattr(measure, "potential_scalar", None)
        self._zeta_scalar = getattr(zeta, "scalar", None)
        self._rebuild_caches()

        self.n_proposed = 0
        self.n_accepted = 0
        self.sweep_index = 0
        self._bg = phi.background_integral(measure) if phi is not None else 0.0
        self._gbg = phi.grad_sq_integral() if phi is not None else 0.0

        if settings.local_bias and phi is not None:
            self._bias_center = phi.center
            self._bias_radius = 2.0 * phi.radius
            self._in_region = self._region_mask(self.x0, self.x1)
        else:
            self._bias_center = None
            self._in_region = None

    # -- cache management ------------------------------------------------

    def _rebuild_caches(self):
        pts = np.column_stack([self.x0, self.x1])
        self.logmat = interaction_matrix(pts)
        self.S = self.logmat.sum(axis=1)
        self.pair_total = float(self.S.sum() / 2.0)
        self.pot = np.asarray(self.measure.log_potential(pts), dtype=float)
        self.pot_total = float(self.pot.sum())
        self.zeta_v = np.asarray(self.zeta(pts), dtype=float)
        self.zeta_total = float(self.zeta_v.sum())

    def revalidate(self):
        """Recompute caches from scratch; returns the worst relative drift."""
        old = (self.pair_total, self.pot_total, self.zeta_total)
        self._rebuild_caches()
        new = (self.pair_total, self.pot_total, self.zeta_total)
        drift = max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(old, new))
        if not drift < 1e-9:
            raise RuntimeError(f"cache drift {drift:.3e} exceeds 1e-9")
        return drift

    def _region_mask(self, x0, x1):
        c = self._bias_center
        return (x0 - c[0]) ** 2 + (x1 - c[1]) ** 2 <= self._bias_radius**2

    # -- observables -----------------------------------------------------

    def energy(self):
        n = self.n
        return self.pair_total - n * self.pot_total + 0.5 * n * n * self.measure.self_energy

    def log_density(self):
        return -self.beta * (self.energy() + 2.0 * self.n * self.zeta_total)

    def points(self):
        return np.column_stack([self.x0, self.x1])

    def fluctuation(self):
        return float(np.sum(self.phi.value(self.points()))) - self.n * self._bg

    def gradsq_fluctuation(self):
        """Fluctuation of |grad phi|^2 / m0, the statistic whose mean
        magnitude sets the high-frequency floor of the decay bound.

        Centering uses int |grad phi|^2 dx, which equals the background
        integral of the statistic since the density cancels.
        """
        pts = self.points()
        g = self.phi.gradient(pts)
        g2 = g[:, 0] ** 2 + g[:, 1] ** 2
        inside = g2 > 0.0  # support sits strictly inside, density > 0 there
        total = 0.0
        if np.any(inside):
            dens = self.measure.density(pts[inside])
            total = float(np.sum(g2[inside] / dens))
        return total - self.n * self._gbg

    def points_in_support(self):
        c, r = self.phi.center, self.phi.radius
        return int(np.count_nonzero(
            (self.x0 - c[0]) ** 2 + (self.x1 - c[1]) ** 2 <= r * r))

    # -- dynamics ----------------------------------------------------------

    def move_log_ratio(self, k, y0, y1):
        """Log acceptance ratio for moving particle k to (y0, y1), plus the
        cached pieces needed to commit the move."""
        n = self.n
        d2 = (self.x0 - y0) ** 2 + (self.x1 - y1) ** 2
        d2[k] = 1.0
        with np.errstate(divide="ignore"):
            newcol = -0.5 * np.log(d2)
        newcol[k] = 0.0
        dpair = float(newcol.sum() - self.S[k])
        if self._pot_scalar is not None:
            dpot = self._pot_scalar(y0, y1) - self.pot[k]
        else:
            dpot = float(self.measure.log_potential(np.array([y0, y1]))) - self.pot[k]
        if self._zeta_scalar is not None:
            dzeta = self._zeta_scalar(y0, y1) - self.zeta_v[k]
        else:
            dzeta = float(self.zeta(np.array([y0, y1]))) - self.zeta_v[k]
        dlog = -self.beta * (dpair - n * dpot + 2.0 * n * dzeta)
        return dlog, newcol, dpair, dpot, dzeta

    def _commit(self, k, y0, y1, newcol, dpair, dpot, dzeta):
        self.S += newcol - self.logmat[k]
        self.S[k] += dpair
        self.logmat[k, :] = newcol
        self.logmat[:, k] = newcol
        self.x0[k] = y0
        self.x1[k] = y1
        self.pot[k] += dpot
        self.zeta_v[k] += dzeta
        self.pair_total += dpair
        self.pot_total += dpot
        self.zeta_total += dzeta

    def _select_biased(self, u_branch, u_pick):
        """Mixture selection: uniform with prob bias_prob, otherwise uniform
        over the particles currently in the bias region."""
        n = self.n
        cnt = int(np.count_nonzero(self._in_region))
        if cnt == 0 or u_branch < self.settings.bias_prob:
            return int(u_pick * n)
        idx = np.flatnonzero(self._in_region)
        return int(idx[int(u_pick * cnt)])

    def _selection_prob(self, k, cnt):
        p = self.settings.bias_prob
        if cnt == 0:
            return 1.0 / self.n
        extra = (1.0 - p) / cnt if self._in_region[k] else 0.0
        return p / self.n + extra

    def mixture_log_ratio(self, k, y0, y1):
        """log s_rev - log s_fwd for the state-dependent selection kernel.

        s_fwd marginalizes the branch choice at the current state; s_rev is
        the same marginal evaluated after the move.  Returns the correction
        and the region membership of the proposed point.
        """
        c = self._bias_center
        in_new = (y0 - c[0]) ** 2 + (y1 - c[1]) ** 2 <= self._bias_radius**2
        cnt = int(np.count_nonzero(self._in_region))
        s_fwd = self._selection_prob(k, cnt)
        cnt_new = cnt - int(self._in_region[k]) + int(in_new)
        was = self._in_region[k]
        self._in_region[k] = in_new
        s_rev = self._selection_prob(k, cnt_new)
        self._in_region[k] = was
        return math.log(s_rev) - math.log(s_fwd), bool(in_new)

    def sweep(self):
        """N single-particle proposals."""
        n = self.n
        rng = self.rng
        props = rng.standard_normal((n, 2)) * self.sigma
        logu = np.log(rng.random(n))
        biased = self._in_region is not None
        if biased:
            u_branch = rng.random(n)
            u_pick = rng.random(n)
        else:
            ks = rng.integers(0, n, n)
        for m in range(n):
            if biased:
                k = self._select_biased(u_branch[m], u_pick[m])
            else:
                k = ks[m]
            y0 = self.x0[k] + props[m, 0]
            y1 = self.x1[k] + props[m, 1]
            dlog, newcol, dpair, dpot, dzeta = self.move_log_ratio(k, y0, y1)
            if biased:
                corr, in_new = self.mixture_log_ratio(k, y0, y1)
                dlog += corr
            self.n_proposed += 1
            if dlog >= 0.0 or logu[m] < dlog:
                self._commit(k, y0, y1, newcol, dpair, dpot, dzeta)
                self.n_accepted += 1
                if biased:
                    self._in_region[k] = in_new
        self.sweep_index += 1
        if self.sweep_index % self.settings.revalidate_every == 0:
            self.revalidate()

    def run(self, n_records, keep_points=False):
        """Burn in (first call only), then record every thinning_sweeps."""
        if self.sweep_index < self.burn_in:
            while self.sweep_index < self.burn_in:
                self.sweep()
            self.revalidate()
        rec = {
            "sweep": np.empty(n_records, dtype=np.int64),
            "fluctuation": np.empty(n_records),
            "gradsq_fluct": np.empty(n_records),
            "energy": np.empty(n_records),
            "points_in_supp": np.empty(n_records, dtype=np.int64),
        }
        snaps = [] if keep_points else None
        for i in range(n_records):
            for _ in range(self.settings.thinning_sweeps):
                self.sweep()
            rec["sweep"][i] = self.sweep_index
            rec["fluctuation"][i] = self.fluctuation()
            rec["gradsq_fluct"][i] = self.gradsq_fluctuation()
            rec["energy"][i] = self.energy()
            rec["points_in_supp"][i] = self.points_in_support()
            if keep_points:
                snaps.append(self.points())
        if keep_points:
            rec["points"] = snaps
        return rec

    @property
    def acceptance_rate(self):
        return self.n_accepted / max(1, self.n_proposed)


def metropolis_step(chain):
    """One uniformly selected single-particle move; returns acceptance."""
    rng = chain.rng
    k = int(rng.integers(0, chain.n))
    y0 = chain.x0[k] + rng.standard_normal() * chain.sigma
    y1 = chain.x1[k] + rng.standard_normal() * chain.sigma
    dlog, newcol, dpair, dpot, dzeta = chain.move_log_ratio(k, y0, y1)
    chain.n_proposed += 1
    if dlog >= 0.0 or math.log(rng.random()) < dlog:
        chain._commit(k, y0, y1, newcol, dpair, dpot, dzeta)
        if chain._in_region is not None:
            chain._in_region[k] = chain._region_mask(
                np.array([y0]), np.array([y1]))[0]
        chain.n_accepted += 1
        return True
    return False


# -- ensembles -------------------------------------------------------------


def _run_one_chain(args):
    (chain_id, seed, n, measure, zeta, beta, phi, settings, n_records,
     keep_points) = args
    rng = np.random.default_rng(seed)
    pts = initial_configuration(n, measure, rng)
    chain = Chain(pts, measure, zeta, beta, phi, settings,
                  seed=rng, chain_id=chain_id)
    rec = chain.run(n_records, keep_points=keep_points)
    series = rec["fluctuation"]
    diag = {
        "chain": chain_id,
        "acceptance_rate": chain.acceptance_rate,
        "ess": effective_sample_size(series),
        "n_records": n_records,
    }
    return chain_id, rec, diag, chain.points()


@dataclass
class EnsembleResult:
    records: dict          # column name -> concatenated array (chain order)
    diagnostics: list      # per-chain dicts
    final_points: list     # per-chain (N, 2) arrays
    n: int
    seed: int
    snapshots: list = None  # per-record (N, 2) arrays when requested

    def series(self, column, chain=None):
        if chain is None:
            return self.records[column]
        mask = self.records["chain"] == chain
        return self.records[column][mask]

    @property
    def total_ess(self):
        return float(sum(d["ess"] for d in self.diagnostics))


def run_ensemble(n, measure, zeta, beta, phi, settings, n_chains, n_records,
                 seed, workers=1, keep_points=False):
    """Independent chains from spawned seeds, merged in chain order."""
    seeds = np.random.SeedSequence(seed).spawn(n_chains)
    jobs = [(i, seeds[i], n, measure, zeta, beta, phi, settings, n_records,
             keep_points)
            for i in range(n_chains)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one_chain, jobs))
    else:
        results = [_run_one_chain(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    columns = ("sweep", "fluctuation", "gradsq_fluct", "energy",
               "points_in_supp")
    records = {"chain": np.concatenate(
        [np.full(n_records, cid, dtype=np.int64) for cid, _, _, _ in results])}
    for col in columns:
        records[col] = np.concatenate([rec[col] for _, rec, _, _ in results])
    diags = [d for _, _, d, _ in results]
    finals = [p for _, _, _, p in results]
    snaps = None
    if keep_points:
        snaps = [s for _, rec, _, _ in results for s in rec["points"]]
    return EnsembleResult(records, diags, finals, n=n, seed=seed,
                          snapshots=snaps)


# -- estimator partials (exact merge) ---------------------------------------


def chain_partial(values):
    """Exact per-chain partial: count and correctly rounded sums."""
    arr = [float(v) for v in values]
    return {"n": len(arr), "sum": [math.fsum(arr)], "sumsq": [math.fsum(v * v for v in arr)]}


def merge_partials(a, b):
    """Concatenation; exact and associative (finalization sums once)."""
    return {"n": a["n"] + b["n"], "sum": a["sum"] + b["sum"],
            "sumsq": a["sumsq"] + b["sumsq"]}


def finalize_partials(p):
    n = p["n"]
    mean = math.fsum(p["sum"]) / n
    var = (math.fsum(p["sumsq"]) - n * mean * mean) / max(1, n - 1)
    return mean, var


# -- effective sample size ---------------------------------------------------


def effective_sample_size(series):
    """ESS from the initial-positive-sequence truncation of the
    autocorrelation (Geyer).  Degenerate or negatively correlated series
    clamp to the length: ESS is reported in [1, len(series)].
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    scale = max(1.0, float(np.max(np.abs(x))))
    x = x - x.mean()
    var = np.dot(x, x) / n
    # variance at rounding level relative to the raw magnitudes: constant
    if var <= (1e-12 * scale) ** 2:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    # pair sums Gamma_k = rho_{2k} + rho_{2k+1}, truncated at first <= 0
    kmax = (n - 1) // 2
    tau = 0.0
    for k in range(kmax):
        gamma = rho[2 * k] + rho[2 * k + 1]
        if gamma <= 0.0:
            break
        tau += gamma
    tau = 2.0 * tau - 1.0
    if tau < 1.0:
        return float(n)  # negative correlation: clamp at the length
    return float(min(n, n / tau))
