"""The four figure kinds.

All rendering is deterministic: fixed bin rules, fixed guide-line
anchors, no clocks, no randomness, Agg backend.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FIG_KW = {"figsize": (6.4, 4.2), "dpi": 110}


def _new_axes(title):
    fig, ax = plt.subplots(**_FIG_KW)
    ax.set_title(title)
    return fig, ax


def _finish(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def histogram(samples, diag, out_path):
    """Fluctuation histogram with the limiting Gaussian density."""
    x = samples["fluctuation"].to_numpy(dtype=float)
    mu, var = float(diag["b_z"]), float(diag["sigma_z2"])
    fig, ax = _new_axes(f"linear statistic fluctuations, N={diag['n']}")
    span = 5.0 * np.sqrt(var)
    edges = np.linspace(mu - span, mu + span, 61)
    ax.hist(x, bins=edges, density=True, alpha=0.55, color="#4878a8",
            label=f"{x.size} samples")
    grid = np.linspace(mu - span, mu + span, 400)
    pdf = np.exp(-0.5 * (grid - mu) ** 2 / var) / np.sqrt(2.0 * np.pi * var)
    ax.plot(grid, pdf, "k-", lw=1.6,
            label=f"Gaussian ({mu:.3f}, {var:.4f})")
    ax.set_xlabel("fluctuation")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    return _finish(fig, out_path)


def decay(charfn, out_path):
    """|charfn| against frequency, log-log, with a slope -2 guide."""
    w = charfn["omega"].to_numpy(dtype=float)
    mag = np.hypot(charfn["re"], charfn["im"]).to_numpy(dtype=float)
    se = charfn["stderr"].to_numpy(dtype=float)
    keep = w > 0
    w, mag, se = w[keep], mag[keep], se[keep]
    fig, ax = _new_axes("characteristic function decay")
    ax.loglog(w, mag, "o-", ms=3, lw=0.9, color="#4878a8", label="|F(w)|")
    ax.fill_between(w, np.maximum(mag - se, 1e-12), mag + se,
                    color="#4878a8", alpha=0.25, lw=0)
    # guide anchored on the first clearly resolved point past w=2
    window = (w >= 2.0) & (mag > 3.0 * se)
    if window.any():
        w0, m0 = w[window][0], mag[window][0]
        ax.loglog(w[w >= 2.0], m0 * (w0 / w[w >= 2.0]) ** 2, "k--", lw=1.0,
                  label="1/w^2 guide")
    ax.set_xlabel("w")
    ax.set_ylabel("|F(w)|")
    ax.legend(frameon=False)
    return _finish(fig, out_path)


def ratio(localclt, out_path):
    """Local window mass against the Gaussian prediction, per center."""
    fig, ax = _new_axes("local CLT window ratios")
    for a, block in localclt.groupby("a", sort=True):
        ok = np.isfinite(block["ratio"])
        if not ok.any():
            continue
        blk = block[ok].sort_values("eps")
        line, = ax.plot(blk["eps"], blk["ratio"], "o-", ms=4,
                        label=f"a = {a:.3f}")
        ax.fill_between(blk["eps"], blk["ci_lo"], blk["ci_hi"],
                        alpha=0.2, color=line.get_color(), lw=0)
    ax.axhline(1.0, color="k", lw=1.0, ls=":")
    ax.set_xscale("log")
    ax.set_xlabel("window half width")
    ax.set_ylabel("empirical / Gaussian")
    ax.legend(frameon=False)
    return _finish(fig, out_path)


def scaling(bounds, out_path):
    """Window statistics against N r^2, plus fluctuation norm levels."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.6, 4.2), dpi=110)
    x = bounds["nr2"].to_numpy(dtype=float)
    for col, marker, label in (("mean_ele", "o", "electric energy"),
                               ("mean_points", "s", "point count")):
        y = bounds[col].to_numpy(dtype=float)
        ok = np.isfinite(y)
        left.loglog(x[ok], y[ok], marker, ms=5, ls="-", lw=0.8, label=label)
    finite = np.isfinite(bounds["mean_ele"].to_numpy(dtype=float))
    if finite.any():
        anchor_x = x[finite][0]
        anchor_y = bounds["mean_ele"].to_numpy(dtype=float)[finite][0]
        left.loglog(np.sort(x), anchor_y * np.sort(x) / anchor_x, "k--",
                    lw=1.0, label="slope 1")
    left.set_xlabel("N r^2")
    left.set_ylabel("window mean")
    left.set_title("a priori scaling")
    left.legend(frameon=False)

    per_n = bounds.drop_duplicates("n").sort_values("n")
    for col, marker in (("fluct_l1", "o"), ("fluct_l2", "s")):
        right.semilogx(per_n["n"], per_n[col], marker, ls="-", ms=5,
                       label=col.replace("fluct_", "L") )
    right.set_xlabel("N")
    right.set_ylabel("fluctuation norm")
    right.set_title("boundedness across N")
    right.set_ylim(bottom=0.0)
    right.legend(frameon=False)
    return _finish(fig, out_path)
