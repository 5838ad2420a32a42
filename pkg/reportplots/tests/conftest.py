"""Synthetic fixtures shaped exactly like the upstream CLI outputs."""

import json

import numpy as np
import pytest

HASH = "deadbeefdeadbeef"
META = f"# config_hash={HASH} seed=7"
SIG2 = 3.0 / 11.0


def _csv(path, header, rows):
    lines = [META, header]
    lines += [",".join("%.17g" % v if isinstance(v, float) else str(v)
                       for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture()
def run_dir(tmp_path):
    """A directory holding one synthetic run's worth of outputs."""
    rng = np.random.default_rng(5)
    x = rng.normal(0.0, np.sqrt(SIG2), 2000)
    _csv(tmp_path / "samples.csv",
         "chain,sweep,fluctuation,gradsq_fluct,energy,points_in_supp",
         [(i % 2, 2 * i, float(v), float(3.0 * v), -10.0 + 0.01 * (i % 7), 64)
          for i, v in enumerate(x)])

    (tmp_path / "diagnostics.json").write_text(json.dumps({
        "config_hash": HASH, "seed": 7, "n": 64, "sigma_z2": SIG2,
        "b_z": 0.0, "total_ess": 800.0, "chains": []}) + "\n")

    omegas = np.linspace(0.0, 20.0, 81)
    _csv(tmp_path / "charfn.csv", "omega,re,im,stderr",
         [(float(w), float(np.exp(-0.5 * w * w * SIG2)), 0.0, 0.005)
          for w in omegas])

    rows = []
    for a in (0.0, 0.52):
        for eps, ratio in ((0.1, 1.05), (0.2, 1.01), (0.4, 0.99)):
            rows.append((eps, 0.1, 0.1 / ratio, ratio, ratio - 0.08,
                         ratio + 0.08, a))
    rows.append((0.05, 0.0, 0.01, float("nan"), float("nan"), float("nan"),
                 0.52))
    _csv(tmp_path / "localclt.csv", "eps,p_emp,p_gauss,ratio,ci_lo,ci_hi,a",
         rows)

    rows = []
    for n in (64, 128):
        for r in (0.3, 0.6):
            nr2 = n * r * r
            ele = 7.5 * nr2 if n <= 64 else float("nan")
            ani = 50.0 if n <= 64 else float("nan")
            rows.append((n, r, nr2, ele, 1.04 * nr2, ani,
                         0.40 + 0.001 * n / 64, 0.48 + 0.001 * n / 64))
    _csv(tmp_path / "bounds.csv",
         "n,r,nr2,mean_ele,mean_points,mean_abs_ani,fluct_l1,fluct_l2", rows)
    return tmp_path
