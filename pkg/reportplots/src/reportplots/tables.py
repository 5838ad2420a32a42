"""Readers for the upstream CSV/JSON files, with schema enforcement.

Every delimited file opens with `# config_hash=<16 hex> seed=<int>`.
A figure may combine several inputs; they must all carry the same hash,
otherwise the runs are not comparable and we refuse.
"""

import io
import json
import re
from pathlib import Path

import pandas as pd

_META = re.compile(r"^# config_hash=(?P<hash>[0-9a-f]{16}) seed=(?P<seed>-?\d+)$")

# columns each figure actually references
SCHEMAS = {
    "samples": ("fluctuation",),
    "charfn": ("omega", "re", "im", "stderr"),
    "localclt": ("eps", "p_emp", "p_gauss", "ratio", "ci_lo", "ci_hi", "a"),
    "bounds": ("n", "r", "nr2", "mean_ele", "mean_points", "mean_abs_ani",
               "fluct_l1", "fluct_l2"),
}


class SchemaError(ValueError):
    pass


def read_table(path, kind):
    """Parse one delimited output: (config_hash, seed, DataFrame)."""
    text = Path(path).read_text()
    head, _, rest = text.partition("\n")
    m = _META.match(head.strip())
    if m is None:
        raise SchemaError(f"{path}: missing `# config_hash=... seed=...` "
                          "metadata line")
    frame = pd.read_csv(io.StringIO(rest))
    missing = [c for c in SCHEMAS[kind] if c not in frame.columns]
    if missing:
        raise SchemaError(
            f"{path}: {kind} table lacks column(s) {', '.join(missing)}; "
            f"found {', '.join(frame.columns)}")
    return m.group("hash"), int(m.group("seed")), frame


def read_diagnostics(path):
    """diagnostics.json: config_hash plus the Gaussian limit parameters."""
    payload = json.loads(Path(path).read_text())
    missing = [k for k in ("config_hash", "sigma_z2", "b_z", "n")
               if k not in payload]
    if missing:
        raise SchemaError(f"{path}: diagnostics lack key(s) "
                          f"{', '.join(missing)}")
    return payload


def require_one_hash(pieces):
    """pieces: (path, hash) pairs feeding a single figure."""
    hashes = {h for _, h in pieces}
    if len(hashes) > 1:
        detail = ", ".join(f"{Path(p).name}={h}" for p, h in pieces)
        raise SchemaError(f"config hash mismatch across inputs: {detail}")
