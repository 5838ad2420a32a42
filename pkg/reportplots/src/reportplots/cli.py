"""`plots` command: render figures from a directory of CLI outputs."""

import argparse
import sys
from pathlib import Path

from . import figures
from .tables import (SchemaError, read_diagnostics, read_table,
                     require_one_hash)

ALL_KINDS = ("histogram", "decay", "ratio", "scaling")

# figure kind -> the files it consumes inside --in
INPUTS = {
    "histogram": ("samples.csv", "diagnostics.json"),
    "decay": ("charfn.csv",),
    "ratio": ("localclt.csv",),
    "scaling": ("bounds.csv",),
}


def _render(kind, src, dest):
    if kind == "histogram":
        samples_path = src / "samples.csv"
        diag_path = src / "diagnostics.json"
        h, _, frame = read_table(samples_path, "samples")
        diag = read_diagnostics(diag_path)
        require_one_hash([(samples_path, h),
                          (diag_path, diag["config_hash"])])
        return figures.histogram(frame, diag, dest / "histogram.png")
    name = INPUTS[kind][0]
    _, _, frame = read_table(src / name, Path(name).stem)
    return getattr(figures, kind)(frame, dest / f"{kind}.png")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from CLI output CSVs")
    parser.add_argument("--in", dest="src", required=True,
                        help="directory holding the CSV/JSON outputs")
    parser.add_argument("--out", dest="dest", required=True,
                        help="directory for the rendered images")
    parser.add_argument("--kinds", default=",".join(ALL_KINDS),
                        help="comma separated subset of: " +
                        ", ".join(ALL_KINDS))
    args = parser.parse_args(argv)

    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    unknown = [k for k in kinds if k not in ALL_KINDS]
    if unknown:
        print(f"error: unknown figure kind(s): {', '.join(unknown)}",
              file=sys.stderr)
        return 2

    src, dest = Path(args.src), Path(args.dest)
    missing = [str(src / name) for k in kinds for name in INPUTS[k]
               if not (src / name).exists()]
    if missing:
        print("error: missing input file(s): " + ", ".join(missing),
              file=sys.stderr)
        return 2

    dest.mkdir(parents=True, exist_ok=True)
    try:
        for kind in kinds:
            out_path = _render(kind, src, dest)
            print(f"wrote {out_path}")
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
