#!/usr/bin/env python3
"""Write the CSV data for every figure into one directory."""

import argparse
import sys
import time
from pathlib import Path

from g2gas import cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", nargs="+", choices=cli.FIGURES, default=list(cli.FIGURES))
    args = ap.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in args.only:
        t0 = time.perf_counter()
        code = cli.main(["figure", name, "--jobs", str(args.jobs), "--out", str(args.outdir / f"{name}.csv")])
        print(f"{name}: exit {code} in {time.perf_counter() - t0:.1f}s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
