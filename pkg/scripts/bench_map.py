#!/usr/bin/env python3
"""Time the 200x200 resonant g2(0) map for several worker counts and check the bytes agree."""

import argparse
import hashlib
import time

import numpy as np

from g2gas import MediumParams, SweepSpec, run_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--jobs", type=int, nargs="+", default=[1, 2, 8])
    ap.add_argument("--n", type=int, default=200)
    args = ap.parse_args(argv)
    spec = SweepSpec.build("g2_zero", {"od": np.linspace(0, 10, args.n),
                                       "delta": np.linspace(-1.5, 1.5, args.n)},
                           MediumParams(beta=1e-2))
    digests = set()
    for jobs in args.jobs:
        t0 = time.perf_counter()
        r = run_sweep(spec, jobs=jobs, use_cache=False)
        digest = hashlib.sha256(r.to_bytes()).hexdigest()[:16]
        digests.add(digest)
        print(f"jobs={jobs:2d} {time.perf_counter() - t0:6.2f}s sha256={digest} min g2={np.nanmin(r.values):.2e}")
    print("identical" if len(digests) == 1 else "MISMATCH")
    return 0 if len(digests) == 1 else 1


if __name__ == "__main__":
    raise SystemExit(main())
