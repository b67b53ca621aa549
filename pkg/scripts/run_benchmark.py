#!/usr/bin/env python3
"""Run the TSVD vs sparse-factorization benchmark on the synthetic suite.

Example:
    python scripts/run_benchmark.py --iters 20000 --methods tsvd,sf_chord,sf_ldpc_peg \
        --out bench_report.csv
"""

import argparse
import sys

from qcfactor import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iters", type=int, default=20_000)
    ap.add_argument("--methods", default="tsvd,sf_chord,sf_ldpc_peg")
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="bench_report.csv")
    args = ap.parse_args()
    return cli.run(
        [
            "--jobs", str(args.jobs),
            "bench", "--suite", "synthetic",
            "--methods", args.methods,
            "--iters", str(args.iters),
            "--seeds", args.seeds,
            "--out", args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
