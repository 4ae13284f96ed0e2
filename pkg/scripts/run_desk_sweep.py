#!/usr/bin/env python3
"""BER sweep on the desk profile (M=32, C=4, K=4, 16-QAM).

Compares the centralized solvers against the chain algorithms over an
Es/N0 grid at fixed IoT, with paired noise/data across algorithms.
Writes results.csv to --out and prints the table.
"""
import argparse

from chainmmse import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--symbols", type=int, default=500)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="out/desk_sweep")
    parser.add_argument("--sweeps", type=int, default=4,
                        help="BCD sweep count L")
    args = parser.parse_args()
    return cli.main([
        "run", "--profile", "desk",
        "--trials", str(args.trials),
        "--symbols", str(args.symbols),
        "--seed", str(args.seed),
        "--out", args.out,
        "--algorithms", f"zf,mmse_exactR,mmse_sampleR,bdac,bcd:1,bcd:{args.sweeps}",
    ])


if __name__ == "__main__":
    raise SystemExit(main())
