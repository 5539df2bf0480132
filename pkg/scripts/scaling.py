#!/usr/bin/env python3
"""Fitted time-vs-N exponents for cross compression and the dense-vector apply."""

import argparse

from qttie import bench


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", default="8,16,32", help="points per axis for compression")
    ap.add_argument("--levels", default="12,18", help="first,last binary level for the apply")
    ap.add_argument("--rank", type=int, default=8)
    ap.add_argument("--eps", type=float, default=1e-6)
    args = ap.parse_args()

    pts = tuple(int(s) for s in args.points.split(","))
    sizes, times, ranks, expo = bench.compress_scaling(pts, args.eps)
    for n, t, r in zip(sizes, times, ranks):
        print(f"compress N={n:>8}  {t:8.2f}s  max rank {r}")
    print(f"compress exponent {expo:.2f}")

    lo, hi = (int(s) for s in args.levels.split(","))
    sizes, times, expo = bench.matvec_scaling(range(lo, hi + 1), args.rank, repeats=5)
    for n, t in zip(sizes, times):
        print(f"apply    N={n:>8}  {t * 1e3:8.2f}ms")
    print(f"apply exponent {expo:.2f}")


if __name__ == "__main__":
    main()
