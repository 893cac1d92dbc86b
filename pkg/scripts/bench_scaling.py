#!/usr/bin/env python3
"""Benchmark the selective-scan implementations against a quadratic
attention baseline across sequence lengths and fit log-log exponents."""

import argparse

from dancesynth.scan import bench_rows_to_csv, bench_scan, fit_exponent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--min-len", type=int, default=256)
    ap.add_argument("--max-len", type=int, default=4096)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--out", default="", help="optional csv output path")
    args = ap.parse_args()

    lengths = [args.min_len]
    while lengths[-1] < args.max_len:
        lengths.append(lengths[-1] * 2)
    rows = bench_scan(lengths, repeats=args.repeats)
    csv = bench_rows_to_csv(rows)
    print(csv, end="")
    for impl in ("sequential", "parallel", "attention"):
        print(f"exponent {impl}: {fit_exponent(rows, impl):.3f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)


if __name__ == "__main__":
    main()
