"""Synthetic benchmark rows, each value next to its reference target.

    python3 scripts/reproduce_table2.py [--f2 titanium.csv] [--seed 0] [--out rows.csv]

Rows for the tabulated f2 data are skipped unless ``--f2`` points to a
CSV of ``x,f`` rows.
"""

from __future__ import annotations

import argparse

from freeknot import pipeline as pl


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--f2", default=None)
    ap.add_argument("--seed", type=int, default=0, help="noise seed for the noisy rows")
    ap.add_argument("--out", default=None, help="optional CSV output")
    args = ap.parse_args()

    rows = pl.bench("table2", args.seed, args.f2)
    print(f"{'fn':<4}{'N':>5}{'knots':>7}{'norm':>6}{'measure':>9}{'ours':>13}{'target':>13}{'it':>5}{'fev':>5}{'sec':>7}")
    for r in rows:
        if r["status"] != "ok":
            print(f"{r['function']:<4}{r['N']:>5}{r['knots']:>7}{r['norm']:>6}{r['measure']:>9}   {r['status']}")
            continue
        print(
            f"{r['function']:<4}{r['N']:>5}{r['knots']:>7}{r['norm']:>6}{r['measure']:>9}"
            f"{r['value']:>13.5g}{r['target']:>13.5g}{r['iterations']:>5}{r['fevals']:>5}{r['seconds']:>7.3f}"
        )
    if args.out:
        pl.write_rows(rows, args.out, pl.BENCH_FIELDS)


if __name__ == "__main__":
    main()
