"""Error against knot budget on a synthetic ECG train.

    python3 scripts/knot_budget.py [--beats 20] [--seed 0] [--counts 10 15 20 25 30 40]

For each knot count prints the mean FOBA error curve value, the PRDN of
FOBA+VP and of UVP, and the compression ratio; the knee the automatic
knot selection would choose is marked.
"""

from __future__ import annotations

import argparse

import numpy as np

from freeknot import pipeline as pl
from freeknot.metrics import compression_ratio, synthetic_ecg


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--beats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--counts", type=int, nargs="+", default=[10, 15, 20, 25, 30, 40])
    ap.add_argument("--tau", type=float, default=0.01)
    args = ap.parse_args()

    sig = pl.normalize(synthetic_ecg(args.beats, seed=args.seed))
    segments = pl.segment_beats(sig)
    knee = pl.choose_knot_count(segments, pl.CompressionJob(tau=args.tau, max_auto_knots=max(args.counts)))
    fitted = [s for s in segments if not s.skipped]
    samples = sum(s.end - s.start for s in fitted)

    print(f"{'knots':>6}{'FOBA+VP':>10}{'UVP':>9}{'FOBA':>9}{'CR':>8}")
    for k in sorted(set(args.counts) | {knee}):
        job = pl.CompressionJob(knots=k, term_tol=0.0, seed=args.seed)
        summary, _, _ = pl.compress(sig, job)
        uvp, _ = pl.run_baseline_job(sig, "UVP", job)
        cr = compression_ratio(samples, k - 1, 3, len(fitted))
        mark = "  <- knee" if k == knee else ""
        print(f"{k:>6}{summary['vp']['eps2_mean']:>10.2f}{uvp['vp']['eps2_mean']:>9.2f}{summary['foba']['eps2_mean']:>9.2f}{cr:>8.2f}{mark}")
    print(f"\nknee of the mean FOBA error curve (tau = {args.tau}): {knee} knots; {np.mean([s.end - s.start for s in fitted]):.0f} samples per beat")


if __name__ == "__main__":
    main()
