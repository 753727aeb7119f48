"""Compare knot strategies on synthetic ECG trains.

    python3 scripts/ecg_study.py [--seeds 3] [--beats 60] [--knots 25] [--kr-beats 10]

Methods: FOBA prediction alone, FOBA followed by VP with the full and the
Kaufman Jacobian, and the KR, UVP and RVP baselines.  KR is slow, so it
runs on the first ``--kr-beats`` beats of each train (0 disables it).
All VP runs take exactly ``--iters`` steps.  Reports mean PRDN per beat
and the compression ratio.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from freeknot import pipeline as pl
from freeknot.metrics import compression_ratio, synthetic_ecg
from freeknot.spline import Signal


def _head(sig: Signal, beats: int) -> Signal:
    """The first ``beats`` beats of a train, cut at the midpoint after the last kept R peak."""
    ann = sig.annotations
    if beats >= ann.size:
        return sig
    stop = int((ann[beats - 1] + ann[beats]) // 2)
    out = sig.segment(0, stop)
    return Signal(out.x, out.f, ann[:beats], dict(sig.meta))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--beats", type=int, default=60)
    ap.add_argument("--knots", type=int, default=25)
    ap.add_argument("--iters", type=int, default=4)
    ap.add_argument("--kr-beats", type=int, default=10)
    args = ap.parse_args()

    table: dict[str, list[float]] = {}
    secs: dict[str, float] = {}

    def add(name, value, seconds):
        table.setdefault(name, []).append(value)
        secs[name] = secs.get(name, 0.0) + seconds

    for seed in range(args.seeds):
        sig = pl.normalize(synthetic_ecg(args.beats, seed=seed))
        for mode in ("full", "kaufman"):
            job = pl.CompressionJob(knots=args.knots, max_iter=args.iters, term_tol=0.0, jacobian=mode, seed=seed)
            t0 = time.perf_counter()
            summary, _, _ = pl.compress(sig, job)
            dt = time.perf_counter() - t0
            if mode == "full":
                add("FOBA", summary["foba"]["eps2_mean"], 0.0)
            add(f"FOBA+VP ({mode})", summary["vp"]["eps2_mean"], dt)
        job = pl.CompressionJob(knots=args.knots, max_iter=args.iters, term_tol=0.0, seed=seed)
        for method in ("UVP", "RVP"):
            t0 = time.perf_counter()
            s, _ = pl.run_baseline_job(sig, method, job)
            add(method, s["vp"]["eps2_mean"], time.perf_counter() - t0)
        if args.kr_beats > 0:
            t0 = time.perf_counter()
            s, _ = pl.run_baseline_job(_head(sig, args.kr_beats), "KR", job)
            add(f"KR ({args.kr_beats} beats)", s["vp"]["eps2_mean"], time.perf_counter() - t0)
        print(f"seed {seed}: " + ", ".join(f"{k} {v[-1]:.2f}" for k, v in table.items()), flush=True)

    beat_len = 0.8 * 360
    print(f"\nmean PRDN over {args.seeds} seeds x {args.beats} beats, {args.knots} knots (CR about {compression_ratio(int(beat_len), args.knots - 1, 3):.2f}):")
    for name, vals in table.items():
        print(f"  {name:<22}{np.mean(vals):8.2f} %   +- {np.std(vals):5.2f}   {secs[name]:8.1f} s")


if __name__ == "__main__":
    main()
