"""Command-line entry point: ``freeknot <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .baselines import METHODS
from .foba import FobaError, foba_error_curve, knee, knot_pred, parse_norm, predict_indices
from .metrics import DOMAINS, add_noise, error_report, sample_function, synthetic_ecg
from .spline import KnotError, KnotVector, SamplingError, SplineModel
from .varpro import vp_optimize

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, fit: bool = True) -> None:
    p.add_argument("--norm", default="l2", choices=("l1", "l2", "linf"), help="FOBA norm")
    p.add_argument("--knots", type=int, default=25, help="total knots n+1, ends included")
    p.add_argument("--auto-knots", action="store_true", help="pick the knot count at the knee of the FOBA error curve")
    p.add_argument("--tau", type=float, default=0.01, help="knee threshold")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--delta", type=int, default=1, help="minimum knot spacing in samples")
    p.add_argument("--fs", type=float, default=None, help="sampling rate for single-column input")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    if fit:
        p.add_argument("--max-iter", type=int, default=4)
        p.add_argument("--jacobian", default="full", choices=("full", "kaufman"))
        p.add_argument("--term-tol", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="freeknot", description="Free-knot B-spline approximation by FOBA knot prediction and variable projection.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="sample a test function or a synthetic ECG train")
    p.add_argument("function", choices=(*sorted(DOMAINS), "ecg"))
    p.add_argument("--N", type=int, default=201, help="samples (test functions)")
    p.add_argument("--beats", type=int, default=10, help="beats (ecg)")
    p.add_argument("--noise", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("--fs", type=float, default=360.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path; ECG annotations go to <out>.ann")

    p = sub.add_parser("predict", help="FOBA knot prediction")
    p.add_argument("signal")
    p.add_argument("--annotations", default=None)
    p.add_argument("--max-knots", type=int, default=50, help="length of the exported error curve")
    _common(p, fit=False)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="FOBA prediction refined by variable projection on the whole signal")
    p.add_argument("signal")
    _common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compress", help="beat-wise compression")
    p.add_argument("signal")
    p.add_argument("--annotations", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-dense", action="store_true", help="skip the reconstruction CSV")
    _common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("baseline", help="KR, UVP or RVP on every beat")
    p.add_argument("signal")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--annotations", default=None)
    _common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="reproduce the synthetic benchmark rows")
    p.add_argument("--suite", default="table2", choices=("table2",))
    p.add_argument("--f2", default=None, help="CSV with the titanium heat data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path")

    p = sub.add_parser("plot-data", help="samples, reconstruction and knot markers of a fitted model")
    p.add_argument("signal")
    p.add_argument("--model", required=True, help="model JSON written by fit")
    p.add_argument("--curve", action="store_true", help="also export the FOBA error curve")
    p.add_argument("--max-knots", type=int, default=50)
    p.add_argument("--norm", default="l2", choices=("l1", "l2", "linf"))
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--out", required=True, help="CSV path")
    return ap


def _job(args, **extra) -> pl.CompressionJob:
    return pl.CompressionJob(
        signal=args.signal,
        annotations=getattr(args, "annotations", None),
        norm=args.norm,
        knots=args.knots,
        auto_knots=args.auto_knots,
        tau=args.tau,
        degree=args.degree,
        max_iter=getattr(args, "max_iter", 4),
        jacobian=getattr(args, "jacobian", "full"),
        delta=args.delta,
        term_tol=getattr(args, "term_tol", 0.1),
        normalize=args.normalize,
        seed=args.seed,
        fs=args.fs,
        **extra,
    )


def _load(args, normalize: bool):
    return pl.ingest(args.signal, args.fs, getattr(args, "annotations", None), normalize)


def model_to_dict(model: SplineModel) -> dict:
    kv = model.knots
    return {"degree": kv.degree, "a": kv.a, "b": kv.b, "interior": kv.interior.tolist(), "coeffs": np.asarray(model.coeffs).tolist()}


def model_from_dict(d: dict) -> SplineModel:
    return SplineModel(KnotVector(d["degree"], np.asarray(d["interior"], dtype=float), d["a"], d["b"]), np.asarray(d["coeffs"], dtype=float))


def cmd_synth(args) -> int:
    if args.function == "ecg":
        sig = synthetic_ecg(args.beats, args.seed, fs=args.fs)
    else:
        sig = sample_function(args.function, args.N)
    if args.noise is not None:
        sig = add_noise(sig, *args.noise, seed=args.seed)
    ann = args.out + ".ann" if sig.annotations is not None else None
    pl.write_signal(sig, args.out, ann)
    return EXIT_OK


def _knot_count(sig, job) -> int:
    if not job.auto_knots:
        return job.knots
    m = min(job.max_auto_knots, (sig.N - 1) // job.delta + 1)
    return knee(foba_error_curve(sig, m, parse_norm(job.norm), job.delta), job.tau)


def cmd_predict(args) -> int:
    sig = _load(args, args.normalize)
    job = _job(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = parse_norm(job.norm)
    k = _knot_count(sig, job)
    trace = predict_indices(sig, k - 1, job.delta, p)
    curve = foba_error_curve(sig, min(args.max_knots, (sig.N - 1) // job.delta + 1), p, job.delta)
    pl.dump_json(
        {"job": job.to_dict(), "knots": k, "indices": trace.knots, "x": [float(sig.x[i]) for i in trace.knots], "order": trace.order},
        out / "knots.json",
    )
    pl.write_rows([{"knots": i + 2, "error": float(e)} for i, e in enumerate(curve)], out / "error_curve.csv")
    return EXIT_OK


def cmd_fit(args) -> int:
    sig = _load(args, args.normalize)
    job = _job(args)
    k = _knot_count(sig, job)
    init = knot_pred(sig, k - 1, job.delta, parse_norm(job.norm), degree=job.degree)
    model, report, _ = vp_optimize(sig, init, job.degree, job.vp_options())
    meta = sig.meta
    out_model = SplineModel(model.knots, pl.denormalized_coeffs(model, meta))
    f = pl.restore_amplitude(sig.f, meta)
    rep = error_report(f, out_model(sig.x), k - 1, job.degree)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pl.dump_json(model_to_dict(out_model), out / "model.json")
    pl.dump_json(
        {
            "job": job.to_dict(),
            "knots": k,
            "initial_knots": init.interior.tolist(),
            "errors": rep.to_dict(),
            "iterations": report.iterations,
            "fevals": report.fevals,
            "objective": report.objective,
            "stalled": report.stalled,
            "terminated": report.terminated,
        },
        out / "report.json",
    )
    pl.dump_json({"vp": report.seconds}, out / "timings.json")
    return EXIT_OK


def cmd_compress(args) -> int:
    sig = _load(args, args.normalize)
    job = _job(args, workers=args.workers)
    summary, results, timings = pl.compress(sig, job)
    pl.write_compression(args.out, sig, summary, results, timings, dense=not args.no_dense)
    return EXIT_OK if summary["fitted"] or not results else EXIT_NUMERIC


def cmd_baseline(args) -> int:
    sig = _load(args, args.normalize)
    job = _job(args)
    summary, results = pl.run_baseline_job(sig, args.method, job)
    out = Path(args.out)
    (out / "models").mkdir(parents=True, exist_ok=True)
    pl.dump_json(summary, out / "summary.json")
    for r in results:
        pl.dump_json(r.to_dict(), out / "models" / f"segment_{r.index:05d}.json")
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = pl.bench(args.suite, args.seed, args.f2)
    pl.write_rows(rows, args.out, pl.BENCH_FIELDS, drop=("seconds",))
    pl.write_rows(rows, Path(args.out).with_suffix(".timings.csv"), ("function", "N", "knots", "measure", "seconds"))
    return EXIT_OK


def cmd_plot_data(args) -> int:
    sig = pl.ingest(args.signal, args.fs)
    model = model_from_dict(json.loads(Path(args.model).read_text()))
    curve = foba_error_curve(sig, min(args.max_knots, sig.N), parse_norm(args.norm)) if args.curve else None
    curve_path = Path(args.out).with_suffix(".curve.csv") if args.curve else None
    pl.emit_plot_data(model, sig, args.out, curve, curve_path)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "predict": cmd_predict,
    "fit": cmd_fit,
    "compress": cmd_compress,
    "baseline": cmd_baseline,
    "bench": cmd_bench,
    "plot-data": cmd_plot_data,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (pl.DataError, SamplingError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"freeknot: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (KnotError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"freeknot: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FobaError, ValueError) as exc:
        print(f"freeknot: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
