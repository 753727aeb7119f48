"""Ingestion, beat segmentation, the predict/refine/evaluate compression run, benchmarks and plot data."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, run_baseline
from .foba import FobaError, foba_error_curve, knee, knot_pred, parse_norm
from .metrics import compression_ratio, error_report, sample_function
from .spline import KnotError, KnotVector, SamplingError, Signal, SplineModel, eval_model
from .varpro import VpOptions, fit_fixed, vp_optimize

NORM_NAMES = {1: "l1", 2: "l2", np.inf: "linf"}


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class CompressionJob:
    signal: str | None = None
    annotations: str | None = None
    norm: str = "l2"
    knots: int = 25
    auto_knots: bool = False
    tau: float = 0.01
    max_auto_knots: int = 50
    degree: int = 3
    max_iter: int = 4
    jacobian: str = "full"
    delta: int = 1
    term_tol: float = 0.1
    normalize: bool = True
    seed: int = 0
    fs: float | None = None
    workers: int = 1

    def __post_init__(self):
        parse_norm(self.norm)
        if self.knots < 3:
            raise ValueError("knots (n+1) must be at least 3")
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.jacobian not in ("full", "kaufman"):
            raise ValueError("jacobian must be full or kaufman")
        if self.delta < 1:
            raise ValueError("delta must be at least one sample")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")  # does not affect results
        return d

    def vp_options(self) -> VpOptions:
        return VpOptions(max_iter=self.max_iter, mode=self.jacobian, term_tol=self.term_tol)


@dataclass(frozen=True)
class BeatSegment:
    index: int
    start: int
    end: int  # exclusive
    annotation: int | None
    signal: Signal
    skipped: bool = False
    reason: str | None = None


@dataclass
class SegmentResult:
    index: int
    start: int
    end: int
    status: str
    reason: str | None = None
    n: int | None = None
    knots: list | None = None
    coeffs: list | None = None
    foba: dict | None = None
    vp: dict | None = None
    iterations: int | None = None
    fevals: int | None = None
    seconds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("seconds")
        return d


# ---------------------------------------------------------------- ingestion


def _read_rows(text: str) -> list[list[float]]:
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            if not rows and lineno == 1:
                continue  # header
            raise DataError(f"line {lineno}: non-numeric field in {row!r}") from None
    if not rows:
        raise DataError("no data rows")
    width = len(rows[0])
    if width not in (1, 2) or any(len(r) != width for r in rows):
        raise DataError("expected one (f) or two (t,f) columns in every row")
    return rows


def read_annotations(path) -> np.ndarray:
    vals = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals.append(int(line.split(",")[0]))
        except ValueError:
            raise DataError(f"annotation line {lineno}: not an integer sample index") from None
    ann = np.asarray(vals, dtype=np.int64)
    if np.any(np.diff(ann) <= 0):
        raise DataError("annotations must be strictly ascending")
    return ann


def normalize(sig: Signal) -> Signal:
    """Shift to zero mean and scale to unit max-abs; the inverse map is kept in ``meta``."""
    offset = float(sig.f.mean())
    dev = sig.f - offset
    scale = float(np.abs(dev).max()) or 1.0
    meta = dict(sig.meta, normalization={"offset": offset, "scale": scale})
    return Signal(sig.x, dev / scale, sig.annotations, meta)


def ingest(path, fs: float | None = None, annotations=None, normalize_amplitude: bool = False) -> Signal:
    """Read a CSV of ``t,f`` rows or a single ``f`` column sampled at ``fs`` Hz."""
    rows = _read_rows(Path(path).read_text())
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] == 2:
        x, f = arr[:, 0], arr[:, 1]
    else:
        if fs is None or fs <= 0:
            raise DataError("single-column input needs a positive sampling rate (--fs)")
        f = arr[:, 0]
        x = np.arange(f.size) / fs
    ann = None
    if annotations is not None:
        ann = read_annotations(annotations) if not isinstance(annotations, np.ndarray) else annotations
        if ann.size and (ann.min() < 0 or ann.max() >= f.size):
            raise DataError(f"annotation index outside [0, {f.size})")
    try:
        sig = Signal(x, f, ann, {"source": str(path)})
    except SamplingError as exc:
        raise DataError(str(exc)) from None
    return normalize(sig) if normalize_amplitude else sig


def write_signal(sig: Signal, path, annotations_path=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for xi, fi in zip(sig.x, sig.f):
            w.writerow([_fmt(xi), _fmt(fi)])
    if annotations_path is not None and sig.annotations is not None:
        Path(annotations_path).write_text("".join(f"{int(i)}\n" for i in sig.annotations))


# ------------------------------------------------------------- segmentation


def segment_beats(sig: Signal, min_len: int = 0) -> list[BeatSegment]:
    """Split at midpoints between consecutive annotations; short segments are flagged skipped."""
    ann = sig.annotations
    if ann is None or ann.size < 2:
        raise DataError("beat segmentation needs at least two annotations")
    mids = (ann[:-1] + ann[1:]) // 2 + (ann[:-1] + ann[1:]) % 2
    bounds = np.concatenate([[0], mids, [sig.N]])
    out = []
    for i, (s, e) in enumerate(zip(bounds[:-1], bounds[1:])):
        s, e = int(s), int(e)
        short = e - s < max(min_len, 2)
        out.append(
            BeatSegment(
                i,
                s,
                e,
                int(ann[i]),
                sig.segment(s, e) if e > s else None,
                skipped=short,
                reason=f"{e - s} samples < {max(min_len, 2)}" if short else None,
            )
        )
    return out


def _whole(sig: Signal, min_len: int) -> list[BeatSegment]:
    short = sig.N < min_len
    return [BeatSegment(0, 0, sig.N, None, sig, short, f"{sig.N} samples < {min_len}" if short else None)]


# ----------------------------------------------------------------- compress


def denormalized_coeffs(model: SplineModel, meta: dict) -> np.ndarray:
    """Coefficients of ``scale * s(x) + offset``; constants are ``sum_k C_k B_k``."""
    norm = meta.get("normalization")
    if not norm:
        return model.coeffs
    return norm["scale"] * model.coeffs + norm["offset"] * model.knots.scale_factors()


def restore_amplitude(vals: np.ndarray, meta: dict) -> np.ndarray:
    norm = meta.get("normalization")
    return vals if not norm else norm["scale"] * vals + norm["offset"]


def choose_knot_count(segments: list[BeatSegment], job: CompressionJob) -> int:
    """Knee of the mean FOBA error curve over all usable segments."""
    p = parse_norm(job.norm)
    curves = []
    for seg in segments:
        if seg.skipped:
            continue
        m = min(job.max_auto_knots, (seg.signal.N - 1) // job.delta + 1)
        try:
            curves.append(foba_error_curve(seg.signal, m, p, job.delta))
        except (FobaError, ValueError):
            continue
    if not curves:
        raise DataError("no segment usable for automatic knot selection")
    size = min(c.size for c in curves)
    return knee(np.mean([c[:size] for c in curves], axis=0), job.tau)


def _fit_segment(seg: BeatSegment, n: int, job: CompressionJob, meta: dict) -> SegmentResult:
    res = SegmentResult(seg.index, seg.start, seg.end, "ok", n=n)
    if seg.skipped:
        res.status, res.reason = "skipped", seg.reason
        return res
    sig = seg.signal
    p = parse_norm(job.norm)
    try:
        t0 = time.perf_counter()
        init = knot_pred(sig, n, job.delta, p, degree=job.degree)
        init = KnotVector(job.degree, init.interior, init.a, init.b)
        t1 = time.perf_counter()
        foba_model = fit_fixed(sig, init)
        model, report, _ = vp_optimize(sig, init, job.degree, job.vp_options())
        t2 = time.perf_counter()
    except (FobaError, KnotError, np.linalg.LinAlgError) as exc:
        res.status, res.reason = "failed", f"{type(exc).__name__}: {exc}"
        return res
    f = restore_amplitude(sig.f, meta)
    res.foba = error_report(f, restore_amplitude(foba_model(sig.x), meta), n, job.degree).to_dict()
    res.vp = error_report(f, restore_amplitude(model(sig.x), meta), n, job.degree).to_dict()
    res.knots = model.knots.breakpoints.tolist()
    res.coeffs = denormalized_coeffs(model, meta).tolist()
    res.iterations, res.fevals = report.iterations, report.fevals
    res.seconds = {"foba": t1 - t0, "vp": t2 - t1}
    return res


def _aggregate(results: list[SegmentResult], stage: str) -> dict:
    done = [r for r in results if r.status == "ok"]
    if not done:
        return {}
    out = {}
    for key in ("eps1", "eps2", "epsInf"):
        vals = np.array([_stage_value(r, stage, key) for r in done], dtype=float)
        sizes = np.array([r.end - r.start for r in done], dtype=float)
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_weighted"] = float((vals * sizes).sum() / sizes.sum())
    return out


def _stage_value(res: SegmentResult, stage: str, key: str) -> float:
    v = getattr(res, stage)[key]
    return np.nan if v is None else v


def compress(sig: Signal, job: CompressionJob):
    """Fit every beat; returns ``(summary dict, list of SegmentResult, timings dict)``."""
    t0 = time.perf_counter()
    meta = sig.meta
    min_len = 2 * (job.knots - 1 + job.degree)
    segments = segment_beats(sig, min_len) if sig.annotations is not None and sig.annotations.size >= 2 else _whole(sig, min_len)
    n = job.knots - 1
    if job.auto_knots:
        n = choose_knot_count(segments, job) - 1
        min_len = 2 * (n + job.degree)
        segments = [
            s if s.skipped or s.end - s.start >= min_len else BeatSegment(s.index, s.start, s.end, s.annotation, s.signal, True, f"{s.end - s.start} samples < {min_len}")
            for s in segments
        ]
    t1 = time.perf_counter()
    work = lambda s: _fit_segment(s, n, job, meta)  # noqa: E731
    if job.workers > 1:
        with ThreadPoolExecutor(job.workers) as pool:
            results = list(pool.map(work, segments))
    else:
        results = [work(s) for s in segments]
    t2 = time.perf_counter()
    done = [r for r in results if r.status == "ok"]
    samples = sum(r.end - r.start for r in done)
    summary = {
        "job": job.to_dict(),
        "N": sig.N,
        "segments": len(results),
        "fitted": len(done),
        "skipped": sum(r.status == "skipped" for r in results),
        "failed": sum(r.status == "failed" for r in results),
        "n": n,
        "knots": n + 1,
        "degree": job.degree,
        "samples_fitted": samples,
        "CR": compression_ratio(samples, n, job.degree, len(done)) if done else None,
        "foba": _aggregate(results, "foba"),
        "vp": _aggregate(results, "vp"),
        "normalization": meta.get("normalization"),
    }
    timings = {
        "segmentation": t1 - t0,
        "fit": t2 - t1,
        "foba": sum(r.seconds.get("foba", 0.0) for r in results),
        "vp": sum(r.seconds.get("vp", 0.0) for r in results),
    }
    return summary, results, timings


def reconstruct(sig: Signal, results: list[SegmentResult], degree: int) -> np.ndarray:
    """Dense reconstruction from stored (de-normalized) segment models; NaN where not fitted."""
    out = np.full(sig.N, np.nan)
    for r in results:
        if r.status != "ok":
            continue
        bp = np.asarray(r.knots)
        kv = KnotVector(degree, bp[1:-1], bp[0], bp[-1])
        out[r.start : r.end] = eval_model(SplineModel(kv, np.asarray(r.coeffs)), sig.x[r.start : r.end])
    return out


# ------------------------------------------------------------------ output


def _fmt(v) -> str:
    return format(float(v), ".17g")


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_compression(out, sig: Signal, summary, results, timings, dense: bool = True) -> None:
    out = Path(out)
    (out / "models").mkdir(parents=True, exist_ok=True)
    dump_json(summary, out / "summary.json")
    dump_json(timings, out / "timings.json")
    for r in results:
        dump_json(r.to_dict(), out / "models" / f"segment_{r.index:05d}.json")
    if dense:
        rec = reconstruct(sig, results, summary["degree"])
        orig = restore_amplitude(sig.f, sig.meta)
        with open(out / "reconstruction.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f", "reconstruction"])
            for row in zip(sig.x, orig, rec):
                w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------- bench

# (function, N, n+1, measure, norm, reference iterations, reference value, noise)
TABLE2 = (
    ("f1", 256, 8, "rss", "linf", 4, 7.9950, (-0.3, 0.3)),
    ("f2", 49, 9, "rss", "linf", 20, 0.00209, None),
    ("f3", 101, 15, "mse", "l2", 4, 0.00019, None),
    ("f4", 200, 15, "mse", "l1", 4, 0.00082, (-0.05, 0.05)),
    ("f2", 49, 7, "bre", "l1", 5, 0.01325, None),
    ("f2", 49, 8, "bre", "linf", 6, 0.00874, None),
    ("f3", 201, 6, "bic", "l1", 7, 332.0, None),
    ("f5", 201, 7, "bic", "linf", 14, 471.0, None),
    ("f6", 201, 10, "bic", "l2", 19, 1491.0, None),
)

BENCH_FIELDS = ("function", "N", "knots", "norm", "measure", "value", "target", "iterations", "fevals", "target_iterations", "seconds", "status")


def bench_row(row, seed: int = 0, f2_path=None, degree: int = 3) -> dict:
    name, N, k, measure, norm, nit, target, noise = row
    rec = dict(function=name, N=N, knots=k, norm=norm, measure=measure, target=target, target_iterations=nit)
    try:
        sig = sample_function(name, N, f2_path)
    except FileNotFoundError as exc:
        return dict(rec, value=None, iterations=None, fevals=None, seconds=None, status=f"skipped: {exc}")
    if noise is not None:
        from .metrics import add_noise

        sig = add_noise(sig, *noise, seed=seed)
    t0 = time.perf_counter()
    init = knot_pred(sig, k - 1, 1, parse_norm(norm), degree=degree)
    model, report, _ = vp_optimize(sig, init, degree, VpOptions(max_iter=nit, term_tol=0.0))
    secs = time.perf_counter() - t0
    rep = error_report(sig.f, model(sig.x), k - 1, degree)
    return dict(rec, value=getattr(rep, measure), iterations=report.iterations, fevals=report.fevals, seconds=secs, status="ok")


def bench(suite: str = "table2", seed: int = 0, f2_path=None) -> list[dict]:
    if suite != "table2":
        raise ValueError(f"unknown suite {suite!r}")
    return [bench_row(r, seed, f2_path) for r in TABLE2]


def write_rows(rows: list[dict], path, fields=None, drop=()) -> None:
    fields = [f for f in (fields or list(rows[0])) if f not in drop]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow(["" if r[f] is None else _fmt(r[f]) if isinstance(r[f], (float, np.floating)) else r[f] for f in fields])


# ----------------------------------------------------------- plot data


def emit_plot_data(model: SplineModel, sig: Signal, path, curve=None, curve_path=None) -> None:
    """Write ``x, f, reconstruction`` rows followed by one marker row per knot.

    Marker rows have ``kind = knot`` and the knot abscissa and model value.
    An optional FOBA error curve goes to ``curve_path`` as ``knots, error``.
    """
    rec = eval_model(model, sig.x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "x", "f", "reconstruction"])
        for row in zip(sig.x, sig.f, rec):
            w.writerow(["sample", *(_fmt(v) for v in row)])
        bp = model.knots.breakpoints
        for xk, yk in zip(bp, eval_model(model, bp)):
            w.writerow(["knot", _fmt(xk), "", _fmt(yk)])
    if curve is not None and curve_path is not None:
        with open(curve_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["knots", "error"])
            for k, e in enumerate(curve):
                w.writerow([k + 2, _fmt(e)])


def run_baseline_job(sig: Signal, method: str, job: CompressionJob) -> tuple[dict, list[SegmentResult]]:
    """Run a baseline on every segment with the same bookkeeping as :func:`compress`."""
    cfg = BaselineConfig(method, job.knots, job.seed, job.max_iter)
    meta = sig.meta
    n = job.knots - 1
    min_len = 2 * (n + job.degree)
    segments = segment_beats(sig, min_len) if sig.annotations is not None and sig.annotations.size >= 2 else _whole(sig, min_len)
    results = []
    for seg in segments:
        res = SegmentResult(seg.index, seg.start, seg.end, "ok", n=n)
        if seg.skipped:
            res.status, res.reason = "skipped", seg.reason
        else:
            s = seg.signal
            seeded = BaselineConfig(method, job.knots, None if job.seed is None else job.seed + seg.index, job.max_iter)
            try:
                model, report = run_baseline(s, seeded if method == "RVP" else cfg, job.degree, job.vp_options())
            except (KnotError, np.linalg.LinAlgError) as exc:
                res.status, res.reason = "failed", f"{type(exc).__name__}: {exc}"
            else:
                res.vp = error_report(restore_amplitude(s.f, meta), restore_amplitude(model(s.x), meta), n, job.degree).to_dict()
                res.knots = model.knots.breakpoints.tolist()
                res.coeffs = denormalized_coeffs(model, meta).tolist()
                if report is not None:
                    res.iterations, res.fevals = report.iterations, report.fevals
        results.append(res)
    done = [r for r in results if r.status == "ok"]
    summary = {
        "job": dict(job.to_dict(), method=method),
        "segments": len(results),
        "fitted": len(done),
        "vp": _aggregate(results, "vp"),
        "CR": compression_ratio(sum(r.end - r.start for r in done), n, job.degree, len(done)) if done else None,
    }
    return summary, results
