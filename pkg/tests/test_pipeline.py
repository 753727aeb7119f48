import csv
import json

import numpy as np
import pytest

from freeknot import pipeline as pl
from freeknot.spline import KnotVector, Signal, SplineModel, eval_model


def _job(**kw):
    return pl.CompressionJob(**kw)


def test_ingest_two_columns(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("0,1.5\n0.01,1.7\n")
    sig = pl.ingest(path)
    assert sig.N == 2 and sig.h == pytest.approx(0.01)
    np.testing.assert_allclose(sig.f, [1.5, 1.7])


def test_ingest_single_column_needs_a_rate(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("f\n1\n2\n3\n")
    sig = pl.ingest(path, fs=360)
    np.testing.assert_allclose(sig.x, np.arange(3) / 360)
    with pytest.raises(pl.DataError):
        pl.ingest(path)


def test_ingest_rejects_bad_input(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("0,1\n1,2\n2,3\n")
    ann = tmp_path / "a.txt"
    ann.write_text("0\n3\n")
    with pytest.raises(pl.DataError):
        pl.ingest(path, annotations=ann)
    ann.write_text("2\n1\n")
    with pytest.raises(pl.DataError):
        pl.ingest(path, annotations=ann)
    path.write_text("0,1\n1,x\n")
    with pytest.raises(pl.DataError):
        pl.ingest(path)
    path.write_text("0,1\n1,2\n5,3\n")
    with pytest.raises(pl.DataError):
        pl.ingest(path)


def test_normalization_round_trip():
    sig = Signal.uniform(np.array([3.0, 5.0, 1.0, 7.0]))
    norm = pl.normalize(sig)
    assert np.abs(norm.f).max() == pytest.approx(1.0)
    assert norm.f.mean() == pytest.approx(0.0)
    np.testing.assert_allclose(pl.restore_amplitude(norm.f, norm.meta), sig.f)
    kv = KnotVector(3, [1.5], 0.0, 3.0)
    model = SplineModel(kv, np.arange(kv.dim, dtype=float))
    restored = SplineModel(kv, pl.denormalized_coeffs(model, norm.meta))
    np.testing.assert_allclose(restored(sig.x), pl.restore_amplitude(model(sig.x), norm.meta))


def test_segmentation_at_midpoints():
    sig = Signal.uniform(np.zeros(400), annotations=[100, 300])
    segs = pl.segment_beats(sig)
    assert [(s.start, s.end) for s in segs] == [(0, 200), (200, 400)]


def test_dense_annotations_are_all_skipped():
    sig = Signal.uniform(np.zeros(50), annotations=np.arange(50))
    segs = pl.segment_beats(sig, min_len=10)
    assert all(s.skipped for s in segs)
    summary, results, _ = pl.compress(sig, _job(knots=5))
    assert summary["fitted"] == 0 and summary["skipped"] == len(results)
    assert summary["CR"] is None


def test_periodic_fixture_segments_cover_one_period():
    period = 90
    x = np.arange(10 * period)
    sig = Signal(x / 360.0, np.sin(2 * np.pi * x / period), annotations=np.arange(period // 4, x.size, period))
    segs = pl.segment_beats(sig)
    for s in segs[1:-1]:
        assert abs((s.end - s.start) - period) <= 1
        assert s.start < s.annotation < s.end
    for s in (segs[0], segs[-1]):
        assert period // 2 <= s.end - s.start <= 3 * period // 2


def _spline_train(beats=4, length=300, degree=3):
    kv = KnotVector(degree, np.linspace(0, 1, 12)[1:-1], 0.0, 1.0)
    rng = np.random.default_rng(0)
    beat = SplineModel(kv, rng.normal(size=kv.dim))(np.linspace(0, 1, length))
    f = np.tile(beat, beats)
    ann = np.arange(length // 2, beats * length, length)
    return Signal(np.arange(f.size) / 360.0, f, ann)


def test_representable_signal_compresses_almost_exactly():
    sig = pl.normalize(_spline_train())
    # the default residual tolerance stops early on an already good fit
    summary, _, _ = pl.compress(sig, _job(knots=25, term_tol=0.0))
    assert summary["vp"]["eps2_weighted"] <= 0.1


def test_refinement_improves_ecg_segments(ecg_train):
    sig = pl.normalize(ecg_train)
    summary, results, _ = pl.compress(sig, _job(knots=25, term_tol=0.0))
    done = [r for r in results if r.status == "ok"]
    assert summary["vp"]["eps2_mean"] < summary["foba"]["eps2_mean"]
    better = sum(r.vp["eps2"] <= r.foba["eps2"] + 1e-12 for r in done)
    assert better >= 0.9 * len(done)


def test_single_beat_compression_ratio():
    sig = Signal(np.arange(360) / 360.0, np.sin(np.linspace(0, 6, 360)) ** 3)
    summary, _, _ = pl.compress(pl.normalize(sig), _job(knots=25))
    assert summary["fitted"] == 1
    assert summary["CR"] == 360 / 52


def test_compression_is_deterministic_and_thread_independent(tmp_path, ecg_train):
    sig = pl.normalize(ecg_train)
    outs = []
    for i, workers in enumerate((1, 1, 3)):
        summary, results, timings = pl.compress(sig, _job(knots=20, workers=workers))
        out = tmp_path / f"run{i}"
        pl.write_compression(out, sig, summary, results, timings)
        outs.append(out)
    for name in ("summary.json", "reconstruction.csv", "models/segment_00003.json"):
        ref = (outs[0] / name).read_bytes()
        assert (outs[1] / name).read_bytes() == ref
        assert (outs[2] / name).read_bytes() == ref


def test_automatic_knot_count(ecg_train):
    sig = pl.normalize(ecg_train)
    summary, _, _ = pl.compress(sig, _job(auto_knots=True, max_auto_knots=40))
    assert 5 <= summary["knots"] <= 41


def test_job_validation():
    with pytest.raises(ValueError):
        _job(knots=2)
    with pytest.raises(ValueError):
        _job(jacobian="other")
    with pytest.raises(ValueError):
        _job(norm="l3")
    assert "workers" not in _job().to_dict()


def test_plot_data_rows(tmp_path):
    kv = KnotVector(3, [0.25, 0.5, 0.75], 0.0, 1.0)
    sig = Signal(np.linspace(0, 1, 41), np.linspace(0, 1, 41) ** 2)
    model = SplineModel(kv, np.random.default_rng(0).normal(size=kv.dim))
    path = tmp_path / "plot.csv"
    pl.emit_plot_data(model, sig, path, curve=np.array([100.0, 50.0]), curve_path=tmp_path / "curve.csv")
    rows = list(csv.DictReader(path.open()))
    samples = [r for r in rows if r["kind"] == "sample"]
    knots = [r for r in rows if r["kind"] == "knot"]
    assert len(knots) == kv.n + 1
    np.testing.assert_array_equal([float(r["reconstruction"]) for r in samples], eval_model(model, sig.x))
    curve = list(csv.DictReader((tmp_path / "curve.csv").open()))
    assert [r["knots"] for r in curve] == ["2", "3"]


def test_constant_model_gives_a_constant_reconstruction(tmp_path):
    kv = KnotVector(3, [0.5], 0.0, 1.0)
    model = SplineModel(kv, 2.0 * kv.scale_factors())
    sig = Signal(np.linspace(0, 1, 11), np.zeros(11))
    path = tmp_path / "plot.csv"
    pl.emit_plot_data(model, sig, path)
    vals = [float(r["reconstruction"]) for r in csv.DictReader(path.open()) if r["kind"] == "sample"]
    np.testing.assert_allclose(vals, 2.0, rtol=1e-14)


def test_bench_rows_carry_targets():
    rows = {(r["function"], r["N"], r["knots"], r["measure"]): r for r in pl.bench()}
    assert rows[("f3", 101, 15, "mse")]["target"] == pytest.approx(0.00019)
    assert rows[("f5", 201, 7, "bic")]["target"] == pytest.approx(471)
    assert rows[("f6", 201, 10, "bic")]["target"] == pytest.approx(1491)
    f2 = [r for r in rows.values() if r["function"] == "f2"]
    assert f2 and all(r["status"].startswith("skipped") for r in f2)


def test_json_floats_round_trip(tmp_path):
    path = tmp_path / "x.json"
    pl.dump_json({"b": 0.1 + 0.2, "a": 1 / 3}, path)
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["b"] == 0.1 + 0.2
