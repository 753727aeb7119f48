import json
import subprocess
import sys

import pytest

from freeknot.cli import main


@pytest.fixture(scope="module")
def ecg_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("ecg")
    out = d / "ecg.csv"
    assert main(["synth", "ecg", "--beats", "6", "--seed", "1", "--out", str(out)]) == 0
    return out, d / "ecg.csv.ann"


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file() and "timings" not in p.name}


def test_synth_test_function(tmp_path):
    out = tmp_path / "f3.csv"
    assert main(["synth", "f3", "--N", "101", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 101


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["fit", "x.csv", "--norm", "l3", "--out", str(tmp_path)])
    assert exc.value.code == 1


def test_missing_file_exits_two(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2


def test_bad_annotations_exit_two(tmp_path, ecg_files):
    sig, _ = ecg_files
    ann = tmp_path / "bad.ann"
    ann.write_text("5\n3\n")
    assert main(["compress", str(sig), "--annotations", str(ann), "--out", str(tmp_path / "o")]) == 2


def test_infeasible_knot_count_exits_one(tmp_path):
    sig = tmp_path / "s.csv"
    assert main(["synth", "f4", "--N", "20", "--out", str(sig)]) == 0
    assert main(["fit", str(sig), "--knots", "40", "--out", str(tmp_path / "o")]) == 1


def test_fit_writes_model_and_report(tmp_path):
    sig = tmp_path / "f3.csv"
    main(["synth", "f3", "--N", "101", "--out", str(sig)])
    out = tmp_path / "fit"
    assert main(["fit", str(sig), "--knots", "15", "--term-tol", "0", "--no-normalize", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    model = json.loads((out / "model.json").read_text())
    assert report["iterations"] == 4
    assert report["errors"]["mse"] <= 4e-4
    assert len(model["interior"]) == 13
    plot = tmp_path / "plot.csv"
    assert main(["plot-data", str(sig), "--model", str(out / "model.json"), "--curve", "--out", str(plot)]) == 0
    assert sum(line.startswith("knot,") for line in plot.read_text().splitlines()) == 15
    assert plot.with_suffix(".curve.csv").exists()


def test_predict_and_baseline(tmp_path, ecg_files):
    sig, ann = ecg_files
    out = tmp_path / "pred"
    assert main(["predict", str(sig), "--knots", "10", "--max-knots", "20", "--fs", "360", "--out", str(out)]) == 0
    knots = json.loads((out / "knots.json").read_text())
    assert len(knots["indices"]) == 10
    assert len((out / "error_curve.csv").read_text().splitlines()) == 20
    out = tmp_path / "uvp"
    assert main(["baseline", str(sig), "--annotations", str(ann), "--method", "UVP", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["fitted"] == 6


def test_bench_output(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert "seconds" not in header and "value" in header
    assert out.with_suffix(".timings.csv").exists()


def test_compress_is_byte_identical_across_runs(tmp_path, ecg_files):
    sig, ann = ecg_files
    trees = []
    for i, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"c{i}"
        assert main(["compress", str(sig), "--annotations", str(ann), "--workers", workers, "--seed", "7", "--out", str(out)]) == 0
        trees.append(_tree(out))
    assert trees[0] == trees[1] == trees[2]
    assert "summary.json" in trees[0] and "reconstruction.csv" in trees[0]


def test_module_entry_point_propagates_exit_codes(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "freeknot.cli", "fit", str(tmp_path / "none.csv"), "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "data error" in proc.stderr
