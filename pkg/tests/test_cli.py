import subprocess
import sys

import numpy as np
import pytest

from hsiss import cli
from hsiss.cube import load_cube
from hsiss.maps import read_pnm
from hsiss.svm import load_model


@pytest.fixture
def synth_dir(tmp_path):
    assert cli.main(["synth", "--out-dir", str(tmp_path), "--rows", "24", "--cols", "20", "--bands", "6"]) == 0
    return tmp_path


def classify(d, out, *extra):
    return cli.main(["classify", "--cube", str(d / "scene.hdr"), "--model", str(d / "scene_model.txt"),
                     "--out-map", str(d / f"{out}.pgm"), "--out-color", str(d / f"{out}.ppm"), *extra])


def test_synth_writes_reloadable_files(synth_dir):
    cube = load_cube(synth_dir / "scene.hdr")
    assert cube.shape == (24, 20, 6)
    model = load_model(synth_dir / "scene_model.txt")
    assert model.bands == 6 and model.n_classes == 4
    truth = read_pnm(synth_dir / "scene_truth.pgm")
    assert truth.shape == (24, 20) and set(np.unique(truth)) == {0, 1, 2, 3}


def test_synth_same_seed_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["synth", "--out-dir", str(tmp_path / d), "--seed", "5", "--rows", "16",
                         "--cols", "16"]) == 0
    for name in ("scene.hdr", "scene.raw", "scene_model.txt", "scene_truth.pgm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_from_spec_file(tmp_path):
    (tmp_path / "s.txt").write_text("seed=2\nrows=8\ncols=8\nbands=3\nclasses=2\nblob_rows=1\nblob_cols=2\n")
    assert cli.main(["synth", "--spec", str(tmp_path / "s.txt"), "--out-dir", str(tmp_path),
                     "--prefix", "x"]) == 0
    assert load_model(tmp_path / "x_model.txt").n_classes == 2


def test_synth_spec_error_names_field(tmp_path, capsys):
    (tmp_path / "s.txt").write_text("rows=many\n")
    assert cli.main(["synth", "--spec", str(tmp_path / "s.txt"), "--out-dir", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("error: parameter:")


def test_classify_outputs_and_determinism(synth_dir):
    assert classify(synth_dir, "w1", "--workers", "1", "--k", "12") == 0
    assert classify(synth_dir, "w4", "--workers", "4", "--k", "12") == 0
    for ext in ("pgm", "ppm"):
        assert (synth_dir / f"w1.{ext}").read_bytes() == (synth_dir / f"w4.{ext}").read_bytes()
    labels = read_pnm(synth_dir / "w1.pgm")
    rgb = read_pnm(synth_dir / "w1.ppm")
    assert np.array_equal(rgb[labels == 0], np.tile([255, 0, 0], ((labels == 0).sum(), 1)))
    truth = read_pnm(synth_dir / "scene_truth.pgm")
    assert (labels == truth).mean() > 0.9


def test_classify_dumps(synth_dir):
    assert classify(synth_dir, "m", "--k", "5", "--dump-intermediates", "--dump-pca", "--dump-neighbors",
                    "--dump-dir", str(synth_dir / "dumps")) == 0
    names = {p.name for p in (synth_dir / "dumps").iterdir()}
    assert {"one_band.hdr", "prob_raw.hdr", "prob_filtered.hdr", "covariance.txt", "neighbors.txt"} <= names


def test_classify_errors(synth_dir, capsys):
    assert classify(synth_dir, "m", "--k", "0") == 1
    assert capsys.readouterr().err.strip() == "error: parameter: k must be >= 1, got 0"
    (synth_dir / "scene.raw").write_bytes(b"\0" * 10)
    assert classify(synth_dir, "m") == 1
    err = capsys.readouterr().err
    assert err.startswith("error: format:") and "found 10" in err
    assert cli.main(["classify", "--cube", "missing.hdr", "--model", "m", "--out-map", "x"]) == 1
    assert capsys.readouterr().err.startswith("error: io:")


def test_foms_calculator(capsys):
    assert cli.main(["foms", "--time", "1.77", "--power", "36.58"]) == 0
    assert capsys.readouterr().out.strip() == "15.44 / 8.73 / 0.422"
    assert cli.main(["foms", "--time", "0", "--power", "36.58"]) == 1
    assert capsys.readouterr().err.startswith("error: parameter: time must be > 0")


def test_foms_table_summary(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("table,image,device,time_s,power_w,fom1,fom2,fom3\n"
                                    "3,PB1C1,Tesla K40,1.77,36.58,15.36,8.63,0.420\n"
                                    "3,PB1C1,GTX 1060,1.99,38.79,12.92,6.47,0.333\n")
    assert cli.main(["foms", "--table", str(tmp_path / "t.csv")]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "all within 2% (6 values)"
    assert cli.main(["foms", "--published"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "14 of 180 values outside 2%"


def test_foms_malformed_table_line_number(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("table,image,device,time_s,power_w,fom1,fom2,fom3\n3,a,b,1,2\n")
    assert cli.main(["foms", "--table", str(tmp_path / "t.csv")]) == 1
    assert ":2: expected 8 fields" in capsys.readouterr().err


def test_bench_constant_watts(synth_dir, capsys):
    assert cli.main(["bench", "--cube", str(synth_dir / "scene.hdr"), "--model",
                     str(synth_dir / "scene_model.txt"), "--reps", "3", "--watts", "10", "--k", "5"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split()
    assert row[0] == "synthetic" and row[2] == "10.00" and "-" not in row[3:6] and row[6] == "3"


def test_bench_without_power(tmp_path, capsys):
    (tmp_path / "t.txt").write_text("0.5\n0.5\n")
    assert cli.main(["bench", "--timings", str(tmp_path / "t.txt"), "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "-,0.5,-,-,-,-,2,0.00"
    assert cli.main(["bench", "--timings", str(tmp_path / "t.txt"), "--require-foms", "--format", "csv"]) == 1
    captured = capsys.readouterr()
    assert captured.out.splitlines()[1] == "-,0.5,-,-,-,-,2,0.00"
    assert captured.err.startswith("error: parameter:")


def test_bench_fixture_trace_and_timings(tmp_path, capsys):
    (tmp_path / "t.txt").write_text("1.76\n1.78\n1.77\n")
    samples = "\n".join(f"{ms},{36.58 + (0.4 if ms % 2 else -0.4)}" for ms in range(0, 1771))
    (tmp_path / "p.csv").write_text("t_ms,watts\n" + samples + "\n")
    assert cli.main(["bench", "--timings", str(tmp_path / "t.txt"), "--power-trace", str(tmp_path / "p.csv"),
                     "--image-id", "PB1C1", "--format", "csv"]) == 0
    cells = capsys.readouterr().out.splitlines()[1].split(",")
    assert abs(float(cells[3]) - 15.36) / 15.36 < 0.02


def test_bench_argument_errors(tmp_path, capsys):
    assert cli.main(["bench", "--reps", "0"]) == 1
    assert "reps" in capsys.readouterr().err
    assert cli.main(["bench"]) == 1
    assert "--cube and --model" in capsys.readouterr().err


def test_usage_errors_exit_nonzero():
    with pytest.raises(SystemExit) as info:
        cli.main(["classify"])
    assert info.value.code != 0


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hsiss.cli", "foms", "--time", "1", "--power", "1000"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "1.00 / 1.00 / 0.001"
