import json
import subprocess
import sys

import numpy as np
import pytest

from xcreg.cli import main, overlap_window
from xcreg.errors import ConfigError, EmptyInput
from xcreg.io import read_long_csv, write_long_csv
from xcreg.simgen import SimConfig, generate_contaminated, generate_pure_shift

THETA = (-5.0, -2.5, 2.5, 5.0)


def _stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


@pytest.fixture
def pure_csv(tmp_path):
    path = tmp_path / "pure.csv"
    write_long_csv(path, generate_pure_shift(4, 4, THETA))
    return path


def _shifts(path):
    rows = path.read_text().splitlines()[1:]
    return np.array([float(r.split(",")[1]) for r in rows])


class TestRegister:
    def test_pure_shift_round_trip(self, pure_csv, tmp_path):
        out = tmp_path / "out"
        assert main(["register", str(pure_csv), "--window", "10,40", "--out", str(out)]) == 0
        assert np.max(np.abs(_shifts(out / "shifts.csv") - THETA)) <= 1e-2
        for name in ["shifts.csv", "report.json", "xd_reduction.csv", "xd_density.csv",
                     "curves_unaligned.csv", "curves_aligned.csv", "alignment.png", "criterion.png", "xd_density.png"]:
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert abs(sum(report["theta_hat"])) <= 1e-10
        assert report["xd"]["pct_reduction"] == pytest.approx(100.0, abs=1e-6)

    def test_no_figures(self, pure_csv, tmp_path):
        out = tmp_path / "nf"
        assert main(["register", str(pure_csv), "--window", "10,40", "--out", str(out), "--no-figures"]) == 0
        assert not list(out.glob("*.png"))

    def test_byte_identical_rerun(self, tmp_path):
        src = tmp_path / "noisy.csv"
        write_long_csv(src, generate_contaminated(SimConfig(n=20, seed=3)).sample)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["register", str(src), "--window", "10,40", "--out", str(out)]) == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_narrow_window_censored(self, tmp_path, capsys):
        # r1 = 3 leaves an admissible range of only [-10, 3] for a relative shift of -10 or +10
        src = tmp_path / "p.csv"
        write_long_csv(src, generate_pure_shift(2, 2, (5.0, -5.0)))
        out = tmp_path / "c"
        assert main(["register", str(src), "--window", "3,40", "--out", str(out), "--no-figures"]) == 0
        assert "Censored" in capsys.readouterr().err
        report = json.loads((out / "report.json").read_text())
        assert report["pairwise"][0]["censored"] is True

    def test_grid_mismatch_exit_3(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("subject_id,component,t,value\nS1,x,0,1\nS1,x,1,1\nS1,y,0,1\nS1,y,1,1\n"
                       "S2,x,0,1\nS2,x,1.5,1\nS2,y,0,1\nS2,y,1,1\n")
        assert main(["register", str(src), "--out", str(tmp_path / "o")]) == 3
        line = _stderr_json(capsys)
        assert line["exit"] == 3 and line["error"] == "GridMismatch" and "S2" in line["reason"]

    def test_parse_error_exit_2(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("nope\n1\n")
        assert main(["register", str(src)]) == 2
        assert _stderr_json(capsys)["error"] == "ParseError"
        assert main(["register", "--bogus"]) == 2

    def test_unknown_config_key_exit_2(self, pure_csv, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text(f'input = "{pure_csv}"\n[minimizer]\nspeed = 3\n')
        assert main(["register", "--config", str(cfg)]) == 2
        assert "minimizer.speed" in _stderr_json(capsys)["reason"]

    def test_degenerate_window_exit_4(self, pure_csv, tmp_path, capsys):
        assert main(["register", str(pure_csv), "--window", "0,40", "--out", str(tmp_path / "d")]) == 4
        assert _stderr_json(capsys)["error"] == "RangeDegenerate"

    def test_config_file_and_derivative(self, pure_csv, tmp_path):
        cfg = tmp_path / "c.toml"
        out = tmp_path / "cfg_out"
        cfg.write_text(
            f'input = "{pure_csv}"\nout = "{out}"\nwindow = [10, 40]\nfigures = false\n'
            "[preprocessing]\nderivative = true\nbandwidth = 1.0\n"
        )
        assert main(["register", "--config", str(cfg)]) == 0
        assert np.max(np.abs(_shifts(out / "shifts.csv") - THETA)) <= 2e-2

    def test_normalize_and_extend(self, pure_csv, tmp_path):
        out = tmp_path / "ne"
        assert main(["register", str(pure_csv), "--window", "10,40", "--normalize-auc",
                     "--extend-to", "55", "--out", str(out), "--no-figures"]) == 0
        unaligned = read_long_csv(out / "curves_unaligned.csv")
        assert unaligned.grid.last == 55.0


    def test_cubic_interp(self, tmp_path, capsys):
        src = tmp_path / "p.csv"
        theta = (-1.3, 0.4, 0.9)
        write_long_csv(src, generate_pure_shift(2, 3, theta))
        out = tmp_path / "cu"
        assert main(["register", str(src), "--window", "10,40", "--interp", "cubic", "--out", str(out),
                     "--no-figures"]) == 0
        assert np.max(np.abs(_shifts(out / "shifts.csv") - theta)) <= 1e-3
        assert json.loads((out / "report.json").read_text())["config"]["interp"] == "cubic"

    def test_bad_interp_in_config(self, pure_csv, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text(f'input = "{pure_csv}"\ninterp = "quintic"\n')
        assert main(["register", "--config", str(cfg)]) == 2


class TestSimulate:
    def test_writes_sample_and_truth(self, tmp_path):
        cfg = tmp_path / "sim.toml"
        cfg.write_text("n = 5\nseed = 4\nsigma2_eta = 0.25\n")
        out = tmp_path / "s.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        s = read_long_csv(out)
        assert s.values.shape == (5, 4, 101)
        truth = json.loads(out.with_suffix(".truth.json").read_text())
        assert truth["theta"] == list(THETA) and len(truth["eta"]) == 5
        np.testing.assert_array_equal(s.values, generate_contaminated(SimConfig(n=5, seed=4, sigma2_eta=0.25)).sample.values)

    def test_pure_shift_model(self, tmp_path):
        cfg = tmp_path / "sim.toml"
        cfg.write_text('model = "pure_shift"\nn = 3\nsubject_shift_var = 1.0\n')
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "p.csv")]) == 0

    def test_bad_model(self, tmp_path, capsys):
        cfg = tmp_path / "sim.toml"
        cfg.write_text('model = "other"\n')
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "p.csv")]) == 2


class TestExperiment:
    def test_imse(self, tmp_path):
        cfg = tmp_path / "e.toml"
        cfg.write_text("sigma2_eta = [0.25, 1.0]\nB = 2\nn = 10\n")
        out = tmp_path / "imse.json"
        assert main(["experiment", "imse", "--config", str(cfg), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["kind"] == "imse"
        assert (tmp_path / "imse.table.csv").exists() and (tmp_path / "imse.imse.png").exists()

    def test_rates(self, tmp_path):
        cfg = tmp_path / "r.toml"
        cfg.write_text('n_list = [10, 20, 40]\nB = 2\ninterp = "linear"\n')
        out = tmp_path / "rates.json"
        assert main(["experiment", "rates", "--config", str(cfg), "--out", str(out), "--no-figures"]) == 0
        header = (tmp_path / "rates.rmse.csv").read_text().splitlines()[0]
        assert header.startswith("n,tau_12,")
        assert json.loads(out.read_text())["config"]["interp"] == "linear"

    def test_xd(self, tmp_path):
        cfg = tmp_path / "x.toml"
        cfg.write_text("runs = 2\n[sim]\nn = 10\n")
        out = tmp_path / "xd.json"
        assert main(["experiment", "xd", "--config", str(cfg), "--out", str(out)]) == 0
        assert (tmp_path / "xd.density.csv").exists() and (tmp_path / "xd.xd.png").exists()


class TestOverlapWindow:
    def test_union_span(self):
        assert overlap_window([(9, 14), (10, 16), (11, 18)]) == (9, 18)

    def test_single(self):
        assert overlap_window([(3, 7)]) == (3, 7)

    def test_enclose(self):
        assert overlap_window([(9, 14), (10, 16), (11, 18)], (8, 19)) == (8, 19)
        with pytest.raises(ConfigError):
            overlap_window([(9, 14), (11, 18)], (10, 19))

    def test_empty(self):
        with pytest.raises(EmptyInput):
            overlap_window([])

    def test_cli(self, tmp_path, capsys):
        p = tmp_path / "iv.csv"
        p.write_text("a,b\n9,14\n10,16\n11,18\n")
        assert main(["overlap-window", str(p), "--domain", "0,25"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == ["9.0,18.0", "shift_range=-7.0,9.0"]


def test_console_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "xcreg", "overlap-window", str(tmp_path / "none.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip())["error"] == "ParseError"
