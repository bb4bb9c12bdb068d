import csv
import json
import subprocess
import sys

import pytest

from ewa.cli import MGF_COLUMNS, MOMENT_COLUMNS, SWEEP_COLUMNS, TRIAL_COLUMNS, main
from ewa.config import ConfigError, parse_config, render_config
from ewa.harness import builtin_scenarios

MINIMAL = "n = 64\nnoise.scale = 1.0\nagg.beta = 20\n"


def write_config(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert (cfg.n, cfg.noise_scale, cfg.beta) == (64, 1.0, 20.0)
        assert cfg.delta == 1.0 and cfg.eta == 0.05 and cfg.trials == 1000
        assert len(cfg.collection()) == 7
        assert cfg.aggregation().v_bound == 1.0

    def test_comments_and_blanks(self):
        cfg = parse_config("# header\n\n" + MINIMAL + "agg.eta = 0.1  # looser\n")
        assert cfg.eta == 0.1

    def test_boundary_temperature_rejected(self):
        with pytest.raises(ConfigError, match=r"temperature must exceed 4\*sigma\^2\*V"):
            parse_config("n = 64\nnoise.scale = 1\nagg.beta = 4\n")

    def test_weak_regime_needs_twenty(self):
        with pytest.raises(ConfigError, match=r"20\*sigma\^2\*V"):
            parse_config("n = 64\nnoise.scale = 1\nagg.beta = 19\nagg.delta = 1\n")

    @pytest.mark.parametrize("text, pattern", [
        (MINIMAL + "agg.temperature = 3\n", "unknown key"),
        (MINIMAL + "n = 32\n", "duplicate key"),
        ("n = sixty\nnoise.scale = 1\nagg.beta = 20\n", r"^n: cannot parse"),
        ("n = 64\nagg.beta = 20\n", "missing required key"),
        (MINIMAL + "no equals sign\n", "expected 'key = value'"),
        (MINIMAL + "noise.kind = cauchy\n", "^noise.kind:"),
        (MINIMAL + "run.trials = 0\n", "^run.trials:"),
    ])
    def test_errors(self, text, pattern):
        with pytest.raises(ConfigError, match=pattern):
            parse_config(text)

    def test_round_trip_builtin(self):
        for sc in builtin_scenarios():
            sig, coll, noise, agg = sc.signal, sc.collection, sc.noise, sc.cfg
            text = (f"n = {sig.n}\nnoise.kind = {noise.kind}\nnoise.scale = {noise.scale!r}\n"
                    f"agg.beta = {agg.beta!r}\nagg.delta = {agg.delta!r}\nagg.eta = {agg.eta!r}\n"
                    f"agg.penalty_rule = {agg.penalty_rule}\nsignal.kind = {sig.kind}\n"
                    f"signal.amplitude = {sig.amplitude!r}\n"
                    f"signal.frequencies = {','.join(map(repr, sig.frequencies))}\n")
            if "taper" in sc.name:
                text += "collection.kind = shrinkage\n"
            cfg = parse_config(text)
            assert parse_config(render_config(cfg)) == cfg


@pytest.fixture
def small_cfg(tmp_path):
    return write_config(tmp_path, MINIMAL + "run.trials = 5\nrun.seed = 7\n")


class TestSimulate:
    def test_one_trial(self, tmp_path, small_cfg):
        out = tmp_path / "o"
        assert main(["simulate", "--config", str(small_cfg), "--out", str(out), "--trials", "1"]) == 0
        rows = read_rows(out / "trials.csv")
        assert rows[0] == TRIAL_COLUMNS and len(rows) == 2
        summary = json.loads((out / "summary.json").read_text())
        assert list(summary)[:4] == ["coverage", "mean_lhs", "expectation_rhs", "n_trials"]
        assert summary["n_trials"] == 1 and summary["config"]["run.trials"] == 1
        assert "version" in summary

    def test_csv_format(self, tmp_path, small_cfg):
        out = tmp_path / "o"
        main(["simulate", "--config", str(small_cfg), "--out", str(out)])
        raw = (out / "trials.csv").read_bytes()
        assert b"\r" not in raw
        rows = read_rows(out / "trials.csv")[1:]
        assert [r[0] for r in rows] == ["0", "1", "2", "3", "4"]
        assert {r[4] for r in rows} <= {"true", "false"}
        for r in rows:
            assert float(r[2]) == float(r[2])  # parses

    def test_seed_override_changes_output(self, tmp_path, small_cfg):
        main(["simulate", "--config", str(small_cfg), "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(small_cfg), "--out", str(tmp_path / "b"), "--seed", "8"])
        assert (tmp_path / "a/trials.csv").read_bytes() != (tmp_path / "b/trials.csv").read_bytes()

    def test_jobs_do_not_change_output(self, tmp_path, small_cfg):
        main(["simulate", "--config", str(small_cfg), "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(small_cfg), "--out", str(tmp_path / "b"), "--jobs", "3"])
        assert (tmp_path / "a/trials.csv").read_bytes() == (tmp_path / "b/trials.csv").read_bytes()


class TestSweeps:
    def test_sweep_beta(self, tmp_path, small_cfg):
        out = tmp_path / "s"
        code = main(["sweep-beta", "--config", str(small_cfg), "--out", str(out),
                     "--grid", "20,24,28", "--trials", "50"])
        rows = read_rows(out / "sweep_beta.csv")
        assert rows[0] == SWEEP_COLUMNS and len(rows) == 4
        assert [float(r[0]) for r in rows[1:]] == [20.0, 24.0, 28.0]
        assert all(r[5] == "true" for r in rows[1:])
        assert code == 0

    def test_sweep_delta(self, tmp_path):
        cfg = write_config(tmp_path, "n = 32\nnoise.scale = 1\nagg.beta = 20\nrun.trials = 20\n")
        out = tmp_path / "s"
        assert main(["sweep-delta", "--config", str(cfg), "--out", str(out), "--grid", "0,0.5,1"]) == 0
        rows = read_rows(out / "sweep_delta.csv")
        assert [float(r[1]) for r in rows[1:]] == [0.0, 0.5, 1.0]

    def test_inadmissible_grid_point(self, tmp_path, small_cfg):
        out = tmp_path / "s"
        assert main(["sweep-beta", "--config", str(small_cfg), "--out", str(out),
                     "--grid", "20,10", "--trials", "5"]) == 1
        assert list(out.iterdir()) == []


class TestChecks:
    def test_check_mgf_rademacher(self, tmp_path):
        cfg = write_config(tmp_path, "n = 16\nnoise.kind = rademacher\nnoise.scale = 1\n"
                                     "agg.beta = 20\nmgf.samples = 20000\n")
        out = tmp_path / "m"
        assert main(["check-mgf", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out / "mgf.csv")
        assert rows[0] == MGF_COLUMNS and len(rows) == 21
        assert all(r[-1] == "true" for r in rows[1:])

    def test_check_moments(self, tmp_path):
        cfg = write_config(tmp_path, "n = 16\nnoise.scale = 1\nagg.beta = 20\n"
                                     "moments.samples = 5000\nmoments.pairs = 4\n")
        out = tmp_path / "m"
        assert main(["check-moments", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_rows(out / "moments.csv")
        assert rows[0] == MOMENT_COLUMNS and len(rows) == 5
        assert {r[2] for r in rows[1:]} == {"general"}


class TestExitCodes:
    def test_failing_flag_gives_two(self, tmp_path, small_cfg, monkeypatch):
        import dataclasses

        import ewa.cli as cli

        real = cli.run_experiment

        def no_coverage(*a, **k):
            return dataclasses.replace(real(*a, **k), n_holds=0)

        monkeypatch.setattr(cli, "run_experiment", no_coverage)
        out = tmp_path / "o"
        assert main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == 2
        summary = json.loads((out / "summary.json").read_text())
        assert summary["coverage_ok"] is False and summary["expectation_ok"] is True

    def test_missing_config(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 1
        assert "nope.cfg" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "n = 64\nnoise.scale = 1\nagg.beta = 4\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        assert "temperature must exceed" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_unwritable_output(self, tmp_path, small_cfg, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["simulate", "--config", str(small_cfg), "--out", str(blocker / "sub")]) == 1
        assert str(blocker / "sub") in capsys.readouterr().err

    def test_no_partial_files(self, tmp_path, small_cfg, monkeypatch):
        import ewa.cli as cli

        def boom(*a, **k):
            raise OSError("disk full")

        monkeypatch.setattr(cli.json, "dump", boom)
        out = tmp_path / "o"
        assert main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == 1
        assert sorted(p.name for p in out.iterdir()) == ["trials.csv"]

    def test_console_script(self, tmp_path, small_cfg):
        res = subprocess.run([sys.executable, "-m", "ewa.cli", "simulate", "--config", str(small_cfg),
                              "--out", str(tmp_path / "o"), "--trials", "2"],
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        assert len(read_rows(tmp_path / "o/trials.csv")) == 3
