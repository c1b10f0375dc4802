import json

import numpy as np
import pytest

from fincond.cli import (
    EXIT_OK,
    EXIT_VALIDATION,
    main,
    parse_grid,
    resume_experiment,
    run_experiment,
    sweep,
)
from fincond.config import ConfigError, parse_config
from fincond.grid import field_from_csv, trace_from_csv

FAST = ["--iterations", "200", "--m", "6", "--n", "6"]


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestRunSubcommand:
    def test_writes_expected_files(self, tmp_path, capsys):
        code, out, _ = run_cli(["run", "--out", str(tmp_path / "r"), *FAST], capsys)
        assert code == EXIT_OK
        names = {p.name for p in (tmp_path / "r").iterdir()}
        for required in (
            "K_correct.csv",
            "K_final.csv",
            "boundary_data.csv",
            "trace.csv",
            "update_counts.csv",
            "checkpoint.bin",
            "manifest.json",
        ):
            assert required in names
        assert any(n.startswith("snapshot_") for n in names)
        payload = json.loads(out)
        assert "mean_abs" in payload

    def test_manifest_checksums_match_files(self, tmp_path, capsys):
        import hashlib

        run_cli(["run", "--out", str(tmp_path / "r"), *FAST], capsys)
        manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
        for name, digest in manifest["files"].items():
            actual = hashlib.sha256((tmp_path / "r" / name).read_bytes()).hexdigest()
            assert actual == digest, name

    def test_identical_seeds_bit_identical(self, tmp_path, capsys):
        run_cli(["run", "--out", str(tmp_path / "a"), "--seed", "3", *FAST], capsys)
        run_cli(["run", "--out", str(tmp_path / "b"), "--seed", "3", *FAST], capsys)
        assert (tmp_path / "a" / "K_final.csv").read_bytes() == (
            tmp_path / "b" / "K_final.csv"
        ).read_bytes()

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("m = 6\nn = 6\niterations = 100\nseed = 1\n")
        code, _, _ = run_cli(
            ["run", "--config", str(cfg), "--out", str(tmp_path / "r"), "--seed", "2"],
            capsys,
        )
        assert code == EXIT_OK
        manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 2
        assert manifest["config"]["m"] == 6

    def test_validation_failure_exit_code(self, tmp_path, capsys):
        code, _, err = run_cli(["run", "--out", str(tmp_path / "r"), "--m", "1"], capsys)
        assert code == EXIT_VALIDATION
        assert json.loads(err)["error"] == "validation"

    def test_bad_kernel_exit_code(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["run", "--out", str(tmp_path / "r"), "--kernel", "nope"], capsys
        )
        assert code == EXIT_VALIDATION


class TestGenSubcommand:
    def test_writes_only_data_files(self, tmp_path, capsys):
        code, out, _ = run_cli(["gen", "--out", str(tmp_path / "g"), "--m", "6", "--n", "6"], capsys)
        assert code == EXIT_OK
        names = {p.name for p in (tmp_path / "g").iterdir()}
        assert names == {"K_correct.csv", "boundary_data.csv"}
        assert set(json.loads(out)) == names

    def test_matches_run_data(self, tmp_path, capsys):
        # gen and run with the same seed produce identical data files
        run_cli(["gen", "--out", str(tmp_path / "g"), "--seed", "4", *FAST], capsys)
        run_cli(["run", "--out", str(tmp_path / "r"), "--seed", "4", *FAST], capsys)
        assert (tmp_path / "g" / "boundary_data.csv").read_bytes() == (
            tmp_path / "r" / "boundary_data.csv"
        ).read_bytes()


class TestResumeSubcommand:
    def test_resume_equals_uninterrupted(self, tmp_path, capsys):
        base = ["--m", "6", "--n", "6", "--seed", "11", "--kernel", "gridwise"]
        run_cli(["run", "--out", str(tmp_path / "full"), "--iterations", "400", *base], capsys)
        # interrupted run: stop at 200, then resume to 400
        run_cli(["run", "--out", str(tmp_path / "half"), "--iterations", "200", *base], capsys)
        code, _, _ = run_cli(["resume", "--out", str(tmp_path / "half"), "--iterations", "400"], capsys)
        assert code == EXIT_OK
        assert (tmp_path / "half" / "K_final.csv").read_bytes() == (
            tmp_path / "full" / "K_final.csv"
        ).read_bytes()

    def test_resume_without_manifest_fails(self, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        code, _, err = run_cli(["resume", "--out", str(tmp_path / "empty")], capsys)
        assert code != EXIT_OK
        assert err

    def test_resume_beyond_budget_extends(self, tmp_path, capsys):
        run_cli(["run", "--out", str(tmp_path / "r"), *FAST], capsys)
        code, out, _ = run_cli(["resume", "--out", str(tmp_path / "r"), "--iterations", "300"], capsys)
        assert code == EXIT_OK
        assert json.loads(out)["iterations"] == 300


class TestSweep:
    def test_parse_grid_cartesian(self):
        keys, points = parse_grid(["lambda=1,10", "kernel=uniform,gridwise"])
        assert keys == ["lambda", "kernel"]
        assert len(points) == 4
        assert ("1", "uniform") in points

    def test_parse_grid_rejects_empty(self):
        with pytest.raises(ConfigError):
            parse_grid([])
        with pytest.raises(ConfigError):
            parse_grid(["lambda="])

    def test_sweep_writes_summary(self, tmp_path, capsys):
        code, out, _ = run_cli(
            [
                "sweep",
                "--out",
                str(tmp_path / "s"),
                *FAST,
                "--vary",
                "kernel=uniform,pointwise",
                "--vary",
                "lambda=0,100",
            ],
            capsys,
        )
        assert code == EXIT_OK
        assert json.loads(out)["completed"] == 4
        summary = (tmp_path / "s" / "summary.csv").read_text().splitlines()
        assert summary[0] == "index,kernel,lambda,seed,mean_abs,rms,max_abs,acceptance_rate"
        assert len(summary) == 5
        for idx in range(4):
            assert (tmp_path / "s" / f"run_{idx:04d}" / "manifest.json").exists()

    def test_sweep_seeds_derived_and_distinct(self, tmp_path):
        cfg = parse_config(None, {"m": "6", "n": "6", "iterations": "100"})
        sweep(cfg, ["lambda=0,1,2"], tmp_path / "s")
        seeds = set()
        for idx in range(3):
            manifest = json.loads((tmp_path / "s" / f"run_{idx:04d}" / "manifest.json").read_text())
            seeds.add(manifest["seed"])
        assert len(seeds) == 3

    def test_sweep_continues_past_failures(self, tmp_path):
        # m=1 fails validation inside the grid point; the rest still run
        cfg = parse_config(None, {"n": "6", "iterations": "100"})
        manifests = sweep(cfg, ["m=6,1,8"], tmp_path / "s")
        assert len(manifests) == 2
        failures = json.loads((tmp_path / "s" / "failures.json").read_text())
        assert len(failures) == 1
        assert failures[0]["params"] == {"m": "1"}
        summary = (tmp_path / "s" / "summary.csv").read_text().splitlines()
        assert len(summary) == 3  # header + 2 completed rows

    def test_sweep_parallel_matches_serial(self, tmp_path):
        cfg = parse_config(None, {"m": "6", "n": "6", "iterations": "100"})
        sweep(cfg, ["lambda=0,100"], tmp_path / "serial", jobs=1)
        sweep(cfg, ["lambda=0,100"], tmp_path / "par", jobs=2)
        for idx in range(2):
            a = (tmp_path / "serial" / f"run_{idx:04d}" / "K_final.csv").read_bytes()
            b = (tmp_path / "par" / f"run_{idx:04d}" / "K_final.csv").read_bytes()
            assert a == b


class TestOutputsParseBack:
    def test_fields_and_trace_round_trip(self, tmp_path):
        cfg = parse_config(None, {"m": "6", "n": "6", "iterations": "100"})
        manifest = run_experiment(cfg, tmp_path / "r")
        mesh, values = field_from_csv((tmp_path / "r" / "K_final.csv").read_text())
        assert mesh.m == 6 and values.shape == (6, 6)
        trace = trace_from_csv((tmp_path / "r" / "boundary_data.csv").read_text())
        assert len(trace) == mesh.boundary_length
        assert manifest["iterations"] == 100

    def test_trace_csv_monotone(self, tmp_path):
        cfg = parse_config(None, {"m": "6", "n": "6", "iterations": "100", "thin": "10"})
        run_experiment(cfg, tmp_path / "r")
        lines = (tmp_path / "r" / "trace.csv").read_text().splitlines()
        assert lines[0] == "iteration,misfit,acceptance_rate"
        its = [int(line.split(",")[0]) for line in lines[1:]]
        assert its == sorted(its)
        assert its[-1] == 100

    def test_resume_api_updates_manifest(self, tmp_path):
        cfg = parse_config(None, {"m": "6", "n": "6", "iterations": "100", "seed": "8"})
        run_experiment(cfg, tmp_path / "r")
        manifest = resume_experiment(tmp_path / "r", iterations=250)
        assert manifest["iterations"] == 250
        on_disk = json.loads((tmp_path / "r" / "manifest.json").read_text())
        assert on_disk["config"]["iterations"] == 250

    def test_noise_recorded_and_applied(self, tmp_path):
        base = {"m": "6", "n": "6", "iterations": "50", "seed": "8"}
        clean = run_experiment(parse_config(None, base), tmp_path / "clean")
        noisy = run_experiment(
            parse_config(None, {**base, "noise_std": "0.1"}), tmp_path / "noisy"
        )
        assert noisy["config"]["noise_std"] == 0.1
        a = trace_from_csv((tmp_path / "clean" / "boundary_data.csv").read_text())
        b = trace_from_csv((tmp_path / "noisy" / "boundary_data.csv").read_text())
        assert not np.array_equal(a.values, b.values)
        assert np.abs(a.values - b.values).max() < 1.0
