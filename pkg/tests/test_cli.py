import json
import subprocess
import sys

import pytest

from padfeec.cli import main
from padfeec.report import CheckRecord, Report, RunConfig, roundtrip


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCli:
    def test_mesh_info(self, capsys):
        code, out, _ = run_cli(["mesh", "info", "--mesh", "box:2"], capsys)
        assert code == 0
        data = json.loads(out)
        assert data["records"][0]["numbers"]["cells"] == 8

    def test_mesh_gen_writes_file(self, tmp_path, capsys):
        out = tmp_path / "mesh.json"
        report = tmp_path / "report.json"
        code, _, _ = run_cli(
            ["mesh", "gen", "--mesh", "hole:4", "--out", str(out)], capsys
        )
        assert code == 0
        data = json.loads(out.read_text())
        assert data["dim"] == 2

    def test_verify_decomposition_passes(self, capsys):
        code, out, _ = run_cli(
            ["verify", "decomposition", "--mesh", "box:2", "--k", "1"], capsys
        )
        assert code == 0
        data = json.loads(out)
        names = [r["name"] for r in data["records"]]
        assert "helmholtz-none" in names and "hodge" in names
        assert all(r["verdict"] == "pass" for r in data["records"])

    def test_solve_hodge_with_equivalence(self, capsys):
        code, out, _ = run_cli(
            [
                "solve",
                "hodge",
                "--mesh",
                "hole:4",
                "--k",
                "1",
                "--scheme",
                "all",
                "--check-equivalence",
            ],
            capsys,
        )
        assert code == 0
        data = json.loads(out)
        names = [r["name"] for r in data["records"]]
        assert "hodge-equivalences" in names

    def test_malformed_mesh_file_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(
            json.dumps(
                {
                    "dim": 2,
                    "vertices": [[0, 0], [1, 0], [0, 1], [1, 1], [0.5, -1]],
                    "cells": [[0, 1, 2], [1, 3, 2], [0, 1, 3], [0, 1, 4]],
                }
            )
        )
        code, _, err = run_cli(["mesh", "info", "--mesh-file", str(bad)], capsys)
        assert code == 2
        assert err.startswith("error: MeshError")
        assert "(0, 1)" in err  # names the offending facet

    def test_unknown_mesh_spec(self, capsys):
        code, _, err = run_cli(["mesh", "info", "--mesh", "torus:3"], capsys)
        assert code == 2
        assert err.startswith("error:")
        assert err.count("\n") == 1  # single-line machine-parsable prefix

    def test_config_file_precedence(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"mesh": "box:4", "k": 1}))
        code, out, _ = run_cli(
            ["--config", str(conf), "mesh", "info", "--mesh", "box:2"], capsys
        )
        data = json.loads(out)
        assert data["config"]["mesh"] == "box:2"  # CLI beats config file
        assert data["config"]["k"] == 1  # config file beats default

    def test_determinism_byte_identical(self, capsys):
        _, out1, _ = run_cli(["verify", "base-pair", "--mesh", "box:2", "--k", "0"], capsys)
        _, out2, _ = run_cli(["verify", "base-pair", "--mesh", "box:2", "--k", "0"], capsys)
        assert out1 == out2

    def test_csv_format(self, capsys):
        code, out, _ = run_cli(
            ["verify", "base-pair", "--mesh", "box:2", "--k", "0", "--format", "csv"],
            capsys,
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "record,key,value,verdict"
        assert any("alpha" in line for line in lines)


class TestReport:
    def test_roundtrip_lossless(self):
        config = RunConfig(command="test").validate()
        report = Report(config)
        report.add(
            CheckRecord(
                "demo",
                "pass",
                numbers={"value": 1.0 / 3.0, "count": 7, "tiny": 1.2345678901234567e-13},
            )
        )
        data = roundtrip(report)
        rec = data["records"][0]
        assert rec["numbers"]["value"] == 1.0 / 3.0
        assert rec["numbers"]["tiny"] == 1.2345678901234567e-13
        assert isinstance(data["config"]["rank_tol"], float)

    def test_empty_report_valid(self):
        report = Report(RunConfig(command="noop").validate())
        data = roundtrip(report)
        assert data["records"] == []

    def test_bad_verdict_rejected(self):
        from padfeec.errors import InvalidParameter

        with pytest.raises(InvalidParameter):
            CheckRecord("x", "maybe")

    def test_determinism_across_processes(self):
        args = [sys.executable, "-m", "padfeec.cli", "verify", "duality",
                "--mesh", "hole:4", "--k", "1"]
        first = subprocess.run(args, capture_output=True).stdout
        second = subprocess.run(args, capture_output=True).stdout
        assert first == second and first

    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "padfeec.cli", "mesh", "info", "--mesh", "box:2"],
            capture_output=True,
        )
        assert proc.returncode == 0
        assert b"mesh-info" in proc.stdout


class TestWorkerCount:
    def test_env_var_respected(self, monkeypatch):
        from padfeec.cli import worker_count

        monkeypatch.setenv("PADFEEC_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("PADFEEC_THREADS", "junk")
        assert worker_count() == 1
        monkeypatch.delenv("PADFEEC_THREADS")
        assert worker_count() >= 1

    def test_run_entry_point(self):
        from padfeec.cli import run
        from padfeec.report import RunConfig

        report = run(RunConfig(command="mesh info", mesh="box:2").validate())
        assert report.all_passed
        assert report.records[0].numbers["cells"] == 8
