import csv
import io
import json
import subprocess
import sys

import pytest

from parakmu.cli import EXIT_DOMAIN, EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, run_cli

BOX = ["--box", "-1,1,-1,1,1,3"]


class TestVerify:
    def test_documented_example(self, tmp_path):
        out = tmp_path / "report.json"
        code = run_cli(["verify", "--preset", "ex1", "--suite", "L1,L2,curvature", "--grid", "lattice:5,5,5", *BOX, "--out", str(out)])
        assert code == EXIT_OK
        d = json.loads(out.read_text())
        assert d["passed"] is True
        assert d["metadata"]["grid"]["spec"] == "lattice:5,5,5"

    def test_failure_exit(self, capsys):
        code = run_cli(["verify", "--preset", "ex1", "--suite", "pasa", "--grid", "lattice:2,2,2", "--format", "text"])
        assert code == EXIT_FAIL
        assert "overall: FAIL" in capsys.readouterr().out

    def test_tolerance_flag(self, capsys):
        args = ["verify", "--preset", "ex1", "--suite", "axioms", "--grid", "lattice:2,2,2", "--format", "csv"]
        assert run_cli(args + ["--tol", "first=-1"]) == EXIT_FAIL
        capsys.readouterr()
        assert run_cli(args + ["--tol", "first"]) == EXIT_USAGE

    def test_deformation_suite_with_commas(self, capsys):
        code = run_cli(["verify", "--preset", "ex1", "--suite", "axioms,deformation(3)", "--grid", "lattice:2,2,2", "--format", "text"])
        assert code == EXIT_OK
        assert "deformation(3).nu_bar" in capsys.readouterr().out


class TestConstruct:
    def test_round_trip(self, tmp_path, capsys):
        m = tmp_path / "m.json"
        code = run_cli(["construct", "--case", "case2", "--r", "z+2", "--f", "0", "--s", "0", "--domain", "0,3", "--out", str(m)])
        assert code == EXIT_OK
        code = run_cli(["verify", "--manifest", str(m), "--suite", "axioms,L1,curvature", "--grid", "random:30", "--format", "text"])
        assert code == EXIT_OK
        assert "overall: PASS" in capsys.readouterr().out

    def test_negative_domain(self, capsys):
        code = run_cli(["construct", "--case", "case1", "--r", "1", "--f", "0", "--s", "0", "--domain", "-2,-1"])
        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out)["domain"]["box"][2] == [-2.0, -1.0]

    @pytest.mark.parametrize(
        "args, code",
        [
            (["--case", "case1", "--r", "z +", "--f", "0", "--s", "0", "--domain", "1,2"], EXIT_DOMAIN),
            (["--case", "case1", "--r", "z - 1.5", "--f", "0", "--s", "0", "--domain", "1,2"], EXIT_DOMAIN),
            (["--case", "case1", "--r", "z", "--f", "0", "--domain", "1,2"], EXIT_USAGE),
            (["--preset", "ex1", "--r", "z"], EXIT_USAGE),
            (["--preset", "ex1", "--case", "case1"], EXIT_USAGE),
            ([], EXIT_USAGE),
            (["--manifest", "/nonexistent/m.json"], EXIT_IO),
            (["--preset", "ex1", "--out", "/nonexistent/dir/m.json"], EXIT_IO),
        ],
    )
    def test_errors(self, args, code, capsys):
        assert run_cli(["construct", *args]) == code
        if code != EXIT_OK:
            assert capsys.readouterr().err


class TestNullity:
    def test_csv(self, tmp_path):
        out = tmp_path / "n.csv"
        assert run_cli(["nullity", "--preset", "ex1", "--seed", "2", "--out", str(out)]) == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert len(rows) == 100
        for row in rows[:10]:
            z = float(row["z"])
            assert abs(float(row["kappa"]) - (z * z - 1)) < 1e-9

    def test_bad_grid(self):
        assert run_cli(["nullity", "--preset", "ex1", "--grid", "random:-3"]) == EXIT_USAGE


class TestDeform:
    def test_manifest_and_report(self, tmp_path):
        m, r = tmp_path / "d.json", tmp_path / "r.json"
        code = run_cli(["deform", "--preset", "ex1", "--alpha", "0.5", "--grid", "lattice:3,3,3", "--out", str(m), "--report", str(r)])
        assert code == EXIT_OK
        assert json.loads(m.read_text())["deformations"] == [0.5]
        assert json.loads(r.read_text())["passed"] is True

    def test_negative_alpha(self):
        assert run_cli(["deform", "--preset", "ex1", "--alpha", "-1", "--out", "-"]) == EXIT_DOMAIN


class TestHelp:
    def test_grammar_in_help(self):
        res = subprocess.run([sys.executable, "-m", "parakmu", "verify", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        for word in ("sqrt", "ln", "lattice:NX,NY,NZ", "--lambda-min", "exit codes"):
            assert word in res.stdout
