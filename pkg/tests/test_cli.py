import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from safezo.cli import main

LINEAR = """
problem.name = linear1d
solver.mode = EZO
solver.eta0 = 0.1
solver.T = auto
"""

TURNING = """
problem.name = turning
solver.mode = SZO
solver.eta0 = 0.5
solver.mu = 5
solver.rounds = 2
solver.T = 60
solver.sigma = 0.01
solver.delta = 0.01
run.replicates = 3
"""


@pytest.fixture
def conf(tmp_path):
    def write(text, name="run.conf"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_linear_report(self, conf, tmp_path):
        out = tmp_path / "out"
        assert main(["run", conf(LINEAR), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        (rep,) = report["replicates"]
        assert abs(rep["x_selected"][0] - 0.1) <= 0.02
        assert rep["violations"] == 0
        assert report["config"]["problem.name"] == "linear1d"
        for name in ("safety_audit.csv", "objective.csv", "boundary.csv"):
            assert (out / name).exists()
        assert not (out / "trajectory2d.csv").exists()

    def test_trajectory_columns(self, conf, tmp_path):
        out = tmp_path / "out"
        main(["run", conf(TURNING), "--out", str(out), "--replicates", "1"])
        with open(out / "rep_000" / "trajectory.csv") as fh:
            header = fh.readline().strip().split(",")
        assert header == ["t", "x_1", "x_2", "nu", "n", "gamma", "gnorm", "slack",
                          "barrier", "score", "cum_measurements"]
        assert (out / "trajectory2d.csv").exists()

    def test_replicates_and_accounting(self, conf, tmp_path):
        out = tmp_path / "out"
        assert main(["run", conf(TURNING), "--out", str(out)]) == 0
        assert sorted(p.name for p in out.glob("rep_*")) == ["rep_000", "rep_001", "rep_002"]
        report = json.loads((out / "report.json").read_text())
        for rep in report["replicates"]:
            rows = read_csv(out / f"rep_{rep['replicate']:03d}" / "trajectory.csv")
            assert int(rows[-1]["cum_measurements"]) <= rep["N_T"]
            assert rep["N_T"] == sum(3 * int(r["n"]) for r in rows)
        assert report["summary"]["total_violations"] == 0

    def test_byte_identical(self, conf, tmp_path):
        c = conf(TURNING)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", c, "--out", str(a), "--seed", "4"])
        main(["run", c, "--out", str(b), "--seed", "4", "--jobs", "2"])
        for rel in ("rep_000/trajectory.csv", "rep_002/ledger.csv", "objective.csv",
                    "boundary.csv", "trajectory2d.csv", "safety_audit.csv"):
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_seed_changes_output(self, conf, tmp_path):
        c = conf(TURNING)
        main(["run", c, "--out", str(tmp_path / "a"), "--seed", "1", "--replicates", "1"])
        main(["run", c, "--out", str(tmp_path / "b"), "--seed", "2", "--replicates", "1"])
        assert ((tmp_path / "a/rep_000/ledger.csv").read_bytes()
                != (tmp_path / "b/rep_000/ledger.csv").read_bytes())

    def test_env_default_out(self, conf, tmp_path, monkeypatch):
        monkeypatch.setenv("SAFEZO_OUT", str(tmp_path / "envout"))
        assert main(["run", conf(LINEAR)]) == 0
        assert (tmp_path / "envout" / "report.json").exists()


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", str(tmp_path / "nope.conf"), "--out", str(out)]) == 2
        assert not out.exists()

    def test_invalid_config(self, conf, tmp_path):
        out = tmp_path / "out"
        assert main(["run", conf("solver.mode = QZO\n"), "--out", str(out)]) == 2
        assert not out.exists()

    def test_slack_exhausted(self, conf, tmp_path):
        text = "problem.name = linear1d\nproblem.x0 = 1e-9\nsolver.mode = SZO\n" \
               "solver.sigma = 0.01\nsolver.T = 5\n"
        out = tmp_path / "out"
        assert main(["run", conf(text), "--out", str(out)]) == 3
        report = json.loads((out / "report.json").read_text())
        assert report["replicates"][0]["halted"]

    def test_io_error(self, conf, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["run", conf(LINEAR), "--out", str(blocker / "sub")]) == 4

    def test_console_script(self, conf, tmp_path):
        r = subprocess.run([sys.executable, "-m", "safezo.cli", "run", conf(LINEAR),
                            "--out", str(tmp_path / "o")], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr


class TestSweep:
    def test_eta_iterations_grow(self, conf, tmp_path):
        out = tmp_path / "sw"
        assert main(["sweep", conf(LINEAR), "--axis", "eta", "--values", "0.2,0.1,0.05",
                     "--out", str(out)]) == 0
        rows = read_csv(out / "sweep.csv")
        iters = [int(r["iterations"]) for r in rows]
        assert iters == sorted(iters) and len(set(iters)) == 3
        assert set(rows[0]) == {"axis", "value", "replicate", "N_T", "iterations",
                                "min_slack", "kkt_residual", "halted"}

    def test_single_value_equals_run(self, conf, tmp_path):
        c = conf(LINEAR)
        main(["run", c, "--out", str(tmp_path / "r")])
        main(["sweep", c, "--axis", "eta", "--values", "0.1", "--out", str(tmp_path / "s")])
        assert ((tmp_path / "r/rep_000/trajectory.csv").read_bytes()
                == (tmp_path / "s/eta=0.1/rep_000/trajectory.csv").read_bytes())

    def test_sigma_zero_counts_like_exact(self, conf, tmp_path):
        text = TURNING.replace("run.replicates = 3", "run.replicates = 1")
        out = tmp_path / "sw"
        main(["sweep", conf(text), "--axis", "sigma", "--values", "0,0.01", "--out", str(out)])
        rows = {float(r["value"]): int(r["N_T"]) for r in read_csv(out / "sweep.csv")}
        exact = conf(text.replace("SZO", "EZO").replace("solver.sigma = 0.01", ""), "e.conf")
        main(["run", exact, "--out", str(tmp_path / "e")])
        ezo = json.loads((tmp_path / "e/report.json").read_text())["replicates"][0]["N_T"]
        assert rows[0.0] == ezo == 2 * 60 * 3
        assert rows[0.01] > ezo

    def test_dimension_sweep(self, conf, tmp_path):
        text = "problem.name = random\nproblem.m = 2\nsolver.eta0 = 0.2\nsolver.T = 50\n"
        out = tmp_path / "sw"
        assert main(["sweep", conf(text), "--axis", "d", "--values", "1,3",
                     "--out", str(out)]) == 0
        rows = read_csv(out / "sweep.csv")
        assert [int(r["N_T"]) for r in rows] == [50 * 2, 50 * 4]

    def test_dimension_sweep_needs_random(self, conf, tmp_path):
        assert main(["sweep", conf(LINEAR), "--axis", "d", "--values", "2",
                     "--out", str(tmp_path / "x")]) == 2

    def test_nonpositive_values(self, conf, tmp_path):
        assert main(["sweep", conf(LINEAR), "--axis", "eta", "--values", "0.1,-1",
                     "--out", str(tmp_path / "x")]) == 2


class TestAudit:
    def test_clean_ledger(self, conf, tmp_path, capsys):
        out = tmp_path / "o"
        main(["run", conf(LINEAR), "--out", str(out)])
        assert main(["audit", str(out / "rep_000" / "ledger.csv"), "--problem", "linear1d"]) == 0
        assert "0 violation" in capsys.readouterr().out

    def test_violations_found(self, tmp_path, capsys):
        from safezo.oracle import Oracle
        from safezo.problems import linear1d

        p = linear1d()
        o = Oracle(p)
        o.eval_exact(np.array([0.5]), 0, t=0)
        o.eval_exact(np.array([-0.25]), 0, t=1)
        path = tmp_path / "ledger.csv"
        o.ledger.to_csv(path, p)
        assert main(["audit", str(path), "--problem", "linear1d"]) == 1
        assert "1 violation" in capsys.readouterr().out
