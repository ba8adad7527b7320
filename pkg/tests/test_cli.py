import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from moyalqft import cli
from moyalqft.errors import QuadratureError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
ORACLE = json.loads((ROOT / "tests" / "data" / "tadpole_oracle.json").read_text())


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def records(out):
    return [json.loads(line) for line in out.splitlines() if line.strip()]


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestAdapt:
    def test_standard_d4(self, capsys, tmp_path):
        code, out, err = run(capsys, "adapt", "--config", write(tmp_path, "c.json", {"dimension": 4}))
        (rec,) = records(out)
        assert code == 0 and rec["adapted"] is True and rec["residual"] < 1e-12
        assert "adapted: true" in err
        assert np.array(rec["R"]).shape == (4, 4)

    def test_scaled_standard_is_not_adapted(self, capsys, tmp_path):
        sigma = (2 * np.array([[0.0, -1.0], [1.0, 0.0]])).tolist()
        code, out, _ = run(capsys, "adapt", "--config", write(tmp_path, "c.json", {"sigma": sigma}))
        assert code == 1 and records(out)[0]["adapted"] is False

    def test_adapted_random(self, capsys, tmp_path):
        cfg = {"dimension": 4, "metric": np.diag([2.0, 1.0, 0.5, 3.0]).tolist(), "sigma": "adapted-random:42"}
        code, out, _ = run(capsys, "adapt", "--config", write(tmp_path, "c.json", cfg))
        assert code == 0 and records(out)[0]["residual"] < 1e-9

    @pytest.mark.parametrize("cfg", [
        {"metric": [[1.0, 2.0], [2.0, 1.0]]},
        {"sigma": [[0.0, 1.0], [1.0, 0.0]]},
        {"dimension": 3},
        {"bogus": 1},
        {"sigma": "adapted-random:x"},
        {"metric": np.eye(4).tolist(), "sigma": [[0.0, -1.0], [1.0, 0.0]]},
    ])
    def test_invalid_input(self, capsys, tmp_path, cfg):
        code, out, err = run(capsys, "adapt", "--config", write(tmp_path, "c.json", cfg))
        assert code == 2 and out == "" and "invalid input" in err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "adapt", "--config", tmp_path / "nope.json")
        assert code == 2


class TestVerify:
    def test_star_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "star")
        recs = records(out)
        assert code == 0
        names = {r["check"] for r in recs}
        assert {"star.tracial", "star.associativity", "star.coordinate_commutator"} <= names
        for r in recs:
            assert set(r) >= {"check", "params_digest", "residual", "tolerance", "pass"}
            assert r["pass"]

    def test_covariance_diag41(self, capsys):
        code, out, _ = run(capsys, "verify", "covariance", "--config", CONFIGS / "diag41.json",
                           "--graph", CONFIGS / "planar_tadpole.json")
        (rec,) = records(out)
        assert code == 0 and rec["residual"] < 1e-6

    def test_covariance_needs_graph(self, capsys):
        code, _, err = run(capsys, "verify", "covariance")
        assert code == 2 and "graph" in err

    def test_all_with_non_adapted_sigma(self, capsys, tmp_path):
        cfg = write(tmp_path, "c.json", {"sigma": [[0.0, -2.0], [2.0, 0.0]]})
        code, out, err = run(capsys, "verify", "all", "--config", cfg)
        recs = records(out)
        refused = [r for r in recs if r.get("error") == "precondition"]
        assert code == 2
        assert {r["check"] for r in refused} == {"covariance", "invariance"}
        assert "refused" in err

    def test_propagator_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "propagator")
        recs = {r["check"]: r for r in records(out)}
        assert code == 0
        assert recs["propagator.negative_control"]["comparison"] == ">"
        assert recs["propagator.green_final"]["residual"] < 0.05

    def test_failing_check_exit_one(self, capsys, tmp_path):
        # theta = 1, Omega = 0.5 leaves the Green residual above 5% at eps = 0.05
        cfg = write(tmp_path, "c.json", {"theta": 1.0, "omega": 0.5})
        code, out, _ = run(capsys, "verify", "propagator", "--config", cfg)
        recs = {r["check"]: r for r in records(out)}
        assert code == 1 and not recs["propagator.green_final"]["pass"]

    def test_quadrature_failure_exit_three(self, capsys, monkeypatch):
        def boom(*a, **k):
            raise QuadratureError("panel budget exhausted")

        monkeypatch.setattr(cli, "check_covariance", boom)
        code, out, err = run(capsys, "verify", "covariance", "--graph", CONFIGS / "planar_tadpole.json")
        rec = records(out)[0]
        assert code == 3 and rec["error"] == "quadrature" and rec["check"] == "covariance"

    def test_determinism(self, capsys):
        args = ("verify", "all", "--seed", "3", "--graph", CONFIGS / "nonplanar_tadpole.json")
        first = run(capsys, *args)
        second = run(capsys, *args)
        assert first[0] == 0 and first[1] == second[1]


class TestAmplitude:
    def test_oracle_benchmark(self, capsys):
        code, out, _ = run(capsys, "amplitude", "--config", CONFIGS / "benchmark.json",
                           "--graph", CONFIGS / "planar_tadpole.json")
        (rec,) = records(out)
        ref = complex(*ORACLE["benchmarks"][0]["value"])
        assert code == 0
        assert abs(complex(rec["re"], rec["im"]) - ref) < 1e-5 * abs(ref)
        assert rec["abs_error"] <= 1e-10 * abs(ref)
        assert rec["det_g_factor"] == 1.0 and rec["n"] == 1 and rec["N"] == 2

    def test_tree_vertex(self, capsys):
        code, out, _ = run(capsys, "amplitude", "--graph", CONFIGS / "tree_vertex.json")
        (rec,) = records(out)
        assert code == 0 and rec["n_delta"] == 1 and abs(rec["im"]) > 0

    def test_epsilon_flag_overrides_file(self, capsys):
        base = ("amplitude", "--config", CONFIGS / "benchmark.json", "--graph", CONFIGS / "planar_tadpole.json")
        _, a, _ = run(capsys, *base)
        _, b, _ = run(capsys, *base, "--epsilon", "0.1")
        ra, rb = records(a)[0], records(b)[0]
        assert ra["epsilon"] == 0.2 and rb["epsilon"] == 0.1
        assert ra["params_digest"] != rb["params_digest"]
        assert 0 < abs(rb["re"] - ra["re"]) < 0.5 * abs(ra["re"])

    def test_alpha_scan_csv(self, capsys):
        code, out, _ = run(capsys, "amplitude", "--graph", CONFIGS / "sunset.json", "--alpha-scan", "0.2:2:4")
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "alpha_1,alpha_2,re,im"
        assert len(lines) == 1 + 16
        assert all(len(l.split(",")) == 4 for l in lines[1:])

    def test_bad_alpha_grid(self, capsys):
        code, _, _ = run(capsys, "amplitude", "--graph", CONFIGS / "planar_tadpole.json", "--alpha-scan", "0:1:3")
        assert code == 2

    def test_constraint_violation(self, capsys, tmp_path):
        g = json.loads((CONFIGS / "tree_vertex.json").read_text())
        g["positions"][3] = [0.0, 0.0]
        code, _, _ = run(capsys, "amplitude", "--graph", write(tmp_path, "g.json", g))
        assert code == 2

    def test_non_adapted_refused(self, capsys, tmp_path):
        cfg = write(tmp_path, "c.json", {"sigma": [[0.0, -2.0], [2.0, 0.0]]})
        code, _, _ = run(capsys, "amplitude", "--config", cfg, "--graph", CONFIGS / "planar_tadpole.json")
        assert code == 2


class TestOtherCommands:
    def test_propagator(self, capsys, tmp_path):
        cfg = write(tmp_path, "c.json", {"theta": 1.0, "omega": 0.5, "mass2": 1.0, "epsilon": 0.1,
                                         "x": [1.0, 0.0], "tol": 1e-11})
        code, out, _ = run(capsys, "propagator", "--config", cfg)
        (rec,) = records(out)
        assert code == 0 and rec["value"] > 0 and rec["abs_error"] < 1e-9 * rec["value"]

    def test_action(self, capsys, tmp_path):
        cfg = write(tmp_path, "c.json", {"theta": 2.0, "omega": 1.0, "mass2": 0.0})
        code, out, _ = run(capsys, "action", "--config", cfg)
        (rec,) = records(out)
        assert code == 0 and rec["total"] == pytest.approx(np.pi, rel=1e-13)

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "moyalqft", "adapt"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["adapted"] is True

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            cli.main(["frobnicate"])
