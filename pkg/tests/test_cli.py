import json
from pathlib import Path

import numpy as np
import pytest

from epdtlab import cli
from epdtlab.errors import NumericalFailure
from epdtlab.exponents import ModelParams, check_theorem2_hypotheses
from epdtlab.harness import SweepTable, simulation_from_dict
from epdtlab.records import read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


SMALL_RUN = {"m": 0, "n": 3, "mu": 3, "nu": 0.5, "p": 2, "epsilon": 1.0, "M": 0.5,
             "t_end": 2.0, "grid": {"n_points": 96}, "n_output": 12}


class TestDispatch:
    def test_no_command(self, capsys):
        assert cli.main([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_command(self, capsys):
        assert cli.main(["frobnicate"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_version(self):
        assert cli.main(["--version"]) == 0

    def test_missing_config_names_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert cli.main(["exponents", "--config", str(missing)]) == 2
        assert str(missing) in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["exponents", "--config", str(p)]) == 2

    def test_domain_error_is_config_error(self, tmp_path):
        assert cli.main(["exponents", "--config", write(tmp_path, "c.json", {"n": 0})]) == 2

    def test_numerical_failure_exit(self, monkeypatch, tmp_path):
        def boom(args):
            raise NumericalFailure("diverged")

        monkeypatch.setitem(cli.COMMANDS, "exponents", boom)
        assert cli.main(["exponents"]) == 3


class TestExponents:
    def test_table_and_csv(self, tmp_path, capsys):
        assert cli.main(["exponents", "--config", str(CONFIGS / "exponents.json"), "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        for word in ("delta", "p_S", "p_F", "regime"):
            assert word in out
        header, rows = read_csv_text(tmp_path / "exponents.csv")
        cases = json.loads((CONFIGS / "exponents.json").read_text())["cases"]
        assert len(rows) == len(cases)
        for case, row in zip(cases, rows):
            prm = ModelParams(**case)
            rep = check_theorem2_hypotheses(prm)
            rec = dict(zip(header, row))
            assert float(rec["delta"]) == prm.delta
            assert float(rec["p_S"]) == rep.p_strauss
            assert rec["regime"] == rep.delta_class


def read_csv_text(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


class TestHypVerify:
    def test_seeded_and_deterministic(self, tmp_path):
        for d in ("a", "b", "c"):
            seed = "1" if d != "c" else "2"
            assert cli.main(["hyp-verify", "--seed", seed, "--out", str(tmp_path / d)]) == 0
        a, b, c = (tree_bytes(tmp_path / d) for d in "abc")
        assert a == b and a != c
        assert set(a) == {"hyp2f1.csv", "adjoint_residual.csv", "psi_bands.csv"}
        assert a["psi_bands.csv"].startswith(b"beta,z_or_t,value,residual,bound")


class TestSimulate:
    def test_zero_solution(self, tmp_path):
        out = tmp_path / "zero"
        assert cli.main(["simulate", "--config", str(CONFIGS / "simulate_zero.json"), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["report"]["blew_up"] is False
        assert all(v == 0 for v in summary["max_abs_u"])
        assert summary["containment_ok"] is True

    def test_blow_up_summary(self, tmp_path):
        out = tmp_path / "blow"
        assert cli.main(["simulate", "--config", str(CONFIGS / "simulate_blowup.json"), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["report"]["blew_up"] is True
        assert summary["report"]["t_extrapolated"] >= summary["report"]["t_detect"]
        assert "heuristic" in summary["extrapolation"]
        snaps = sorted((out / "snapshots").glob("snap_*.csv"))
        assert len(snaps) == len(summary["snapshot_times"])

    def test_deterministic(self, tmp_path):
        cfg = write(tmp_path, "run.json", SMALL_RUN)
        for d in ("a", "b"):
            assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / d)]) == 0
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_snapshot_values_roundtrip(self, tmp_path):
        cfg = write(tmp_path, "run.json", SMALL_RUN)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "r")])
        traj = simulation_from_dict(SMALL_RUN).run()
        _, data = read_csv(tmp_path / "r" / "snapshots" / "snap_0005.csv")
        np.testing.assert_array_equal(data[:, 1], traj.snapshots[5].u)


class TestFunctionals:
    def test_after_simulate(self, tmp_path):
        cfg = write(tmp_path, "run.json", SMALL_RUN)
        run_dir = tmp_path / "run"
        assert cli.main(["simulate", "--config", cfg, "--out", str(run_dir)]) == 0
        fcfg = str(CONFIGS / "functionals.json")
        assert cli.main(["functionals", "--run", str(run_dir), "--config", fcfg, "--out", str(tmp_path / "f")]) == 0
        header, rows = read_csv(tmp_path / "f" / "functionals.csv")
        assert header == list(cli.FUNC_HEADER)
        assert rows.shape == (13, len(header))
        assert np.all(rows[:, header.index("j_bound_ok")] == 1.0)
        summary = json.loads((tmp_path / "f" / "functionals_summary.json").read_text())
        assert summary["j_bound_all"] is True
        assert summary["E1_relative_discrepancy"] < 0.02

    def test_needs_run(self, tmp_path):
        assert cli.main(["functionals"]) == 2
        assert cli.main(["functionals", "--run", str(tmp_path / "missing")]) == 2


class TestOde:
    def test_zhou(self, tmp_path):
        assert cli.main(["ode-blowup", "--config", str(CONFIGS / "ode_zhou.json"), "--out", str(tmp_path)]) == 0
        header, rows = read_csv_text(tmp_path / "ode_blowup.csv")
        assert header == ["epsilon", "blew_up", "t_detect", "t_extrapolated"]
        assert all(r[1] == "true" for r in rows)

    def test_kato(self, tmp_path):
        assert cli.main(["ode-blowup", "--config", str(CONFIGS / "ode_kato.json"), "--out", str(tmp_path)]) == 0
        _, rows = read_csv_text(tmp_path / "ode_blowup.csv")
        assert [r[1] for r in rows] == ["false", "false", "true", "true"]

    def test_unknown_kind(self, tmp_path):
        assert cli.main(["ode-blowup", "--config", write(tmp_path, "c.json", {"kind": "x", "p": 2})]) == 2

    def test_missing_key(self, tmp_path, capsys):
        assert cli.main(["ode-blowup", "--config", write(tmp_path, "c.json", {"kind": "zhou"})]) == 2
        assert "p" in capsys.readouterr().err


class TestSweep:
    CFG = {"base": {"p": 1.5}, "eps_values": [0.3, 0.12, 0.05, 0.02], "horizon": 1e9}

    def test_outputs(self, tmp_path):
        cfg = write(tmp_path, "s.json", self.CFG)
        for d in ("a", "b"):
            assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / d)]) == 0
        files = tree_bytes(tmp_path / "a")
        assert files == tree_bytes(tmp_path / "b")
        assert {"sweep.csv", "summary.json", "runs/run_00/summary.json", "runs/run_03/summary.json"} <= set(files)
        header, rows = read_csv(tmp_path / "a" / "sweep.csv")
        assert header == list(SweepTable.HEADER)
        assert np.all(np.diff(rows[:, 0]) < 0) and np.all(np.diff(rows[:, 3]) > 0)

    def test_non_monotone_exit(self, tmp_path, monkeypatch):
        real = cli.lifespan_sweep

        def flagged(config):
            table, fit = real(config)
            return SweepTable(table.rows, False, ("lifespan not monotone in epsilon",)), fit

        monkeypatch.setattr(cli, "lifespan_sweep", flagged)
        assert cli.main(["sweep", "--config", write(tmp_path, "s.json", self.CFG), "--out", str(tmp_path)]) == 3

    def test_bad_config(self, tmp_path):
        bad = dict(self.CFG, eps_values=[0.3, 0.2])
        assert cli.main(["sweep", "--config", write(tmp_path, "s.json", bad)]) == 2
