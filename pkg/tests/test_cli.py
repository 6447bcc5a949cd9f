import csv
import json
import math

import pytest

from mixlab import experiments
from mixlab.cli import main
from mixlab.errors import PreconditionError


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_exact_mode_report(tmp_path, capsys):
    cfg = write(tmp_path, "e.json", {"name": "c6", "graph": "cycle:n=6", "svg": True})
    out = tmp_path / "out"
    assert main(["exact", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "exact.json").read_text())
    assert {"t_u", "t_rel", "t_hit"} <= set(report)
    assert report["t_u"] == 9
    man = json.loads((out / "manifest.json").read_text())
    assert man["scenario"]["graph"] == "cycle:n=6" and man["version"]
    assert "exact.json" in man["outputs"] and (out / "gstar.svg").read_text().startswith("<svg")


def test_lamplighter_identity_mode(tmp_path):
    cfg = write(tmp_path, "l.json", {"graph": "cycle:n=3", "parameters": {"mode": "identity", "t_max": 20}})
    assert main(["lamplighter", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "identity.csv")
    assert len(rows) == 20 and max(float(r["max_gap"]) for r in rows) <= 1e-10


def test_lamplighter_mode_flag_overrides(tmp_path):
    cfg = write(tmp_path, "l.json", {"graph": "cycle:n=4", "parameters": {"mode": "identity", "t_max": 40}})
    assert main(["lamplighter", "--config", cfg, "--out", str(tmp_path / "o"), "--mode", "exact"]) == 0
    rep = json.loads((tmp_path / "o" / "lamplighter.json").read_text())
    assert rep["status"] == "determined" and rep["estimate_total"] == rep["t_star"] + rep["t_u_base"]


@pytest.mark.parametrize("data, field", [
    ({"graph": "cyc(3"}, "graph"),
    ({"graph": "cycle:n=3", "colour": 1}, "colour"),
    ({"graph": "cycle:n=3", "parameters": {"epsilon": 0.1}}, "epsilon"),
    ({"graph": "cycle:n=3", "mode": "simulate"}, "mode"),
])
def test_precondition_exit_code_names_field(tmp_path, capsys, data, field):
    cfg = write(tmp_path, "bad.json", data)
    assert main(["exact", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert f"[{field}]" in capsys.readouterr().err


def test_missing_config_is_precondition(tmp_path, capsys):
    assert main(["exact", "--config", str(tmp_path / "nope.json")]) == 2
    assert "[config]" in capsys.readouterr().err


def test_capacity_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "big.json", {"graph": "torus:n=5,d=6"})
    assert main(["exact", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    cfg = write(tmp_path, "dp.json", {"graph": "cycle:n=24", "parameters": {"mode": "exact", "t_max": 5}})
    assert main(["lamplighter", "--config", cfg, "--out", str(tmp_path / "o2")]) == 3


def test_simulate_is_deterministic_across_threads(tmp_path):
    cfg = write(tmp_path, "s.json", {"graph": "torus:n=4,d=2", "seed": 3,
                                      "parameters": {"t_max": 80, "checkpoint_step": 8, "replicas": 40_000,
                                                     "schedule": [8, 0]}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    for name in ("coverage.csv", "cover_thresholds.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert (tmp_path / "a" / "coverage.csv").read_bytes() != (tmp_path / "c" / "coverage.csv").read_bytes()


def test_csv_cells_finite_and_manifest_roundtrip(tmp_path):
    cfg = write(tmp_path, "m.json", {"mode": "lamplighter", "graph": "hypercube:d=3",
                                      "parameters": {"mode": "mc", "t_grid": [0, 20, 40, 60, 80, 100],
                                                     "replicas": 4000}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    for row in read_csv(tmp_path / "o" / "curve.csv"):
        assert all(math.isfinite(float(v)) for v in row.values())
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert experiments.Scenario.from_dict(man["scenario"]).as_dict() == man["scenario"]


def test_bounds_mode_grid(tmp_path):
    cfg = write(tmp_path, "b.json", {"parameters": {"formula": "local_time",
                                                    "grid": {"t": [0, 128], "pi_S": [0.5], "t_rel": [2],
                                                             "C0": [0.02]}}})
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "bounds.csv")
    assert float(rows[0]["value"]) == 1.0
    assert float(rows[1]["value"]) == pytest.approx(math.exp(-0.64))
    bad = write(tmp_path, "bb.json", {"parameters": {"formula": "local_time", "inputs": [{"tt": 1}]}})
    assert main(["bounds", "--config", bad, "--out", str(tmp_path / "o2")]) == 2


def test_check_assumptions_mode(tmp_path):
    cfg = write(tmp_path, "a.json", {"graph": "cycle:n=8"})
    assert main(["check-assumptions", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "assumptions.json").read_text())
    assert rep["K2"] == "infeasible"


def test_scaling_study_torus_reports_both_normalizers(tmp_path):
    cfg = write(tmp_path, "t.json", {"parameters": {"family": "torus", "n": [3, 4], "d": 3, "replicas": 2000}})
    out = tmp_path / "o"
    assert main(["scaling-study", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "scaling.csv")
    assert rows[-1]["instance"] == "summary"
    for r, n in zip(rows[:-1], (3, 4)):
        assert r["status"] == "determined"
        assert int(r["normalizer_d_n_d"]) == 3 * n**3
        assert int(r["normalizer_d_n_d2"]) == 3 * n**5
    first = (out / "scaling.csv").read_bytes()
    assert main(["scaling-study", "--config", cfg, "--out", str(tmp_path / "o2")]) == 0
    assert (tmp_path / "o2" / "scaling.csv").read_bytes() == first


def test_geometric_grid():
    grid = experiments.geometric_grid(4, 100, 1.5)
    assert grid[0] == 0 and grid[1] == 4 and grid[-1] >= 100
    assert grid == sorted(set(grid))


def test_scenario_rejects_non_object():
    with pytest.raises(PreconditionError):
        experiments.Scenario.from_dict([1, 2])
