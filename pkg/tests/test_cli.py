import csv
import json
import math

import numpy as np
import pytest

from corner_euler import cli
from corner_euler.biot_savart import QuadratureConfig
from corner_euler.scenarios import ConfigurationError, ScenarioSpec
from corner_euler.transport import IntegrationError

TINY = {"scenario": {"kind": "A_abs_plus_one", "theta": math.pi / 3, "mesh": [6, 6]},
        "T": 0.1, "dt": 0.02, "sample_every": 2}


def write_cfg(path, d):
    path.write_text(json.dumps(d), encoding="utf-8")
    return path


def test_config_roundtrip():
    cfg = cli.RunConfig(ScenarioSpec("B_capped_ramp", math.pi / 2, epsilon=0.02, mesh=(16, 8)),
                        T=4.0, dt=5e-3, sample_every=3,
                        quad=QuadratureConfig(refinement_depth=2, exclusion_radius=1e-4),
                        output_dir="x", seed=7, snapshots=True)
    again = cli.RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_config_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        cli.RunConfig.from_dict({**TINY, "bogus": 1})
    with pytest.raises(ConfigurationError):
        cli.RunConfig.from_dict({**TINY, "scenario": {"kind": "C_abs", "theta": 1.0}})
    with pytest.raises(ConfigurationError):
        cli.RunConfig.from_dict({**TINY, "dom": {"theta": 2.0}})
    with pytest.raises(ConfigurationError):
        cli.RunConfig.from_dict({**TINY, "quad": {"refinement_depth": -2}})


def test_kind_for_theta_covers_all_regimes():
    kinds = [cli.kind_for_theta(t) for t in cli.SWEEP_THETAS]
    assert kinds == ["A_abs_plus_one"] * 3 + ["B_capped_ramp"] + ["C_abs"] * 3 + ["D_odd_reflection"]


def test_run_writes_outputs(tmp_path, capsys):
    cfgp = write_cfg(tmp_path / "cfg.json", {**TINY, "output_dir": str(tmp_path / "out")})
    assert cli.run_cli(["run", "--config", str(cfgp), "--quiet"]) == 0
    out = tmp_path / "out"
    with open(out / "series.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    # [TRIVIAL] fixed schema
    assert rows[0] == ["time", "L", "marker_0_x1", "marker_1_x1", "marker_2_x1", "marker_3_x1",
                       "circulation", "omega_min", "omega_max"]
    assert len(rows) == 1 + 4
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert {"theta", "beta", "mode", "rate", "r_squared", "arrival_times"} <= set(summary)
    assert summary["beta"] == pytest.approx(3.0)


def test_run_outputs_are_byte_identical(tmp_path):
    # [DERIVED] determinism across repeated runs and worker counts
    blobs = []
    for k, workers in enumerate(["1", "1", "4"]):
        d = tmp_path / f"o{k}"
        cfgp = write_cfg(tmp_path / f"c{k}.json", {**TINY, "output_dir": str(d)})
        assert cli.run_cli(["run", "--config", str(cfgp), "--quiet", "--workers", workers]) == 0
        blobs.append(tuple((d / f).read_bytes() for f in ("series.csv", "summary.json")))
    assert blobs[0] == blobs[1] == blobs[2]


def test_flag_overrides(tmp_path):
    assert cli.run_cli(["run", "--theta", str(2 * math.pi / 3), "--nr", "6", "--nphi", "6",
                        "--T", "0.04", "--dt", "0.02", "--out", str(tmp_path / "o"), "--quiet"]) == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text(encoding="utf-8"))
    assert s["kind"] == "C_abs" and s["steps"] == 2


def test_resume_equivalence_via_cli(tmp_path):
    base = {**TINY, "T": 0.08}
    straight = tmp_path / "straight"
    write_cfg(tmp_path / "a.json", {**base, "output_dir": str(straight)})
    assert cli.run_cli(["run", "--config", str(tmp_path / "a.json"), "--quiet"]) == 0
    first = tmp_path / "first"
    write_cfg(tmp_path / "b.json", {**base, "T": 0.04, "output_dir": str(first)})
    assert cli.run_cli(["run", "--config", str(tmp_path / "b.json"), "--quiet"]) == 0
    second = tmp_path / "second"
    write_cfg(tmp_path / "c.json", {**base, "output_dir": str(second)})
    assert cli.run_cli(["run", "--config", str(tmp_path / "c.json"), "--quiet",
                        "--resume", str(first / "state.json")]) == 0
    a = json.loads((straight / "state.json").read_text())["marker_x1"]
    b = json.loads((second / "state.json").read_text())["marker_x1"]
    assert np.abs(np.subtract(a, b)).max() <= 1e-10


def test_green_selftest_command(capsys):
    # [TRIVIAL] formula identities
    assert cli.run_cli(["green-selftest", "--theta", "1.5708", "--samples", "200"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["boundary_residual"] < 1e-10 and rep["symmetry_residual"] < 1e-10


def test_classify_fixture(tmp_path, capsys):
    # [TRIVIAL] synthetic exponential fixture
    t = np.linspace(0, 3, 50)
    p = tmp_path / "series.csv"
    with open(p, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "L", "marker_0_x1", "circulation", "omega_min", "omega_max"])
        for ti in t:
            w.writerow([repr(float(ti)), repr(5 * math.exp(2 * ti)), "0.1", "1", "1", "2"])
    assert cli.run_cli(["classify", str(p)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["mode"] == "exponential" and d["rate"] == pytest.approx(2.0, abs=0.02)


def test_velocity_probe_command(tmp_path):
    out = tmp_path / "probe.json"
    assert cli.run_cli(["velocity-probe", "--theta", str(math.pi / 3), "--nr", "16", "--nphi", "16",
                        "--out", str(out), "--quiet"]) == 0
    d = json.loads(out.read_text())
    assert d["edge_inflow"] is True and d["u_corner"] == [0.0, 0.0]


def test_sweep_command(tmp_path):
    assert cli.run_cli(["sweep", "--thetas", f"{math.pi / 3},{2 * math.pi / 3}", "--nr", "4",
                        "--nphi", "4", "--T", "0.02", "--dt", "0.01", "--out", str(tmp_path),
                        "--quiet"]) == 0
    with open(tmp_path / "sweep.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["theta", "beta", "kind", "mode"] and len(rows) == 3


@pytest.mark.parametrize("argv", [["bogus"], ["run", "--nope"], ["run", "--theta", "abc"],
                                  ["run", "--theta", "2.5", "--kind", "A_abs_plus_one"],
                                  ["run", "--config", "/nonexistent/cfg.json"], []])
def test_configuration_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.run_cli(argv) == 2


def test_integration_failure_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise IntegrationError("non-finite velocity at point 5", index=5, step=3)

    monkeypatch.setattr(cli, "run_simulation", boom)
    cfgp = write_cfg(tmp_path / "cfg.json", {**TINY, "output_dir": str(tmp_path / "o")})
    assert cli.run_cli(["run", "--config", str(cfgp), "--quiet"]) == 3
