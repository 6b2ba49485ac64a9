import json

import numpy as np
import pytest

from ghostbohm.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, main
from ghostbohm.export import read_series
from ghostbohm.runner import OUT_DIR_ENV, run_scenario, simulate
from ghostbohm.scenario import PRESETS, scenario_from_dict, with_overrides


def test_fig1_report(tmp_path):
    rep = run_scenario(PRESETS["fig1"], out_dir=tmp_path, formats=("csv", "json", "svg"))
    assert rep.regime == "rigid-transport"
    assert not rep.partial
    written = sorted(p.name for p in tmp_path.iterdir())
    assert sorted([p.split("/")[-1] for p in rep.manifest] + ["fig1_report.json"]) == written
    bundle = read_series(tmp_path / "fig1.csv")
    n = PRESETS["fig1"].ensemble.size
    n_t = len(bundle.of_kind("centre")[0].t)
    assert sum(len(t) for t in bundle.tracks) == n_t * (2 * n + 1)
    doc = json.loads((tmp_path / "fig1_report.json").read_text())
    assert doc["config"]["name"] == "fig1" and doc["regime"] == "rigid-transport"
    assert doc["evidence"]["sup_lambda_inf"] == 0.0


def test_fig7_files(tmp_path):
    scn = with_overrides(PRESETS["fig7"], t_end=20.0)
    rep = run_scenario(scn, out_dir=tmp_path, formats=("csv",))
    names = {p.split("/")[-1] for p in rep.manifest}
    assert names == {"fig7_g.csv", "fig7_2.csv", "fig7_gap.csv"}
    for a in ("g", "2"):
        b = read_series(tmp_path / f"fig7_{a}.csv")
        boh = b.of_kind("bohmian")
        assert len(boh) == scn.ensemble.size
        assert {"dx", "dy", "q_b"} <= set(boh[0].values)
    assert rep.evidence["classical_mismatch"] < 1e-10
    assert (tmp_path / "fig7_gap.csv").read_text().startswith("t,member_id,gap\n")


def test_centre_member_scenario():
    data = PRESETS["fig3"].model_dump(mode="json")
    data["ensemble"] = {"size": 1, "seed": 0, "sampling": "fixed-offsets", "offsets": [[0.0, 0.0]]}
    sim = simulate(scenario_from_dict(data))
    assert np.abs(sim.bohmian.members[0].positions - sim.packet.q_c).max() < 1e-8


def test_workers_identical_csv(tmp_path):
    scn = with_overrides(PRESETS["fig4"], t_end=15.0)
    a = run_scenario(scn, out_dir=tmp_path / "a", workers=1, formats=("csv",))
    b = run_scenario(scn, out_dir=tmp_path / "b", workers=3, formats=("csv",))
    assert (tmp_path / "a/fig4.csv").read_bytes() == (tmp_path / "b/fig4.csv").read_bytes()
    assert a.regime == b.regime


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
    rep = run_scenario(with_overrides(PRESETS["fig1"], t_end=2.0), formats=("csv",))
    assert rep.manifest[0].startswith(str(tmp_path / "env"))


def test_cli_presets(capsys):
    assert main(["presets"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "fig7" in out and "note:" in out
    assert main(["presets", "--show", "fig5"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["name"] == "fig5"


def test_cli_run_and_plot(tmp_path, capsys):
    code = main(["run", "fig3", "--out-dir", str(tmp_path), "--t-end", "5", "--ensemble-size", "4",
                 "--seed", "3", "--format", "csv"])
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["scenario"] == "fig3"
    assert (tmp_path / "fig3.csv").exists() and (tmp_path / "fig3.svg").exists()
    assert main(["plot", str(tmp_path / "fig3.csv"), "-o", str(tmp_path / "re.svg")]) == EXIT_OK
    assert (tmp_path / "re.svg").read_text().count("<polyline") == 9


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x"')
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert main(["run", "nope"]) == EXIT_CONFIG
    assert main(["run", "fig1", "--step", "0"]) == EXIT_CONFIG
    assert main(["run", "fig1", "--workers", "0", "--t-end", "1", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_cli_blowup_exit(tmp_path):
    doc = {"name": "runaway", "model": {"nu": 0.0, "Omega": 0.0, "C": [[-1.0, 0.0], [0.0, 1.0]]},
           "packet": {"q_c": [1.0, 1.0], "p_c": [0.0, 0.0], "A": [[1.0, 0.0], [0.0, 1.0]]},
           "grid": {"t_end": 40.0}, "ensemble": {"size": 2, "seed": 0},
           "thresholds": {"overflow_guard": 1e6}}
    path = tmp_path / "runaway.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path), "--out-dir", str(tmp_path)]) == EXIT_BLOWUP
    report = json.loads((tmp_path / "runaway_report.json").read_text())
    assert report["partial"] and report["truncated"]["packet"]


def test_cli_validate_subset(tmp_path, capsys):
    summary = tmp_path / "v.json"
    code = main(["validate", "--summary", str(summary), "--check", "critical_root", "--check", "biham_degeneracy"])
    assert code == EXIT_OK
    doc = json.loads(summary.read_text())
    assert doc["passed"] and doc["n_checks"] == 2
