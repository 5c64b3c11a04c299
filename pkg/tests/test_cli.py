import csv
import json
import subprocess
import sys

import pytest

from hypercat import analysis as A
from hypercat import cli, config
from hypercat.calibration import CALIBRATED
from hypercat.circuit import INJECTED, CircuitPlan, SourceSpec


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_exact_ideal_cat8_has_unit_fidelity(tmp_path):
    cfg = write_cfg(tmp_path, {"setup": "cat8", "noise": "ideal"})
    out = tmp_path / "run"
    assert run("simulate", "--config", cfg, "--exact", "--out", out) == cli.EXIT_OK
    assert run("analyze", "--in", out) == cli.EXIT_OK
    rep = json.loads((out / cli.REPORT).read_text())
    assert rep["fidelity"]["value"] == pytest.approx(1, abs=1e-8)
    assert rep["fidelity"]["sigma"] == 0
    assert rep["n"] == 8


def test_default_run_layout(tmp_path):
    cfg = write_cfg(tmp_path, {"setup": "cat10", "noise": "ideal", "seed": 3})
    out = tmp_path / "run"
    assert run("simulate", "--config", cfg, "--out", out, "--time-scale", 0.5) == 0
    man = json.loads((out / cli.MANIFEST).read_text())
    assert man["n_qubits"] == 10 and len(man["settings"]) == 11
    assert man["settings"][0]["duration_s"] == pytest.approx(21600 * 0.5)
    assert man["settings"][1]["duration_s"] == pytest.approx(5400 * 0.5)
    assert man["settings"][0]["rate_hz"] == pytest.approx(0.021)
    assert all((out / e["file"]).exists() for e in man["settings"])


def test_sampled_calibrated_cat10_agrees_with_exact(tmp_path):
    cfg = write_cfg(tmp_path, {"setup": "cat10", "noise": "calibrated", "seed": 5})
    exact_dir, sampled_dir = tmp_path / "exact", tmp_path / "sampled"
    assert run("simulate", "--config", cfg, "--exact", "--out", exact_dir) == 0
    assert run("simulate", "--config", cfg, "--out", sampled_dir) == 0
    assert run("analyze", "--in", exact_dir) == 0
    assert run("analyze", "--in", sampled_dir, "--filter", "per-qubit") == 0
    ex = json.loads((exact_dir / cli.REPORT).read_text())
    sa = json.loads((sampled_dir / cli.REPORT).read_text())
    assert abs(sa["fidelity"]["value"] - ex["fidelity"]["value"]) < 3 * sa["fidelity"]["sigma"]
    assert sa["filter"]["max_fidelity"]["value"] >= sa["fidelity"]["value"]
    assert sa["filter"]["value"] <= sa["witness"]["value"]
    with open(sampled_dir / cli.FRINGE) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10 and set(rows[0]) == {"theta", "expectation", "sigma"}


def test_seed_override_changes_counts(tmp_path):
    cfg = write_cfg(tmp_path, {"setup": "cat6", "noise": "calibrated", "seed": 1})
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run("simulate", "--config", cfg, "--out", a, "--time-scale", 0.01)
    run("simulate", "--config", cfg, "--out", b, "--time-scale", 0.01)
    run("simulate", "--config", cfg, "--out", c, "--time-scale", 0.01, "--seed", 2)
    f = "counts_s00.csv"
    assert (a / f).read_bytes() == (b / f).read_bytes()
    assert (a / f).read_bytes() != (c / f).read_bytes()


def test_yaml_config_with_custom_settings(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("setup: cat6\nnoise:\n  preset: calibrated\n  xi: 0.0\n"
                    "settings: [Z, 0.5236, [Z, Z, Z, 0.1, 0.2, 0.3]]\n"
                    "acquisition: {rate_hz: 50, duration_s: {z: 10, theta: 20}}\nseed: 4\n")
    out = tmp_path / "run"
    assert run("simulate", "--config", path, "--out", out) == 0
    man = json.loads((out / cli.MANIFEST).read_text())
    assert [e["qubit_bases"].count("Z") for e in man["settings"]] == [6, 0, 3]
    assert man["settings"][2]["duration_s"] == 20
    assert man["config"]["noise"]["xi"] == 0.0


def test_output_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv(config.OUT_ENV, str(tmp_path / "root"))
    cfg = write_cfg(tmp_path, {"setup": "cat6", "noise": "ideal"})
    assert run("simulate", "--config", cfg, "--exact") == 0
    assert (tmp_path / "root" / "cat6" / cli.MANIFEST).exists()


@pytest.mark.parametrize("doc", [
    {"setup": "cat12"},
    {"setup": "cat6", "colour": "blue"},
    {"setup": "cat6", "noise": {"preset": "noisy"}},
    {"setup": "cat6", "noise": {"tau": -1}},
    {"setup": "cat6", "seed": -4},
    {"setup": "cat6", "settings": [[0.1, 0.2]]},
    {"setup": "cat6", "acquisition": {"rate_hz": "fast"}},
    {"setup": "cat6", "acquisition": {"duration_s": 0}},
])
def test_config_errors_exit_2(tmp_path, doc):
    cfg = write_cfg(tmp_path, doc)
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_CONFIG


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("simulate", "--config", bad) == cli.EXIT_CONFIG
    assert run("simulate", "--config", tmp_path / "missing.json") == cli.EXIT_CONFIG


def test_data_errors_exit_3(tmp_path):
    assert run("analyze", "--in", tmp_path / "nowhere") == cli.EXIT_DATA
    (tmp_path / "empty").mkdir()
    assert run("analyze", "--in", tmp_path / "empty") == cli.EXIT_DATA
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.csv").write_text("setting_id,qubit_bases,outcome_bitstring,count\ns,Z;Z,00,-3\n")
    assert run("analyze", "--in", bad) == cli.EXIT_DATA


def test_analyze_missing_settings_exit_3(tmp_path):
    cfg = write_cfg(tmp_path, {"setup": "cat6", "noise": "ideal", "settings": ["Z", 0.5236]})
    out = tmp_path / "run"
    assert run("simulate", "--config", cfg, "--exact", "--out", out) == 0
    assert run("analyze", "--in", out) == cli.EXIT_DATA


def test_zero_success_probability_exit_3(tmp_path):
    # one photon, two detectors that must both fire
    src = SourceSpec(INJECTED, (0,), amplitudes=(1, 0))
    plan = CircuitPlan((src,), (), ((0,), (1,)), (("pol", 0), ("pol", 1)), name="dark")
    cfg = write_cfg(tmp_path, {"setup": plan.to_dict()})
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_DATA


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hypercat", "reproduce", "figA2", "--out",
                        str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    summary = json.loads((tmp_path / "figA2_summary.json").read_text())
    assert summary["fringe_visibility"]["1.0"] == pytest.approx(1, abs=1e-12)
    assert summary["fringe_visibility"][repr(CALIBRATED.analyzer_visibility)] == pytest.approx(0.99)


def test_reproduce_fig2_fringe_period(tmp_path):
    assert run("reproduce", "fig2", "--out", tmp_path, "--time-scale", 0.5) == 0
    with open(tmp_path / "fig2_cat6_fringe.csv") as fh:
        rows = list(csv.DictReader(fh))
    pts = [(float(r["theta"]), A.Estimate(float(r["expectation"]), float(r["sigma"]))) for r in rows]
    assert len(pts) == 24
    fits = {n: A.fringe_fit(pts, n)[0].value for n in (4, 5, 6, 7, 8)}
    assert max(fits, key=fits.get) == 6
    assert 0.4 < fits[6] < 0.8
    summary = json.loads((tmp_path / "fig2_summary.json").read_text())
    assert set(summary) == {"cat6", "cat8"}
    with open(tmp_path / "fig2_cat6_zbasis.csv") as fh:
        z = list(csv.DictReader(fh))
    assert len(z) == 64 and sum(int(r["count"]) for r in z) > 0


def test_reproduce_fig3_summary(tmp_path):
    assert run("reproduce", "fig3", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "fig3_summary.json").read_text())
    assert rep["n"] == 10
    assert rep["filter"]["mode"] == "per-qubit" and rep["filter_uniform"]["mode"] == "uniform"
    assert rep["filter"]["value"] <= rep["witness"]["value"]
    with open(tmp_path / "fig3_expectations.csv") as fh:
        assert [int(r["k"]) for r in csv.DictReader(fh)] == list(range(1, 11))
    with open(tmp_path / "fig3_zbasis.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1024
