"""Command line: simulate experiments, analyze count files, regenerate figure data."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis
from .analysis import AnalysisError
from .calibration import CALIBRATED
from .circuit import N_PHOTONS, NoiseSpec, build_cat_setup
from .config import (ConfigError, ExperimentConfig, acquisition_for, default_output,
                     default_settings, load_config)
from .detection import (CountRecord, EmptyEnsembleError, MeasurementSetting, SchemaError,
                        analyzer_scenario_single_photon, outcome_distribution,
                        read_records_csv, sample_counts, simulate, write_records_csv)

log = logging.getLogger("hypercat")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

EXACT_SCALE = 1e9
MANIFEST = "manifest.json"
REPORT = "report.json"
FRINGE = "fringe.csv"


class DataError(RuntimeError):
    pass


def setting_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_experiment(cfg: ExperimentConfig, seed: int | None = None, time_scale: float = 1.0,
                   exact: bool = False) -> tuple[list[CountRecord], dict]:
    """Simulate ``cfg`` and return per-setting records plus the manifest."""
    if not time_scale > 0:
        raise ConfigError("time scale must be positive")
    seed = cfg.seed if seed is None else seed
    ens = simulate(cfg.plan)
    if ens.empty:
        raise DataError("post-selection has zero success probability")
    rate = cfg.acquisition.rate(ens.success_prob)
    records = []
    entries = []
    for i, setting in enumerate(cfg.settings):
        sid = f"s{i:02d}"
        dist = outcome_distribution(ens, setting)
        duration = cfg.acquisition.duration(setting) * time_scale
        if exact:
            counts = np.rint(dist * EXACT_SCALE).astype(np.int64)
            rec = CountRecord(setting, counts, exact=True, setting_id=sid)
            s_seed = None
        else:
            s_seed = setting_seed(seed, i)
            rec = sample_counts(dist, rate, duration, s_seed, setting, sid)
        records.append(rec)
        entries.append({"setting_id": sid, "file": f"counts_{sid}.csv",
                        "qubit_bases": setting.label(), "rate_hz": None if exact else rate,
                        "duration_s": None if exact else duration, "seed": s_seed})
    manifest = {
        "setup": cfg.plan.name,
        "n_qubits": cfg.plan.n_qubits,
        "plan": cfg.plan.to_dict(),
        "config": _jsonable(cfg.raw),
        "seed": seed,
        "time_scale": time_scale,
        "exact": exact,
        "exact_scale": EXACT_SCALE if exact else None,
        "success_prob": ens.success_prob,
        "dropped_weight": ens.dropped,
        "settings": entries,
    }
    return records, manifest


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=str))


def write_run(out: Path, records: Sequence[CountRecord], manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for rec, entry in zip(records, manifest["settings"]):
        write_records_csv(out / entry["file"], [rec])
    # manifest last: its presence marks a complete run
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_run(directory: Path) -> list[CountRecord]:
    """Records from a run directory; the manifest (if present) supplies the
    file list and the exact-probability flag."""
    if not directory.is_dir():
        raise DataError(f"{directory} is not a directory")
    man_path = directory / MANIFEST
    exact = False
    if man_path.exists():
        try:
            manifest = json.loads(man_path.read_text())
            files = [directory / e["file"] for e in manifest["settings"]]
            exact = bool(manifest.get("exact", False))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{man_path}: malformed manifest ({exc})") from exc
    else:
        files = sorted(p for p in directory.glob("*.csv") if p.name != FRINGE)
    if not files:
        raise DataError(f"no count files in {directory}")
    records = []
    for f in files:
        if not f.exists():
            raise DataError(f"missing count file {f}")
        for rec in read_records_csv(f):
            if exact:
                rec = CountRecord(rec.setting, rec.counts, exact=True, setting_id=rec.setting_id)
            records.append(rec)
    return records


def write_fringe_csv(path: Path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "expectation", "sigma"])
        for theta, est in points:
            w.writerow([repr(theta), repr(est.value), repr(est.sigma)])


def analyze_dir(directory: Path, filter_mode: str | None = None,
                out: Path | None = None) -> dict:
    records = load_run(directory)
    report = analysis.analysis_report(records, filter_mode)
    out = out or directory
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_fringe_csv(out / FRINGE, analysis.fringe_points(records))
    return report


# ---------------------------------------------------------------------------
# figure data

def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _zbasis_rows(rec: CountRecord, n_photons: int):
    """Bar-plot rows: polarization bits, spatial bits, count."""
    n = rec.n
    for idx, c in enumerate(rec.counts):
        bits = format(idx, f"0{n}b")
        yield bits[:n_photons], bits[n_photons:], c.item()


def reproduce_fig2(out: Path, seed: int, time_scale: float, noise: NoiseSpec = CALIBRATED,
                   n_points: int = 24) -> dict:
    """Z-basis bars and M_theta fringes of the six- and eight-qubit cats."""
    summary = {}
    for variant in ("cat6", "cat8"):
        n = 2 * N_PHOTONS[variant]
        settings = (MeasurementSetting.all_z(n),) + tuple(
            MeasurementSetting.equatorial(n, j * math.pi / n_points) for j in range(n_points))
        cfg = ExperimentConfig(build_cat_setup(variant, noise), acquisition_for(variant), settings,
                               seed, None, {"setup": variant, "noise": noise.to_dict()})
        records, manifest = run_experiment(cfg, seed, time_scale)
        z = records[0]
        _write_rows(out / f"fig2_{variant}_zbasis.csv", ("polarization", "spatial", "count"),
                    _zbasis_rows(z, N_PHOTONS[variant]))
        pts = analysis.fringe_points(records)
        write_fringe_csv(out / f"fig2_{variant}_fringe.csv", pts)
        vis, phase = analysis.fringe_fit(pts, n)
        snr = analysis.signal_to_noise(z)
        summary[variant] = {"n": n, "visibility": vis.value, "visibility_sigma": vis.sigma,
                            "phase": phase.value, "phase_sigma": phase.sigma,
                            "signal_to_noise": snr.ratio, "success_prob": manifest["success_prob"],
                            "counts_per_setting": manifest["settings"][1]["rate_hz"]
                            * manifest["settings"][1]["duration_s"]}
    (out / "fig2_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def reproduce_fig3(out: Path, seed: int, time_scale: float, noise: NoiseSpec = CALIBRATED) -> dict:
    """Ten-qubit Z-basis bars, the ten M_{k pi/10} expectations and the
    fidelity/witness summary with filtered values."""
    plan = build_cat_setup("cat10", noise)
    cfg = ExperimentConfig(plan, acquisition_for("cat10"), default_settings(plan.n_qubits), seed,
                           None, {"setup": "cat10", "noise": noise.to_dict()})
    records, manifest = run_experiment(cfg, seed, time_scale)
    _write_rows(out / "fig3_zbasis.csv", ("polarization", "spatial", "count"),
                _zbasis_rows(records[0], 5))
    report = analysis.analysis_report(records, "per-qubit")
    inp = analysis.cat_input(records)
    lam_u, est_u = analysis.optimize_filter(inp, "min_witness", "uniform")
    report["filter_uniform"] = {"mode": "uniform", "lambdas": list(lam_u.lambdas),
                                "objective": "min_witness",
                                "value": est_u.value, "sigma": est_u.sigma}
    _write_rows(out / "fig3_expectations.csv", ("k", "theta", "expectation", "sigma"),
                ((e["k"], e["theta"], e["value"], e["sigma"]) for e in report["expectations"]))
    report["success_prob"] = manifest["success_prob"]
    report["mean_abs_expectation"] = float(np.mean([abs(e["value"]) for e in report["expectations"]]))
    (out / "fig3_summary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def reproduce_figA2(out: Path, visibilities: Sequence[float] = (1.0, CALIBRATED.analyzer_visibility),
                    n_points: int = 73) -> dict:
    """Single-photon analyzer curves; visibility (P++ - P+-)/(P++ + P+-) at theta = 0."""
    grid = np.linspace(0, 2 * math.pi, n_points)
    rows = []
    summary = {}
    for v in visibilities:
        c = analyzer_scenario_single_photon(grid, v)
        for i, th in enumerate(grid):
            rows.append((float(v), float(th), float(c["plus_plus"][i]), float(c["plus_minus"][i]),
                         float(c["R_plus"][i]), float(c["R_minus"][i])))
        summary[repr(float(v))] = float((c["plus_plus"][0] - c["plus_minus"][0])
                                        / (c["plus_plus"][0] + c["plus_minus"][0]))
    _write_rows(out / "figA2_curves.csv",
                ("visibility", "theta", "plus_plus", "plus_minus", "R_plus", "R_minus"), rows)
    (out / "figA2_summary.json").write_text(json.dumps({"fringe_visibility": summary},
                                                       indent=2, sort_keys=True) + "\n")
    return summary


# ---------------------------------------------------------------------------
# entry points

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    records, manifest = run_experiment(cfg, args.seed, args.time_scale, args.exact)
    out = Path(args.out) if args.out else (cfg.output or default_output(cfg.name))
    write_run(out, records, manifest)
    print(f"wrote {len(records)} settings to {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    report = analyze_dir(Path(args.input), args.filter, Path(args.out) if args.out else None)
    f, w = report["fidelity"], report["witness"]
    sig = w["significance"]
    sig = f"{sig:.1f}" if isinstance(sig, float) else sig
    print(f"n={report['n']} F = {f['value']:.4f} +/- {f['sigma']:.4f}  "
          f"W = {w['value']:.4f} ({sig} sigma)")
    if "filter" in report:
        flt = report["filter"]
        print(f"filtered W = {flt['value']:.4f} +/- {flt['sigma']:.4f} ({flt['mode']}); "
              f"filtered F = {flt['max_fidelity']['value']:.4f}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = Path(args.out) if args.out else default_output(args.figure)
    out.mkdir(parents=True, exist_ok=True)
    if args.figure == "figA2":
        s = reproduce_figA2(out)
        print("fringe visibilities: " + ", ".join(f"{k}: {v:.4f}" for k, v in s.items()))
    elif args.figure == "fig2":
        s = reproduce_fig2(out, args.seed, args.time_scale)
        for v, d in s.items():
            print(f"{v}: V = {d['visibility']:.3f} +/- {d['visibility_sigma']:.3f}, "
                  f"S/N = {d['signal_to_noise']:.0f}")
    else:
        r = reproduce_fig3(out, args.seed, args.time_scale)
        f, w = r["fidelity"], r["witness"]
        print(f"cat10: F = {f['value']:.3f} +/- {f['sigma']:.3f}, W = {w['value']:.3f} "
              f"+/- {w['sigma']:.3f}, filtered W = {r['filter']['value']:.3f} "
              f"+/- {r['filter']['sigma']:.3f}")
    print(f"wrote {args.figure} data to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypercat", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a configured experiment and write counts")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    s.add_argument("--time-scale", type=float, default=1.0, help="multiplies every duration")
    s.add_argument("--exact", action="store_true",
                   help=f"write probabilities x {EXACT_SCALE:.0e} instead of sampled counts")
    s.add_argument("--out", default=None, help="output directory (overrides the config)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="fidelity, witness and fringe fit of a run directory")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--filter", choices=("uniform", "per-qubit"), default=None)
    a.add_argument("--out", default=None, help="report directory (default: the input)")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reproduce", help="regenerate the data behind a figure")
    r.add_argument("figure", choices=("fig2", "fig3", "figA2"))
    r.add_argument("--out", default=None)
    r.add_argument("--seed", type=int, default=2024)
    r.add_argument("--time-scale", type=float, default=1.0)
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SchemaError, AnalysisError, EmptyEnsembleError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
