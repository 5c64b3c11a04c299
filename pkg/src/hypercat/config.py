"""Experiment configuration files (JSON or YAML).

Example::

    {
      "setup": "cat10",                 # or an inline CircuitPlan document
      "noise": {"preset": "calibrated", "xi": 0.12},
      "acquisition": {"rate_hz": 0.021, "duration_s": {"z": 21600, "theta": 5400}},
      "settings": "default",            # or ["Z", 0.314159, [0.0, "Z", ...], ...]
      "seed": 7,
      "output": "runs/cat10"
    }
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .calibration import CALIBRATED
from .circuit import VARIANTS, CircuitError, CircuitPlan, NoiseSpec, build_cat_setup
from .detection import MeasurementSetting
from .fock import FockError

OUT_ENV = "HYPERCAT_OUT"

# per-setting coincidence rates and acquisition times of the experiment
DEFAULT_ACQUISITION = {
    "cat6": {"rate_hz": 200.0, "duration_s": {"z": 150.0, "theta": 150.0}},
    # ten-photon rate is 1/160 of the eight-photon one
    "cat8": {"rate_hz": 0.021 * 160, "duration_s": {"z": 480.0, "theta": 480.0}},
    "cat10": {"rate_hz": 0.021, "duration_s": {"z": 6 * 3600.0, "theta": 1.5 * 3600.0}},
}
CUSTOM_ACQUISITION = {"rate_hz": 100.0, "duration_s": {"z": 100.0, "theta": 100.0}}

NOISE_PRESETS = {"ideal": NoiseSpec(), "calibrated": CALIBRATED}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Acquisition:
    rate_hz: float | None
    duration_z: float
    duration_theta: float
    trial_rate_hz: float | None = None

    def rate(self, success_prob: float) -> float:
        return self.rate_hz if self.rate_hz is not None else self.trial_rate_hz * success_prob

    def duration(self, setting: MeasurementSetting) -> float:
        return self.duration_z if setting.is_all_z else self.duration_theta


@dataclass(frozen=True)
class ExperimentConfig:
    plan: CircuitPlan
    acquisition: Acquisition
    settings: tuple[MeasurementSetting, ...]
    seed: int = 0
    output: Path | None = None
    raw: Mapping[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.plan.name


def default_settings(n: int) -> tuple[MeasurementSetting, ...]:
    """All-Z plus theta = k pi / n for k = 1..n."""
    return (MeasurementSetting.all_z(n),) + tuple(
        MeasurementSetting.equatorial(n, k * math.pi / n) for k in range(1, n + 1))


def default_output(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "hypercat_out")) / name


def _noise(spec: Any) -> NoiseSpec:
    if spec is None:
        return NoiseSpec()
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, Mapping):
        raise ConfigError("noise must be a mapping or a preset name")
    spec = dict(spec)
    preset = spec.pop("preset", "ideal")
    if preset not in NOISE_PRESETS:
        raise ConfigError(f"unknown noise preset {preset!r}; choose from {sorted(NOISE_PRESETS)}")
    known = {f.name for f in fields(NoiseSpec)}
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown noise keys {sorted(unknown)}")
    for k in ("xi", "analyzer_visibility"):
        if isinstance(spec.get(k), list):
            spec[k] = tuple(spec[k])
    return replace(NOISE_PRESETS[preset], **spec)


def _settings(spec: Any, n: int) -> tuple[MeasurementSetting, ...]:
    if spec in (None, "default"):
        return default_settings(n)
    if not isinstance(spec, list) or not spec:
        raise ConfigError("settings must be 'default' or a non-empty list")
    out = []
    for item in spec:
        if isinstance(item, str) and item.strip().upper() == "Z":
            out.append(MeasurementSetting.all_z(n))
        elif isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(MeasurementSetting.equatorial(n, float(item)))
        elif isinstance(item, list):
            if len(item) != n:
                raise ConfigError(f"setting {item} has {len(item)} entries, expected {n}")
            out.append(MeasurementSetting(tuple(item)))
        else:
            raise ConfigError(f"cannot read setting {item!r}")
    return tuple(out)


def acquisition_for(name: str, spec: Any = None) -> Acquisition:
    """Acquisition block with the variant's defaults filled in."""
    base = DEFAULT_ACQUISITION.get(name, CUSTOM_ACQUISITION)
    spec = dict(spec or {})
    rate = spec.get("rate_hz", base["rate_hz"])
    trial = spec.get("trial_rate_hz")
    if rate == "derive":
        if not isinstance(trial, (int, float)) or trial <= 0:
            raise ConfigError("rate_hz 'derive' needs a positive trial_rate_hz")
        rate = None
    elif not isinstance(rate, (int, float)) or rate < 0:
        raise ConfigError(f"rate_hz must be non-negative or 'derive', got {rate!r}")
    dur = spec.get("duration_s", base["duration_s"])
    if isinstance(dur, (int, float)):
        dur = {"z": dur, "theta": dur}
    try:
        dz, dt = float(dur["z"]), float(dur["theta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("duration_s must be a number or {z, theta}") from exc
    if dz <= 0 or dt <= 0:
        raise ConfigError("durations must be positive")
    return Acquisition(None if rate is None else float(rate), dz, dt, trial)


def parse_config(doc: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - {"setup", "noise", "acquisition", "settings", "seed", "output"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    setup = doc.get("setup")
    try:
        if isinstance(setup, str):
            if setup not in VARIANTS:
                raise ConfigError(f"unknown setup {setup!r}; choose from {VARIANTS}")
            plan = build_cat_setup(setup, _noise(doc.get("noise")))
        elif isinstance(setup, Mapping):
            plan = CircuitPlan.from_dict(setup)
            if "noise" in doc:
                plan = plan.with_noise(_noise(doc["noise"]))
        else:
            raise ConfigError("setup must be a variant name or an inline plan")
    except (CircuitError, FockError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid setup/noise: {exc}") from exc
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    out = doc.get("output")
    try:
        settings = _settings(doc.get("settings"), plan.n_qubits)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(plan, acquisition_for(plan.name, doc.get("acquisition")), settings,
                            seed, Path(out) if out else None, dict(doc))


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc)
