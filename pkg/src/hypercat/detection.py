"""Coincidence post-selection, analyzer rotations and count sampling.

Bit conventions: qubit 0 is the most significant bit of a basis index and the
leftmost character of an outcome bitstring. For an equatorial setting at
angle theta, outcome 0 is the projection onto |R> = (|0> + e^{i theta}|1>)/sqrt(2)
and outcome 1 onto |L> = (|0> - e^{i theta}|1>)/sqrt(2), so the parity
(-1)^{#1s} estimates <M_theta^{(x)n}>.
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import fock
from .circuit import Branch, CircuitPlan, evolve
from .fock import H, OpticalState


class EmptyEnsembleError(RuntimeError):
    """Raised when a post-selected ensemble with zero weight is used."""


@dataclass(frozen=True)
class QubitEnsemble:
    """Normalized post-selected qubit state; ``rho is None`` marks an empty
    post-selection (success probability zero)."""

    rho: np.ndarray | None
    n: int
    success_prob: float
    dropped: float = 0.0

    @property
    def empty(self) -> bool:
        return self.rho is None

    def require(self) -> np.ndarray:
        if self.rho is None:
            raise EmptyEnsembleError("post-selection left no events")
        return self.rho


Z = "Z"


@dataclass(frozen=True)
class MeasurementSetting:
    """Per-qubit basis: ``"Z"`` or an equatorial angle in radians."""

    bases: tuple

    def __post_init__(self):
        cleaned = []
        for b in self.bases:
            if isinstance(b, str):
                if b.strip().upper() != Z:
                    raise ValueError(f"unknown basis {b!r}")
                cleaned.append(Z)
            else:
                cleaned.append(float(b))
        object.__setattr__(self, "bases", tuple(cleaned))

    @property
    def n(self) -> int:
        return len(self.bases)

    @classmethod
    def all_z(cls, n: int) -> "MeasurementSetting":
        return cls((Z,) * n)

    @classmethod
    def equatorial(cls, n: int, theta: float) -> "MeasurementSetting":
        return cls((float(theta),) * n)

    @property
    def is_all_z(self) -> bool:
        return all(b == Z for b in self.bases)

    @property
    def common_theta(self) -> float | None:
        """The shared angle if every qubit is equatorial at the same angle."""
        if any(b == Z for b in self.bases):
            return None
        first = self.bases[0]
        return first if all(b == first for b in self.bases) else None

    def label(self) -> str:
        return ";".join(b if b == Z else repr(b) for b in self.bases)

    @classmethod
    def parse(cls, text: str) -> "MeasurementSetting":
        return cls(tuple(b if b.strip().upper() == Z else float(b) for b in text.split(";")))


@dataclass(frozen=True)
class CountRecord:
    """Counts over all 2^n outcomes of one setting (index = bitstring value).

    ``exact`` marks records that carry probabilities instead of sampled
    counts; estimators then report zero statistical error.
    """

    setting: MeasurementSetting
    counts: np.ndarray
    rate_hz: float = 0.0
    duration_s: float = 0.0
    seed: int | None = None
    exact: bool = False
    setting_id: str = ""

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (2 ** self.setting.n,):
            raise ValueError(f"expected {2 ** self.setting.n} bins, got {c.shape}")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return self.setting.n

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def as_dict(self) -> dict[str, int]:
        n = self.n
        return {format(i, f"0{n}b"): c.item() for i, c in enumerate(self.counts) if c}


def bitstrings(n: int) -> list[str]:
    return [format(i, f"0{n}b") for i in range(2 ** n)]


# ---------------------------------------------------------------------------
# post-selection

def _loss_patterns(cfg, units_of_path: dict[int, int], n_units: int, eta: float):
    """Yield (kept modes, lost config, kraus amplitude) for every way of losing
    photons such that exactly one photon survives in each detector unit."""
    per_mode = []
    for mode, count in cfg:
        unit = units_of_path.get(mode.path)
        if unit is None:
            per_mode.append([(mode, unit, count, 0)])
        else:
            per_mode.append([(mode, unit, count, k) for k in (0, 1) if k <= count])
    for choice in itertools.product(*per_mode):
        kept_units = [u for (_, u, _, k) in choice if k]
        if len(kept_units) != n_units or len(set(kept_units)) != n_units:
            continue
        amp = 1.0
        for _, _, c, k in choice:
            amp *= math.sqrt(math.comb(c, k) * eta ** k * (1 - eta) ** (c - k))
        if amp == 0:
            continue
        kept = tuple(m for (m, _, _, k) in choice if k)
        lost = tuple((m, c - k) for (m, _, c, k) in choice if c - k)
        yield kept, lost, amp


def _qubit_index(kept, plan: CircuitPlan, units_of_path) -> tuple[int, tuple]:
    by_unit = {units_of_path[m.path]: m for m in kept}
    idx = 0
    for kind, unit in plan.qubit_map:
        m = by_unit[unit]
        if kind == "pol":
            bit = 0 if m.pol == H else 1
        else:
            bit = plan.detectors[unit].index(m.path)
        idx = (idx << 1) | bit
    tags = tuple(by_unit[u].tag for u in range(len(plan.detectors)))
    return idx, tags


def _dephase(rho: np.ndarray, qubit: int, n: int, factor: float) -> np.ndarray:
    if factor == 1:
        return rho
    bits = (np.arange(2 ** n) >> (n - 1 - qubit)) & 1
    mask = bits[:, None] != bits[None, :]
    return np.where(mask, rho * factor, rho)


def apply_local(rho: np.ndarray, qubit: int, u: np.ndarray, n: int) -> np.ndarray:
    """Apply a single-qubit unitary to ``qubit`` of an n-qubit density matrix."""
    full = np.kron(np.kron(np.eye(2 ** qubit), u), np.eye(2 ** (n - qubit - 1)))
    return full @ rho @ full.conj().T


def postselect(states: OpticalState | Sequence[Branch], plan: CircuitPlan) -> QubitEnsemble:
    """Project onto one photon per detector unit and map to logical qubits.

    Detection has efficiency ``plan.noise.eta`` (a pure-loss channel in front
    of number-resolving detectors). Events differing in lost photons or in
    internal slots of detected photons are orthogonal and add incoherently.
    """
    if isinstance(states, OpticalState):
        states = [Branch(1.0, states)]
    n = plan.n_qubits
    dim = 2 ** n
    units_of_path = {p: u for u, unit in enumerate(plan.detectors) for p in unit}
    n_units = len(plan.detectors)
    eta = plan.noise.eta
    rho = np.zeros((dim, dim), dtype=complex)
    dropped = 0.0
    for br in states:
        if br.weight == 0:
            continue
        dropped += br.weight * br.state.dropped
        vecs: dict = defaultdict(lambda: np.zeros(dim, dtype=complex))
        for cfg, amp in br.state.terms.items():
            if fock.photon_number(cfg) < n_units:
                continue
            for kept, lost, k_amp in _loss_patterns(cfg, units_of_path, n_units, eta):
                idx, tags = _qubit_index(kept, plan, units_of_path)
                vecs[(lost, tags)][idx] += amp * k_amp
        for v in vecs.values():
            rho += br.weight * np.outer(v, v.conj())
    success = float(np.real(np.trace(rho)))
    if success <= 1e-300:
        return QubitEnsemble(None, n, 0.0, dropped)
    rho /= success
    spatial = plan.spatial_qubits
    vis = np.atleast_1d(plan.noise.analyzer_visibility)
    for j, q in enumerate(spatial):
        factor = float(vis[j] if vis.size > 1 else vis[0])
        rho = _dephase(rho, q, n, factor)
    for q, u in sorted(plan.local_unitaries.items()):
        rho = apply_local(rho, q, np.asarray(u, dtype=complex), n)
    rho = (rho + rho.conj().T) / 2
    return QubitEnsemble(rho, n, success, dropped)


def simulate(plan: CircuitPlan) -> QubitEnsemble:
    """Evolve all noise branches of ``plan`` and post-select."""
    return postselect(evolve(plan), plan)


# ---------------------------------------------------------------------------
# measurement

def basis_unitary(basis) -> np.ndarray:
    """Rows are the bras of outcome 0 and outcome 1."""
    if basis == Z:
        return np.eye(2, dtype=complex)
    ph = np.exp(-1j * basis)
    return np.array([[1, ph], [1, -ph]], dtype=complex) / math.sqrt(2)


def _apply_left(rho: np.ndarray, mats: Sequence[np.ndarray], n: int) -> np.ndarray:
    t = rho.reshape((2,) * n + (2 ** n,))
    for q, u in enumerate(mats):
        if u is None:
            continue
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
    return t.reshape(2 ** n, 2 ** n)


def outcome_distribution(ensemble: QubitEnsemble, setting: MeasurementSetting) -> np.ndarray:
    rho = ensemble.require()
    n = ensemble.n
    if setting.n != n:
        raise ValueError(f"setting has {setting.n} qubits, ensemble {n}")
    if setting.is_all_z:
        probs = np.real(np.diag(rho)).copy()
    else:
        mats = [None if b == Z else basis_unitary(b) for b in setting.bases]
        left = _apply_left(rho, mats, n)
        # P(x) = sum_j (U rho)_{xj} conj(U_{xj})
        full = np.ones((1, 1), dtype=complex)
        for u in mats:
            full = np.kron(full, np.eye(2) if u is None else u)
        probs = np.real(np.einsum("ij,ij->i", left, full.conj()))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_counts(dist: np.ndarray, rate_hz: float, duration_s: float, seed: int,
                  setting: MeasurementSetting | None = None, setting_id: str = "") -> CountRecord:
    """Independent Poisson counts per bin with mean rate * duration * P(bin).

    Equivalent to a Poisson total split multinomially.
    """
    if rate_hz < 0 or duration_s < 0:
        raise ValueError("rate and duration must be non-negative")
    dist = np.asarray(dist, dtype=float)
    if abs(dist.sum() - 1) > 1e-9:
        raise ValueError("distribution must sum to 1")
    n = int(round(math.log2(dist.size)))
    setting = setting or MeasurementSetting.all_z(n)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate_hz * duration_s * dist)
    return CountRecord(setting, counts.astype(np.int64), rate_hz, duration_s, seed,
                       setting_id=setting_id)


def exact_record(dist: np.ndarray, setting: MeasurementSetting, setting_id: str = "") -> CountRecord:
    """Record carrying exact probabilities (infinite statistics)."""
    return CountRecord(setting, np.asarray(dist, dtype=float), exact=True, setting_id=setting_id)


# ---------------------------------------------------------------------------
# single-photon interferometer test

def _run_analyzer(pol_plate: fock.ElementUnitary | None, theta: float,
                  visibility: float) -> tuple[float, float]:
    """Joint probabilities (spatial +, spatial -) with the polarization
    projected by ``pol_plate`` followed by a PBS (H transmitted)."""
    branches = [(1 - (1 - visibility) / 2, 0.0), ((1 - visibility) / 2, math.pi)]
    out = np.zeros(2)
    for w, extra in branches:
        if w == 0:
            continue
        s = fock.single_photon(0, (1 / math.sqrt(2), 1 / math.sqrt(2)))
        s = fock.apply_element(s, fock.PBS(0, None, 1, 2))   # H -> path 1 (H'), V -> path 2 (V')
        # port 3 projects the spatial qubit on (|H'> + e^{i theta}|V'>)/sqrt(2)
        s = fock.apply_element(s, fock.PHASE(2, -theta - math.pi / 2 + extra))
        s = fock.apply_element(s, fock.NBS(1, 2, 3, 4))
        for port in (3, 4):
            if pol_plate is not None:
                s = fock.apply_element(s, fock.ElementUnitary(pol_plate.kind, (port,), (),
                                                              pol_plate.params))
        for k, port in enumerate((3, 4)):
            out[k] += w * abs(s.amplitude({fock.Mode(port, H): 1})) ** 2
    return out[0], out[1]


def analyzer_scenario_single_photon(theta_grid: Iterable[float],
                                    visibility: float = 1.0) -> dict[str, np.ndarray]:
    """Detection curves of the hyper-encoding interferometer test.

    A photon in |+> is split by a PBS into (|H>|H'> + |V>|V'>)/sqrt(2). The
    polarization is projected on |+> (HWP at 22.5 deg) or |R> (QWP at 45 deg)
    and the spatial qubit on (|H'> +/- e^{i theta}|V'>)/sqrt(2) through a
    phase shifter and NBS. Returned curves are conditional on the
    polarization outcome: ideally (1 +/- cos theta)/2 and (1 -/+ sin theta)/2.
    """
    grid = np.asarray(list(theta_grid), dtype=float)
    plates = {"plus": fock.HWP(3, math.pi / 8), "R": fock.QWP(3, math.pi / 4)}
    curves = {"theta": grid}
    for name, plate in plates.items():
        plus, minus = np.zeros(grid.size), np.zeros(grid.size)
        for i, th in enumerate(grid):
            a, b = _run_analyzer(plate, th, visibility)
            plus[i], minus[i] = a / (a + b), b / (a + b)
        curves[f"{name}_plus"] = plus
        curves[f"{name}_minus"] = minus
    return curves


# ---------------------------------------------------------------------------
# CSV

CSV_COLUMNS = ("setting_id", "qubit_bases", "outcome_bitstring", "count")


def write_records_csv(path: str | Path, records: Sequence[CountRecord]) -> None:
    """Columns: setting_id, qubit_bases (``Z`` or radians, ``;``-joined),
    outcome_bitstring, count. Every bin is written, zeros included."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            label = rec.setting.label()
            for bits, c in zip(bitstrings(rec.n), rec.counts):
                w.writerow([rec.setting_id, label, bits, repr(c.item())])


class SchemaError(ValueError):
    pass


def read_records_csv(path: str | Path) -> list[CountRecord]:
    groups: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise SchemaError(f"{path}: expected header {','.join(CSV_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 columns")
            sid, bases, bits, count = row
            g = groups.setdefault(sid, {"bases": bases, "bins": {}})
            if g["bases"] != bases:
                raise SchemaError(f"{path}:{lineno}: setting {sid!r} changes bases")
            try:
                val = float(count)
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: bad count {count!r}") from exc
            if val < 0:
                raise SchemaError(f"{path}:{lineno}: negative count")
            if set(bits) - {"0", "1"}:
                raise SchemaError(f"{path}:{lineno}: bad bitstring {bits!r}")
            g["bins"][bits] = val
    records = []
    for sid, g in groups.items():
        try:
            setting = MeasurementSetting.parse(g["bases"])
        except ValueError as exc:
            raise SchemaError(f"{path}: setting {sid!r}: {exc}") from exc
        counts = np.zeros(2 ** setting.n)
        for bits, val in g["bins"].items():
            if len(bits) != setting.n:
                raise SchemaError(f"{path}: bitstring {bits} length != {setting.n}")
            counts[int(bits, 2)] = val
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        records.append(CountRecord(setting, counts, setting_id=sid))
    return records
