"""Photon sources, PBS fusion, hyper-encoding and the named cat/graph setups.

Path layout used by the cat setups (photon labels follow the experiment)::

    weak coherent      -> path 1
    SPDC pair A        -> paths 2, 3
    SPDC pair B        -> paths 4, 5
    PBS1 (3, 4)        -> (6, 7)          6 = 3', 7 = 4'
    PBS2 (1, 7)        -> (8, 9)          8 = 1', 9 = 4''
    cat6  (WC + B + PBS2 on (1, 4))       detectors 8, 9, 5
    cat8  (A + B + PBS1)                  detectors 2, 6, 7, 5
    cat10 (WC + A + B + PBS1 + PBS2)      detectors 8, 2, 6, 9, 5

Every detector path ``p`` is then split by a PBS into ``(h, v)`` spatial
paths (hyper-encoding). Logical qubits are the photons' polarizations
followed by their spatial bits, so the ideal output is
``(|0...0> + |1...1>)/sqrt(2)`` with polarization qubits first.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import fock
from .fock import H, V, ElementUnitary, Mode, OpticalState

SPDC_PAIR = "SPDC_PAIR"
WEAK_COHERENT = "WEAK_COHERENT"
INJECTED = "INJECTED"

PLUS = (1 / math.sqrt(2), 1 / math.sqrt(2))

VARIANTS = ("cat6", "cat8", "cat10")
N_PHOTONS = {"cat6": 3, "cat8": 4, "cat10": 5}


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class SourceSpec:
    """A photon source and the paths it feeds.

    ``order`` is the perturbative order kept: 1 drops the SPDC double pair and
    the two-photon weak-coherent term. ``flip``/``dephase`` are the
    probabilities of a bit flip / phase flip acting on the second photon of an
    SPDC pair (residual source imperfection, see :func:`pair_noise_weights`).
    """

    kind: str
    paths: tuple[int, ...]
    tau: float = 0.0
    p: float = 0.0
    pol_state: tuple[complex, complex] = PLUS
    order: int = 2
    flip: float = 0.0
    dephase: float = 0.0
    phase: float = 0.0
    amplitudes: tuple[complex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(int(p) for p in self.paths))
        if self.kind == SPDC_PAIR:
            if len(self.paths) != 2:
                raise CircuitError("SPDC pair needs two paths")
            if not 0 <= self.tau < 0.5:
                raise CircuitError(f"tau={self.tau} outside perturbative range [0, 0.5)")
            if self.flip < 0 or self.dephase < 0 or self.flip + self.dephase > 1:
                raise CircuitError("invalid pair noise weights")
        elif self.kind == WEAK_COHERENT:
            if len(self.paths) != 1:
                raise CircuitError("weak coherent source feeds one path")
            if not 0 <= self.p < 0.5:
                raise CircuitError(f"p={self.p} outside [0, 0.5)")
            if abs(np.linalg.norm(self.pol_state) - 1) > 1e-12:
                raise CircuitError("pol_state must be normalized")
        elif self.kind == INJECTED:
            amps = np.asarray(self.amplitudes, dtype=complex)
            if amps.size != 2 ** len(self.paths):
                raise CircuitError("injected state dimension does not match photon count")
            if abs(np.linalg.norm(amps) - 1) > 1e-12:
                raise CircuitError("injected state must be normalized")
        else:
            raise CircuitError(f"unknown source kind {self.kind!r}")
        if self.order not in (1, 2):
            raise CircuitError("order must be 1 or 2")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "paths": list(self.paths), "order": self.order}
        if self.kind == SPDC_PAIR:
            d.update(tau=self.tau, flip=self.flip, dephase=self.dephase)
        elif self.kind == WEAK_COHERENT:
            d.update(p=self.p, pol_state=_cplx_out(self.pol_state), phase=self.phase)
        else:
            d.update(amplitudes=_cplx_out(self.amplitudes))
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SourceSpec":
        kw = dict(d)
        kw["paths"] = tuple(kw["paths"])
        for key in ("pol_state", "amplitudes"):
            if key in kw:
                kw[key] = tuple(_cplx_in(kw[key]))
        return cls(**kw)


def _cplx_out(values) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def _cplx_in(values) -> list[complex]:
    return [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in values]


# ---------------------------------------------------------------------------
# sources

def spdc_pair_state(spec: SourceSpec, paths: tuple[int, int] | None = None,
                    cap: int = fock.GLOBAL_CAP) -> OpticalState:
    """Two-mode squeezed vacuum to second order, normalized.

    |vac> + tau A|vac> + (tau^2/2) A^2|vac>, A = (a_H b_H + a_V b_V)/sqrt(2).
    """
    if spec.kind != SPDC_PAIR:
        raise CircuitError(f"expected {SPDC_PAIR}, got {spec.kind}")
    a, b = paths or spec.paths
    pair = {(Mode(a, H), Mode(b, H)): 1 / math.sqrt(2),
            (Mode(a, V), Mode(b, V)): 1 / math.sqrt(2)}
    poly: dict = {(): 1.0}
    term = {(): 1.0}
    for k in range(1, spec.order + 1):
        nxt: dict = {}
        for m1, c1 in term.items():
            for m2, c2 in pair.items():
                key = tuple(sorted(m1 + m2))
                nxt[key] = nxt.get(key, 0) + c1 * c2
        term = nxt
        coeff = spec.tau ** k / math.factorial(k)
        for mono, c in term.items():
            poly[mono] = poly.get(mono, 0) + coeff * c
    state = fock.from_polynomial(poly, fock.path_modes((a, b)), n_max=min(2 * spec.order, cap))
    return state.scaled(1 / state.norm)


def weak_coherent_state(spec: SourceSpec, path: int | None = None,
                        cap: int = fock.GLOBAL_CAP) -> OpticalState:
    """Coherent state with mean photon number p in mode ``pol_state``, kept to
    ``order`` photons: e^{-p/2}(|0> + sqrt(p)|1> + p/sqrt(2)|2>)."""
    if spec.kind != WEAK_COHERENT:
        raise CircuitError(f"expected {WEAK_COHERENT}, got {spec.kind}")
    (p_,) = (path,) if path is not None else spec.paths
    c_h, c_v = spec.pol_state
    alpha = math.sqrt(spec.p) * np.exp(1j * spec.phase)
    poly: dict = {(): math.exp(-spec.p / 2)}
    photon = {(Mode(p_, H),): c_h, (Mode(p_, V),): c_v}
    term = {(): 1.0}
    for k in range(1, spec.order + 1):
        nxt: dict = {}
        for m1, c1 in term.items():
            for m2, c2 in photon.items():
                key = tuple(sorted(m1 + m2))
                nxt[key] = nxt.get(key, 0) + c1 * c2
        term = nxt
        # alpha^k / sqrt(k!) |k> = alpha^k / k! (a^+)^k |0>
        coeff = math.exp(-spec.p / 2) * alpha ** k / math.factorial(k)
        for mono, c in term.items():
            poly[mono] = poly.get(mono, 0) + coeff * c
    return fock.from_polynomial(poly, fock.path_modes([p_]), n_max=min(spec.order, cap))


def injected_state(spec: SourceSpec, cap: int = fock.GLOBAL_CAP) -> OpticalState:
    """One photon per path carrying a given polarization-qubit state (|0> = H)."""
    n = len(spec.paths)
    poly = {}
    for idx, amp in enumerate(spec.amplitudes):
        if amp == 0:
            continue
        bits = format(idx, f"0{n}b")
        mono = tuple(sorted(Mode(p, H if b == "0" else V) for p, b in zip(spec.paths, bits)))
        poly[mono] = complex(amp)
    return fock.from_polynomial(poly, fock.path_modes(spec.paths), n_max=max(cap, n))


def source_state(spec: SourceSpec, cap: int = fock.GLOBAL_CAP) -> OpticalState:
    if spec.kind == SPDC_PAIR:
        return spdc_pair_state(spec, cap=cap)
    if spec.kind == WEAK_COHERENT:
        return weak_coherent_state(spec, cap=cap)
    return injected_state(spec, cap=cap)


# ---------------------------------------------------------------------------
# fusion and hyper-encoding

def fuse_on_pbs(state: OpticalState, in_paths: tuple[int, int],
                out_paths: tuple[int, int]) -> OpticalState:
    """Overlap two paths on a PBS: H a->c, b->d; V a->d, b->c."""
    a, b = in_paths
    c, d = out_paths
    return fock.apply_element(state, fock.PBS(a, b, c, d))


def hyper_encode(state: OpticalState, path: int, out_paths: tuple[int, int]) -> OpticalState:
    """Split ``path`` by polarization: H to ``out_paths[0]``, V to ``out_paths[1]``.

    a|H> + b|V> becomes a|H>|h> + b|V>|v>; deterministic.
    """
    h, v = out_paths
    if path in out_paths:
        raise CircuitError("hyper-encoding outputs must be fresh paths")
    return fock.apply_element(state, fock.PBS(path, None, h, v))


# ---------------------------------------------------------------------------
# noise

@dataclass(frozen=True)
class NoiseSpec:
    """Noise knobs for the cat setups.

    ``xi`` (distinguishability at each fusion PBS) and ``analyzer_visibility``
    (one per spatial qubit) accept a scalar that is broadcast.
    """

    tau: float = 0.1
    p: float = 0.03
    multiphoton: bool = False
    pair_visibility_hv: float = 1.0
    pair_visibility_diag: float = 1.0
    xi: float | tuple[float, ...] = 0.0
    eta: float = 1.0
    analyzer_visibility: float | tuple[float, ...] = 1.0
    wc_phase: float = 0.0
    cap: int = fock.GLOBAL_CAP

    def __post_init__(self):
        for name in ("pair_visibility_hv", "pair_visibility_diag", "eta"):
            x = getattr(self, name)
            if not 0 <= x <= 1:
                raise CircuitError(f"{name}={x} outside [0, 1]")
        for x in np.atleast_1d(self.xi):
            if not 0 <= x <= 1:
                raise CircuitError(f"xi={x} outside [0, 1]")
        for x in np.atleast_1d(self.analyzer_visibility):
            if not 0 <= x <= 1:
                raise CircuitError(f"analyzer visibility {x} outside [0, 1]")
        if not 0 <= self.tau < 0.5 or not 0 <= self.p < 0.5:
            raise CircuitError("tau and p must lie in [0, 0.5)")
        if self.eta == 0:
            raise CircuitError("eta must be positive")

    @property
    def order(self) -> int:
        return 2 if self.multiphoton else 1

    def xi_for(self, n_fusions: int) -> tuple[float, ...]:
        return _broadcast(self.xi, n_fusions, "xi")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for k in ("xi", "analyzer_visibility"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseSpec":
        kw = dict(d)
        for k in ("xi", "analyzer_visibility"):
            if isinstance(kw.get(k), list):
                kw[k] = tuple(float(x) for x in kw[k])
        return cls(**kw)


def _broadcast(value, n: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return tuple([float(arr[0])] * n)
    if arr.size != n:
        raise CircuitError(f"{name} has {arr.size} entries, expected {n}")
    return tuple(float(x) for x in arr)


def double_pair_visibility(tau: float, eta: float, order: int = 2) -> float:
    """Two-photon coincidence visibility of one SPDC source limited only by
    its double-pair term, under number-resolving detection with efficiency eta.

    With x = tau^2 (1 - eta)^2 this is (1 + 2x) / (1 + 3x); identical in the
    H/V and diagonal bases because the pair state is rotation invariant.
    """
    if order < 2:
        return 1.0
    x = tau ** 2 * (1 - eta) ** 2
    return (1 + 2 * x) / (1 + 3 * x)


def pair_noise_weights(tau: float, visibility_hv: float, visibility_diag: float,
                       eta: float, order: int = 2) -> tuple[float, float]:
    """Bit-flip and phase-flip probabilities that, on top of double-pair
    emission, bring the pair visibilities down to the requested values."""
    v_dp = double_pair_visibility(tau, eta, order)
    flip = (1 - visibility_hv / v_dp) / 2
    dephase = (1 - visibility_diag / v_dp) / 2
    if flip < -1e-12 or dephase < -1e-12:
        raise CircuitError(
            f"double-pair emission alone gives visibility {v_dp:.4f}, "
            "below the requested pair visibility")
    return max(flip, 0.0), max(dephase, 0.0)


# ---------------------------------------------------------------------------
# plans

@dataclass(frozen=True)
class CircuitPlan:
    """Sources, ordered elements and the detection/qubit layout.

    ``detectors`` lists detector units; each unit is a tuple of paths across
    which exactly one photon must be found. ``qubit_map`` entries are
    ``("pol", unit)`` or ``("path", unit)``; for a path qubit the bit is the
    index of the photon's path inside the (two-path) unit.
    ``fusions`` indexes the elements that are fusion PBSs (noise ``xi`` acts
    there). ``local_unitaries`` maps qubit index to a 2x2 matrix applied to the
    post-selected register.
    """

    sources: tuple[SourceSpec, ...]
    elements: tuple[ElementUnitary, ...]
    detectors: tuple[tuple[int, ...], ...]
    qubit_map: tuple[tuple[str, int], ...]
    fusions: tuple[int, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    name: str = "custom"
    local_unitaries: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(tuple(int(p) for p in u) for u in self.detectors))
        object.__setattr__(self, "qubit_map", tuple((str(k), int(u)) for k, u in self.qubit_map))
        units = range(len(self.detectors))
        for kind, unit in self.qubit_map:
            if unit not in units:
                raise CircuitError(f"qubit_map refers to unknown detector unit {unit}")
            if kind == "path" and len(self.detectors[unit]) != 2:
                raise CircuitError("a spatial qubit needs a two-path detector unit")
            if kind not in ("pol", "path"):
                raise CircuitError(f"unknown qubit kind {kind!r}")
        covered = {u for _, u in self.qubit_map}
        if covered != set(units):
            raise CircuitError("every detector unit must carry at least one qubit")
        for i in self.fusions:
            el = self.elements[i]
            if el.kind != "PBS" or len(el.in_paths) != 2:
                raise CircuitError(f"element {i} is not a two-input PBS")
        for q in self.local_unitaries:
            if not 0 <= q < self.n_qubits:
                raise CircuitError(f"local unitary on unknown qubit {q}")

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_map)

    @property
    def detector_paths(self) -> tuple[int, ...]:
        return tuple(p for unit in self.detectors for p in unit)

    @property
    def spatial_qubits(self) -> tuple[int, ...]:
        return tuple(i for i, (k, _) in enumerate(self.qubit_map) if k == "path")

    def with_noise(self, noise: NoiseSpec) -> "CircuitPlan":
        if self.name in VARIANTS:
            return build_cat_setup(self.name, noise)
        return replace(self, noise=noise)

    # JSON ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "sources": [s.to_dict() for s in self.sources],
            "elements": [e.to_dict() for e in self.elements],
            "fusions": list(self.fusions),
            "detectors": [list(u) for u in self.detectors],
            "qubit_map": [[k, u] for k, u in self.qubit_map],
            "noise": self.noise.to_dict(),
            "local_unitaries": {str(q): [_cplx_out(row) for row in np.asarray(m)]
                                for q, m in self.local_unitaries.items()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: Mapping) -> "CircuitPlan":
        lus = {int(q): np.array([_cplx_in(row) for row in m])
               for q, m in d.get("local_unitaries", {}).items()}
        return cls(
            sources=tuple(SourceSpec.from_dict(s) for s in d["sources"]),
            elements=tuple(ElementUnitary.from_dict(e) for e in d["elements"]),
            detectors=tuple(tuple(u) for u in d["detectors"]),
            qubit_map=tuple((k, u) for k, u in d["qubit_map"]),
            fusions=tuple(d.get("fusions", ())),
            noise=NoiseSpec.from_dict(d.get("noise", {})),
            name=d.get("name", "custom"),
            local_unitaries=lus,
        )

    @classmethod
    def from_json(cls, text: str) -> "CircuitPlan":
        return cls.from_dict(json.loads(text))


def _encode_layout(det_paths: Sequence[int], first_free: int):
    """Hyper-encoding elements, detector units and qubit map for photons on
    ``det_paths`` (polarization qubits first, spatial qubits after)."""
    elements = []
    units = []
    for i, p in enumerate(det_paths):
        h, v = first_free + 2 * i, first_free + 2 * i + 1
        elements.append(fock.PBS(p, None, h, v))
        units.append((h, v))
    n = len(det_paths)
    qmap = [("pol", i) for i in range(n)] + [("path", i) for i in range(n)]
    return elements, units, qmap


def build_cat_setup(variant: str, noise: NoiseSpec | None = None) -> CircuitPlan:
    """Plan for the hyper-entangled 6-, 8- or 10-qubit cat state."""
    noise = noise or NoiseSpec()
    if variant not in VARIANTS:
        raise CircuitError(f"unknown variant {variant!r}")
    flip, dephase = pair_noise_weights(noise.tau, noise.pair_visibility_hv,
                                       noise.pair_visibility_diag, noise.eta, noise.order)
    wc = SourceSpec(WEAK_COHERENT, (1,), p=noise.p, pol_state=PLUS, order=noise.order,
                    phase=noise.wc_phase)

    def pair(a, b):
        return SourceSpec(SPDC_PAIR, (a, b), tau=noise.tau, order=noise.order,
                          flip=flip, dephase=dephase)

    if variant == "cat10":
        sources = (wc, pair(2, 3), pair(4, 5))
        fusion = [fock.PBS(3, 4, 6, 7), fock.PBS(1, 7, 8, 9)]
        det = (8, 2, 6, 9, 5)
    elif variant == "cat8":
        sources = (pair(2, 3), pair(4, 5))
        fusion = [fock.PBS(3, 4, 6, 7)]
        det = (2, 6, 7, 5)
    else:
        sources = (wc, pair(4, 5))
        fusion = [fock.PBS(1, 4, 8, 9)]
        det = (8, 9, 5)
    enc, units, qmap = _encode_layout(det, 10)
    noise = replace(noise, xi=noise.xi_for(len(fusion)),
                    analyzer_visibility=_broadcast(noise.analyzer_visibility, len(det),
                                                   "analyzer_visibility"))
    return CircuitPlan(sources, tuple(fusion + enc), tuple(units), tuple(qmap),
                       fusions=tuple(range(len(fusion))), noise=noise, name=variant)


def build_graph_setup(initial: Sequence[complex], encode_set: Sequence[int] = (),
                      local_unitaries: Mapping[int, np.ndarray] | None = None,
                      noise: NoiseSpec | None = None) -> CircuitPlan:
    """Inject an m-photon polarization state and hyper-encode ``encode_set``.

    Qubits: polarization of photons 0..m-1, then the spatial qubits of the
    encoded photons in increasing photon order.
    """
    amps = np.asarray(initial, dtype=complex)
    m = int(round(math.log2(amps.size)))
    if 2 ** m != amps.size:
        raise CircuitError("initial state dimension must be a power of two")
    encode = sorted(set(int(k) for k in encode_set))
    if any(not 0 <= k < m for k in encode):
        raise CircuitError(f"encode_set {encode} outside photon range 0..{m - 1}")
    src = SourceSpec(INJECTED, tuple(range(m)), amplitudes=tuple(amps))
    elements = []
    units: list[tuple[int, ...]] = [(k,) for k in range(m)]
    for j, k in enumerate(encode):
        h, v = m + 2 * j, m + 2 * j + 1
        elements.append(fock.PBS(k, None, h, v))
        units[k] = (h, v)
    qmap = [("pol", k) for k in range(m)] + [("path", k) for k in encode]
    noise = noise or NoiseSpec()
    noise = replace(noise, analyzer_visibility=_broadcast(noise.analyzer_visibility,
                                                          max(len(encode), 1), "analyzer_visibility"))
    return CircuitPlan((src,), tuple(elements), tuple(units), tuple(qmap), noise=noise,
                       name="graph", local_unitaries=dict(local_unitaries or {}))


# ---------------------------------------------------------------------------
# evolution with incoherent noise branches

@dataclass(frozen=True)
class Branch:
    weight: float
    state: OpticalState
    label: str = ""


_PAULI = {"I": None, "X": ("HWP", math.pi / 4), "Z": ("HWP", 0.0)}


def evolve(plan: CircuitPlan) -> list[Branch]:
    """Propagate every incoherent noise branch of ``plan`` through its elements.

    Branches: per SPDC source a Pauli choice on its second photon (I, X with
    probability ``flip``, Z with ``dephase``); per fusion PBS, with
    probability ``xi`` the photons entering its second port are moved to a
    distinct internal slot so they no longer interfere.
    """
    cap = plan.noise.cap
    per_source = []
    for s in plan.sources:
        if s.kind == SPDC_PAIR:
            opts = [(1 - s.flip - s.dephase, "I"), (s.flip, "X"), (s.dephase, "Z")]
            per_source.append([(w, c) for w, c in opts if w > 0])
        else:
            per_source.append([(1.0, "I")])
    xis = plan.noise.xi_for(len(plan.fusions))
    per_fusion = [[(w, c) for w, c in ((1 - x, 0), (x, 1)) if w > 0] for x in xis]

    base_states = {}
    branches = []
    for src_choice in itertools.product(*per_source):
        key = tuple(c for _, c in src_choice)
        if key not in base_states:
            state = None
            for s, (_, c) in zip(plan.sources, src_choice):
                st = source_state(s, cap)
                if _PAULI[c] is not None:
                    kind, angle = _PAULI[c]
                    st = fock.apply_element(st, ElementUnitary(kind, (s.paths[1],), (), (angle,)))
                state = st if state is None else fock.tensor(state, st, cap)
            base_states[key] = state
        w_src = math.prod(w for w, _ in src_choice)
        for fus_choice in itertools.product(*per_fusion):
            w = w_src * math.prod(wf for wf, _ in fus_choice)
            delays = {plan.fusions[i]: c for i, (_, c) in enumerate(fus_choice)}
            state = base_states[key]
            for i, el in enumerate(plan.elements):
                if delays.get(i):
                    k = plan.fusions.index(i)
                    state = fock.delay(state, el.in_paths[1], 2 ** k)
                state = fock.apply_element(state, el)
            label = "".join(key) + "|" + "".join(str(c) for _, c in fus_choice)
            branches.append(Branch(w, state, label))
    return branches
