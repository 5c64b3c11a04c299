"""Sparse truncated Fock-space states and passive linear-optical elements.

States are stored as a map from occupation configurations to complex
amplitudes. Mode count after hyper-encoding is ~20 while photon number stays
at or below ~6, so a dense tensor is out of the question but the sparse
support stays in the hundreds.

Conventions
-----------
* A mode is ``(path, pol, tag)``. ``tag`` is an internal label (temporal /
  spectral slot) that detectors do not resolve; it is how partial
  distinguishability is modelled. Elements act on ``(path, pol)`` and leave
  the tag untouched.
* Non-polarizing beam splitter: symmetric convention, ``i`` on reflection::

      a_in1^+ -> (a_out1^+ + i a_out2^+) / sqrt(2)
      a_in2^+ -> (i a_out1^+ + a_out2^+) / sqrt(2)

* Polarizing beam splitter: transmits H, reflects V, no reflection phase.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

H = "H"
V = "V"
POLS = (H, V)

GLOBAL_CAP = 6
PRUNE_THRESHOLD = 1e-24


class FockError(ValueError):
    """Invalid operation on an optical state."""


@dataclass(frozen=True, order=True)
class Mode:
    path: int
    pol: str
    tag: int = 0

    def __post_init__(self):
        if self.pol not in POLS:
            raise FockError(f"polarization must be H or V, got {self.pol!r}")

    @property
    def key(self) -> tuple[int, str]:
        return (self.path, self.pol)


Config = tuple  # canonical: sorted tuple of (Mode, count) with count > 0


def make_config(occupations: Mapping[Mode, int] | Iterable[tuple[Mode, int]]) -> Config:
    """Canonical form of an occupation map (zero entries removed, sorted)."""
    items = occupations.items() if isinstance(occupations, Mapping) else occupations
    merged: Counter = Counter()
    for mode, count in items:
        if count < 0:
            raise FockError("negative occupation")
        merged[mode] += count
    return tuple(sorted((m, c) for m, c in merged.items() if c > 0))


def photon_number(config: Config) -> int:
    return sum(c for _, c in config)


def path_modes(paths: Iterable[int]) -> tuple[Mode, ...]:
    return tuple(Mode(p, pol) for p in paths for pol in POLS)


@dataclass(frozen=True)
class OpticalState:
    """Superposition of Fock configurations.

    ``registry`` lists the (path, pol) modes the state lives on (tag 0 form).
    ``dropped`` accumulates probability mass removed by truncation and
    pruning over the state's history.
    """

    terms: Mapping[Config, complex]
    n_max: int = GLOBAL_CAP
    registry: tuple[Mode, ...] = ()
    dropped: float = 0.0

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    @property
    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    @property
    def paths(self) -> frozenset[int]:
        return frozenset(m.path for m in self.registry)

    def amplitude(self, occupations) -> complex:
        return self.terms.get(make_config(occupations), 0j)

    def max_photons(self) -> int:
        return max((photon_number(c) for c in self.terms), default=0)

    def is_close(self, other: "OpticalState", atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= atol for k in keys)

    def scaled(self, factor: complex) -> "OpticalState":
        return OpticalState({k: a * factor for k, a in self.terms.items()},
                            self.n_max, self.registry, self.dropped)


def vacuum(registry: Sequence[Mode] = (), n_max: int = GLOBAL_CAP) -> OpticalState:
    return OpticalState({(): 1.0 + 0j}, n_max, tuple(registry))


def from_polynomial(poly: Mapping[tuple[Mode, ...], complex], registry: Sequence[Mode],
                    n_max: int = GLOBAL_CAP) -> OpticalState:
    """State ``sum_k c_k prod(a^+_m for m in monomial_k) |vac>``.

    Monomials are tuples of modes (repeats allowed); bosonic normalization
    ``prod sqrt(n!)`` is applied, so the result depends only on occupations.
    """
    terms: dict[Config, complex] = defaultdict(complex)
    for monomial, coeff in poly.items():
        cfg = make_config(Counter(monomial))
        terms[cfg] += coeff * math.sqrt(math.prod(math.factorial(c) for _, c in cfg))
    state = OpticalState(dict(terms), n_max, tuple(registry))
    return prune(state)


def single_photon(path: int, pol_state: Sequence[complex] = (1.0, 0.0),
                  n_max: int = GLOBAL_CAP) -> OpticalState:
    """One photon on ``path`` in polarization ``cH|H> + cV|V>``."""
    c_h, c_v = pol_state
    poly = {(Mode(path, H),): complex(c_h), (Mode(path, V),): complex(c_v)}
    return from_polynomial(poly, path_modes([path]), n_max)


def prune(state: OpticalState, threshold: float = PRUNE_THRESHOLD) -> OpticalState:
    kept = {}
    lost = 0.0
    for cfg, amp in state.terms.items():
        w = abs(amp) ** 2
        if w < threshold:
            lost += w
        else:
            kept[cfg] = amp
    return OpticalState(kept, state.n_max, state.registry, state.dropped + lost)


def truncate(state: OpticalState, n_max: int) -> tuple[OpticalState, float]:
    """Remove configurations above ``n_max`` photons (no renormalization)."""
    if n_max < 0:
        raise FockError("n_max must be non-negative")
    kept = {}
    lost = 0.0
    for cfg, amp in state.terms.items():
        if photon_number(cfg) > n_max:
            lost += abs(amp) ** 2
        else:
            kept[cfg] = amp
    return OpticalState(kept, n_max, state.registry, state.dropped + lost), lost


def tensor(a: OpticalState, b: OpticalState, cap: int = GLOBAL_CAP) -> OpticalState:
    overlap = {m.key for m in a.registry} & {m.key for m in b.registry}
    if overlap:
        raise FockError(f"mode registries overlap: {sorted(overlap)}")
    n_max = min(a.n_max + b.n_max, cap)
    terms: dict[Config, complex] = {}
    lost = 0.0
    for ca, xa in a.terms.items():
        na = photon_number(ca)
        for cb, xb in b.terms.items():
            amp = xa * xb
            if na + photon_number(cb) > n_max:
                lost += abs(amp) ** 2
                continue
            terms[tuple(sorted(ca + cb))] = amp
    out = OpticalState(terms, n_max, a.registry + b.registry, a.dropped + b.dropped + lost)
    return prune(out)


# ---------------------------------------------------------------------------
# elements

def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def waveplate_matrix(retardance: float, angle: float) -> np.ndarray:
    """Jones matrix (basis H, V) of a retarder with fast axis at ``angle``."""
    core = np.diag([1.0, np.exp(1j * retardance)])
    return _rot(-angle) @ core @ _rot(angle)


def hwp_matrix(angle: float) -> np.ndarray:
    # reflection form: HWP(22.5 deg) maps H -> (H + V)/sqrt(2)
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_matrix(angle: float) -> np.ndarray:
    return waveplate_matrix(math.pi / 2, angle)


NBS_MATRIX = np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2)

KINDS = ("PBS", "NBS", "HWP", "QWP", "PHASE")


@dataclass(frozen=True)
class ElementUnitary:
    """Passive element mapping the modes of ``in_paths`` onto ``out_paths``.

    ``params`` holds angles/phases in radians: HWP/QWP ``(angle,)``, PHASE
    ``(phi,)`` applied to both polarizations of the path, NBS/PBS none.
    A PBS with a single input path splits it: H to ``out_paths[0]``, V to
    ``out_paths[1]``. When ``out_paths`` is omitted the element acts in place.
    """

    kind: str
    in_paths: tuple[int, ...]
    out_paths: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FockError(f"unknown element kind {self.kind!r}")
        object.__setattr__(self, "in_paths", tuple(int(p) for p in self.in_paths))
        out = tuple(int(p) for p in self.out_paths) or self.in_paths
        object.__setattr__(self, "out_paths", out)
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        object.__setattr__(self, "matrix", self._build())

    def _build(self) -> np.ndarray:
        k, nin, nout = self.kind, len(self.in_paths), len(self.out_paths)
        if k in ("HWP", "QWP", "PHASE"):
            if nin != 1 or nout != 1:
                raise FockError(f"{k} acts on exactly one path")
            (x,) = self.params or (0.0,)
            if k == "HWP":
                return hwp_matrix(x)
            if k == "QWP":
                return qwp_matrix(x)
            return np.exp(1j * x) * np.eye(2, dtype=complex)
        if k == "NBS":
            if nin != 2 or nout != 2:
                raise FockError("NBS needs two input and two output paths")
            return np.kron(NBS_MATRIX, np.eye(2))
        # PBS; columns are input modes, rows output modes, order (path, H/V)
        if nin == 1 and nout == 2:
            u = np.zeros((4, 2), dtype=complex)
            u[0, 0] = 1  # H -> out0
            u[3, 1] = 1  # V -> out1
            return u
        if nin == 2 and nout == 2:
            u = np.zeros((4, 4), dtype=complex)
            u[0, 0] = 1  # a_H -> c_H
            u[3, 1] = 1  # a_V -> d_V
            u[2, 2] = 1  # b_H -> d_H
            u[1, 3] = 1  # b_V -> c_V
            return u
        raise FockError("PBS takes (1 -> 2) or (2 -> 2) paths")

    @property
    def in_modes(self) -> tuple[Mode, ...]:
        return path_modes(self.in_paths)

    @property
    def out_modes(self) -> tuple[Mode, ...]:
        return path_modes(self.out_paths)

    acted_modes = in_modes

    def to_dict(self) -> dict:
        return {"kind": self.kind, "in_paths": list(self.in_paths),
                "out_paths": list(self.out_paths), "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ElementUnitary":
        return cls(d["kind"], tuple(d["in_paths"]), tuple(d.get("out_paths", ())),
                   tuple(d.get("params", ())))


def PBS(a: int, b: int | None, c: int, d: int) -> ElementUnitary:
    ins = (a,) if b is None else (a, b)
    return ElementUnitary("PBS", ins, (c, d))


def NBS(a: int, b: int, c: int | None = None, d: int | None = None) -> ElementUnitary:
    outs = (a, b) if c is None else (c, d)
    return ElementUnitary("NBS", (a, b), outs)


def HWP(path: int, angle: float) -> ElementUnitary:
    return ElementUnitary("HWP", (path,), (), (angle,))


def QWP(path: int, angle: float) -> ElementUnitary:
    return ElementUnitary("QWP", (path,), (), (angle,))


def PHASE(path: int, phi: float) -> ElementUnitary:
    return ElementUnitary("PHASE", (path,), (), (phi,))


def apply_element(state: OpticalState, element: ElementUnitary) -> OpticalState:
    """Rewrite creation operators of the element's input modes.

    Output paths that are not also inputs must be absent from the state's
    registry, which keeps the overall map an isometry.
    """
    paths = state.paths
    missing = [p for p in element.in_paths if p not in paths]
    if missing:
        raise FockError(f"element acts on unknown paths {missing}")
    fresh = [p for p in element.out_paths if p not in element.in_paths]
    clash = [p for p in fresh if p in paths]
    if clash:
        raise FockError(f"output paths {clash} already in use")

    in_keys = [m.key for m in element.in_modes]
    out_keys = [m.key for m in element.out_modes]
    col = {k: i for i, k in enumerate(in_keys)}
    u = element.matrix
    # per input mode: list of (output key, coefficient)
    images = {k: [(out_keys[r], u[r, j]) for r in range(len(out_keys)) if u[r, j] != 0]
              for k, j in col.items()}

    terms: dict[Config, complex] = defaultdict(complex)
    for cfg, amp in state.terms.items():
        kept = []
        movers = []
        norm = 1.0
        for mode, count in cfg:
            if mode.key in col:
                movers.extend([mode] * count)
                norm *= math.factorial(count)
            else:
                kept.append((mode, count))
        if not movers:
            terms[cfg] += amp
            continue
        partial: dict[tuple[Mode, ...], complex] = {(): amp / math.sqrt(norm)}
        for mode in movers:
            nxt: dict[tuple[Mode, ...], complex] = defaultdict(complex)
            for mono, coeff in partial.items():
                for (path, pol), c in images[mode.key]:
                    nxt[tuple(sorted(mono + (Mode(path, pol, mode.tag),)))] += coeff * c
            partial = nxt
        for mono, coeff in partial.items():
            occ = Counter(mono)
            bose = math.sqrt(math.prod(math.factorial(c) for c in occ.values()))
            terms[tuple(sorted(kept + list(occ.items())))] += coeff * bose

    removed = set(in_keys) - set(out_keys)
    registry = tuple(m for m in state.registry if m.key not in removed)
    registry += tuple(m for m in element.out_modes if m not in registry)
    return prune(OpticalState(dict(terms), state.n_max, registry, state.dropped))


def apply_elements(state: OpticalState, elements: Iterable[ElementUnitary]) -> OpticalState:
    for el in elements:
        state = apply_element(state, el)
    return state


def delay(state: OpticalState, path: int, shift: int) -> OpticalState:
    """Move every photon on ``path`` into internal slot ``tag + shift``."""
    if path not in state.paths:
        raise FockError(f"unknown path {path}")
    terms = {}
    for cfg, amp in state.terms.items():
        moved = [(Mode(m.path, m.pol, m.tag + shift) if m.path == path else m, c) for m, c in cfg]
        terms[make_config(moved)] = amp
    return OpticalState(terms, state.n_max, state.registry, state.dropped)


def add(a: OpticalState, b: OpticalState) -> OpticalState:
    """Amplitude-wise sum (registries merged)."""
    terms: dict[Config, complex] = defaultdict(complex, a.terms)
    for k, x in b.terms.items():
        terms[k] += x
    reg = a.registry + tuple(m for m in b.registry if m not in a.registry)
    return prune(OpticalState(dict(terms), max(a.n_max, b.n_max), reg, a.dropped + b.dropped))
