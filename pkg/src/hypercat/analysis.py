"""Estimators for cat-state certification from coincidence counts.

All statistical errors assume independent Poisson counts per outcome bin and
are propagated to first order. Records flagged ``exact`` carry probabilities
and give zero error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .detection import CountRecord, EmptyEnsembleError, MeasurementSetting

LAMBDA_MARGIN = 1e-6
THETA_TOL = 1e-9


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.sigma)) or self.sigma < 0:
            raise AnalysisError(f"invalid estimate {self.value} +/- {self.sigma}")

    def __str__(self):
        return f"{self.value:.4f} +/- {self.sigma:.4f}"


@dataclass(frozen=True)
class WitnessEstimate(Estimate):
    """Witness mean value; ``significance`` is the violation in units of sigma
    (positive when the witness is negative)."""

    significance: float = 0.0


@dataclass(frozen=True)
class FilterParams:
    lambdas: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        bad = [x for x in lam if not abs(x) <= 1 - LAMBDA_MARGIN]
        if bad:
            raise AnalysisError(f"filter parameters must satisfy |lambda| < 1, got {bad}")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def zeros(cls, n: int) -> "FilterParams":
        return cls((0.0,) * n)

    @property
    def is_identity(self) -> bool:
        return all(x == 0 for x in self.lambdas)


def parity_signs(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    ones = np.zeros(2 ** n, dtype=int)
    for q in range(n):
        ones += (idx >> q) & 1
    return 1 - 2 * (ones & 1)


def _require_counts(record: CountRecord) -> float:
    total = record.total
    if not total > 0:
        raise AnalysisError(f"setting {record.setting_id or record.setting.label()} has no counts")
    return total


def _linear_z(record: CountRecord, coeffs: np.ndarray) -> tuple[float, float, np.ndarray]:
    """g = sum_z c_z N_z / N with its Poisson error and dg/dN_z."""
    counts = record.counts.astype(float)
    total = _require_counts(record)
    g = float(coeffs @ counts / total)
    grad = (coeffs - g) / total
    sigma = 0.0 if record.exact else float(math.sqrt(np.sum(grad ** 2 * counts)))
    return g, sigma, grad


def expectation_M(record: CountRecord) -> Estimate:
    """<M_theta^{(x)n}> from the outcome parity of an all-equatorial record."""
    if record.setting.common_theta is None:
        raise AnalysisError("expectation_M needs the same equatorial angle on every qubit")
    value, sigma, _ = _linear_z(record, parity_signs(record.n).astype(float))
    return Estimate(value, sigma)


@dataclass(frozen=True)
class CatAnalysisInput:
    """All-Z record plus n equatorial records on the k*pi/n grid.

    Either k = 1..n or k = 0..n-1 is accepted (any k modulo 2n, really):
    a record at theta + pi carries <M_theta> with sign (-1)^n.
    """

    z_record: CountRecord
    theta_records: tuple[CountRecord, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "theta_records", tuple(self.theta_records))
        if not self.z_record.setting.is_all_z or self.z_record.n != self.n:
            raise AnalysisError("z_record must be an all-Z setting on n qubits")
        ks = [k for k, _ in self._grid()]
        missing = sorted(set(range(1, self.n + 1)) - set(ks))
        if missing:
            raise AnalysisError(f"missing equatorial settings for k = {missing}")
        if len(ks) != len(set(ks)):
            raise AnalysisError("duplicate equatorial settings")

    def _grid(self) -> list[tuple[int, int]]:
        """(k in 1..n, sign) per theta record."""
        out = []
        n = self.n
        for rec in self.theta_records:
            theta = rec.setting.common_theta
            if rec.n != n or theta is None:
                raise AnalysisError("theta records must be all-equatorial with a common angle")
            x = theta * n / math.pi
            k = int(round(x))
            if abs(x - k) * math.pi / n > THETA_TOL:
                raise AnalysisError(f"theta={theta} is not on the k*pi/{n} grid")
            k %= 2 * n
            sign = 1
            if k == 0 or k > n:
                k = k - n if k > n else n
                sign = (-1) ** n
            out.append((k, sign))
        return out

    def coherence_terms(self) -> list[tuple[int, Estimate]]:
        """[(k, <M_{k pi/n}^{(x)n}>)] for k = 1..n, remapped where needed."""
        terms = []
        for (k, sign), rec in zip(self._grid(), self.theta_records):
            e = expectation_M(rec)
            terms.append((k, Estimate(sign * e.value, e.sigma)))
        return sorted(terms, key=lambda t: t[0])

    def alternating_sum(self) -> Estimate:
        """(1/n) sum_k (-1)^k <M_{k pi/n}>, i.e. 2 Re rho_{0..0,1..1}."""
        terms = self.coherence_terms()
        val = sum((-1) ** k * e.value for k, e in terms) / self.n
        sig = math.sqrt(sum(e.sigma ** 2 for _, e in terms)) / self.n
        return Estimate(val, sig)


def on_grid(theta: float, n: int) -> bool:
    x = theta * n / math.pi
    return abs(x - round(x)) * math.pi / n <= THETA_TOL


def cat_input(records: Sequence[CountRecord]) -> CatAnalysisInput:
    """Pick the all-Z record and the equatorial records on the k*pi/n grid;
    off-grid equatorial records (fringe scans) are ignored here."""
    z = [r for r in records if r.setting.is_all_z]
    if len(z) != 1:
        raise AnalysisError(f"expected exactly one all-Z record, got {len(z)}")
    n = z[0].n
    grid = [r for r in records if r.n == n and r.setting.common_theta is not None
            and on_grid(r.setting.common_theta, n)]
    return CatAnalysisInput(z[0], tuple(grid), n)


def fidelity_cat(inp: CatAnalysisInput) -> Estimate:
    """F = (P_{0^n} + P_{1^n})/2 + (1/2n) sum_k (-1)^k <M_{k pi/n}^{(x)n}>."""
    n = inp.n
    c = np.zeros(2 ** n)
    c[0] = c[-1] = 0.5
    pop, s_pop, _ = _linear_z(inp.z_record, c)
    coh = inp.alternating_sum()
    return Estimate(pop + coh.value / 2, math.hypot(s_pop, coh.sigma / 2))


def witness_value(f: Estimate) -> WitnessEstimate:
    """<W> = 1/2 - F for W = 1/2 - |Cat><Cat|."""
    if f.sigma > 0:
        sig = (f.value - 0.5) / f.sigma
    else:
        sig = math.copysign(math.inf, f.value - 0.5) if f.value != 0.5 else 0.0
    return WitnessEstimate(0.5 - f.value, f.sigma, sig)


# ---------------------------------------------------------------------------
# local filters

def filter_weights(lambdas: Sequence[float]) -> np.ndarray:
    """prod_i (1 +/- lambda_i)^2 over computational basis states."""
    return reduce(np.kron, [np.array([(1 + l) ** 2, (1 - l) ** 2]) for l in lambdas], np.ones(1))


def _filter_constants(lambdas: Sequence[float]):
    lam = np.asarray(lambdas, dtype=float)
    a = float(np.prod(1 + lam))
    b = float(np.prod(1 - lam))
    ab = float(np.prod(1 - lam ** 2))
    tr_f2 = float(np.prod(2 + 2 * lam ** 2))
    return a, b, ab, tr_f2


def _check_filter(inp: CatAnalysisInput, lam: FilterParams):
    if len(lam.lambdas) != inp.n:
        raise AnalysisError(f"{len(lam.lambdas)} filter parameters for {inp.n} qubits")


def witness_normalization(lambdas: Sequence[float]) -> float:
    """N' = Tr(W) / Tr(F W F) with W = 1/2 - |Cat><Cat|."""
    n = len(lambdas)
    a, b, _, tr_f2 = _filter_constants(lambdas)
    tr_fwf = 0.5 * tr_f2 - 0.5 * (a * a + b * b)
    if tr_fwf <= 0:
        raise AnalysisError("degenerate filtered witness")
    return (2 ** (n - 1) - 1) / tr_fwf


def filtered_witness(inp: CatAnalysisInput, lam: FilterParams) -> WitnessEstimate:
    """<W_F> with W_F = N' F W F, evaluated from the unfiltered settings.

    F M_theta F = (1 - l^2) M_theta per qubit and F|z><z|F = w_z |z><z|, so
    the Z record reweighted by w_z and the equatorial parities scaled by
    prod(1 - l_i^2) are sufficient.
    """
    _check_filter(inp, lam)
    if lam.is_identity:
        # identity filter: skip the reweighting so the result is the plain <W>
        return witness_value(fidelity_cat(inp))
    n = inp.n
    a, b, ab, _ = _filter_constants(lam.lambdas)
    norm = witness_normalization(lam.lambdas)
    c = 0.5 * filter_weights(lam.lambdas)
    c[0] -= 0.5 * a * a
    c[-1] -= 0.5 * b * b
    z_val, z_sig, _ = _linear_z(inp.z_record, norm * c)
    coh = inp.alternating_sum()
    value = z_val - norm * ab * coh.value / 2
    sigma = math.hypot(z_sig, norm * ab * coh.sigma / 2)
    signif = -value / sigma if sigma > 0 else (math.inf if value < 0 else 0.0)
    return WitnessEstimate(value, sigma, signif)


def filtered_fidelity(inp: CatAnalysisInput, lam: FilterParams) -> Estimate:
    """Fidelity of N F rho F with the cat state, from the same settings."""
    _check_filter(inp, lam)
    if lam.is_identity:
        return fidelity_cat(inp)
    n = inp.n
    a, b, ab, _ = _filter_constants(lam.lambdas)
    w = filter_weights(lam.lambdas)
    c_num = np.zeros(2 ** n)
    c_num[0] = 0.5 * a * a
    c_num[-1] = 0.5 * b * b
    num_z, _, g_num = _linear_z(inp.z_record, c_num)
    den, _, g_den = _linear_z(inp.z_record, w)
    if den <= 0:
        raise AnalysisError("filtered normalization is not positive")
    coh = inp.alternating_sum()
    num = num_z + ab * coh.value / 2
    value = num / den
    if inp.z_record.exact:
        z_sig = 0.0
    else:
        grad = (g_num * den - num * g_den) / den ** 2
        z_sig = float(math.sqrt(np.sum(grad ** 2 * inp.z_record.counts)))
    sigma = math.hypot(z_sig, ab * coh.sigma / (2 * den))
    return Estimate(value, sigma)


OBJECTIVES = ("min_witness", "max_fidelity")


def _golden(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-7,
            max_iter: int = 200) -> tuple[float, float]:
    g = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _coordinate_descent(f: Callable[[np.ndarray], float], x0: np.ndarray, bound: float,
                        groups: list[list[int]], max_sweeps: int = 60,
                        tol: float = 1e-11) -> tuple[np.ndarray, float]:
    """Minimize over coordinate groups (each group moves together) with a
    golden-section line search restarted on three sub-intervals."""
    x = x0.copy()
    fx = f(x)
    edges = np.linspace(-bound, bound, 4)
    for _ in range(max_sweeps):
        start = fx
        for grp in groups:
            def line(t, grp=grp):
                y = x.copy()
                y[grp] = t
                return f(y)
            for lo, hi in zip(edges[:-1], edges[1:]):
                t, ft = _golden(line, lo, hi)
                if ft < fx:
                    x[grp] = t
                    fx = ft
        if start - fx <= tol:
            break
    return x, fx


def optimize_filter(inp: CatAnalysisInput, objective: str = "min_witness",
                    mode: str = "per-qubit") -> tuple[FilterParams, Estimate]:
    """Search local filters that minimize <W_F> or maximize the filtered
    fidelity. ``mode`` is ``"per-qubit"`` or ``"uniform"`` (one shared lambda).
    The identity filter is always a candidate, so the result is never worse
    than the unfiltered value."""
    if objective not in OBJECTIVES:
        raise AnalysisError(f"objective must be one of {OBJECTIVES}")
    if mode not in ("per-qubit", "uniform"):
        raise AnalysisError("mode must be 'per-qubit' or 'uniform'")
    n = inp.n
    z = inp.z_record.counts.astype(float)
    total = _require_counts(inp.z_record)
    pz = z / total
    coh = inp.alternating_sum().value

    def witness(lam):
        a, b, ab, _ = _filter_constants(lam)
        norm = witness_normalization(lam)
        return norm * (0.5 * filter_weights(lam) @ pz - 0.5 * (a * a * pz[0] + b * b * pz[-1])
                       - 0.5 * ab * coh)

    def neg_fidelity(lam):
        a, b, ab, _ = _filter_constants(lam)
        den = filter_weights(lam) @ pz
        return -(0.5 * (a * a * pz[0] + b * b * pz[-1]) + 0.5 * ab * coh) / den

    f = witness if objective == "min_witness" else neg_fidelity
    groups = [list(range(n))] if mode == "uniform" else [[i] for i in range(n)]
    bound = 1 - 2 * LAMBDA_MARGIN
    x, fx = _coordinate_descent(f, np.zeros(n), bound, groups)
    best = FilterParams(tuple(x)) if fx < f(np.zeros(n)) else FilterParams.zeros(n)
    est = filtered_witness(inp, best) if objective == "min_witness" else filtered_fidelity(inp, best)
    return best, est


# ---------------------------------------------------------------------------
# fringes and signal-to-noise

def fringe_fit(points: Sequence[tuple[float, Estimate]], n: int,
               fix_phase: bool = False) -> tuple[Estimate, Estimate]:
    """Weighted least squares of E(theta) = V cos(n theta + phi).

    Linear in (V cos phi, -V sin phi). Weights 1/sigma^2; if any point has
    zero sigma the fit is unweighted and errors come from the residual scatter.
    ``fix_phase`` fits the amplitude only with phi = 0 (needed when all angles
    sit on the k*pi/n grid, where the sine column vanishes).
    """
    thetas = np.array([t for t, _ in points], dtype=float)
    y = np.array([e.value for _, e in points])
    s = np.array([e.sigma for _, e in points])
    if len(np.unique(np.round(thetas, 12))) < (2 if fix_phase else 4):
        raise AnalysisError("need at least 4 distinct angles")
    cols = [np.cos(n * thetas)] if fix_phase else [np.cos(n * thetas), np.sin(n * thetas)]
    x = np.column_stack(cols)
    weighted = bool(np.all(s > 0))
    w = 1 / s ** 2 if weighted else np.ones_like(y)
    xtwx = x.T @ (w[:, None] * x)
    if np.linalg.matrix_rank(xtwx, tol=1e-10 * max(1.0, np.abs(xtwx).max())) < x.shape[1]:
        raise AnalysisError("degenerate design matrix for the fringe fit")
    cov = np.linalg.inv(xtwx)
    beta = cov @ (x.T @ (w * y))
    if not weighted:
        dof = max(len(y) - x.shape[1], 1)
        resid = y - x @ beta
        cov = cov * float(resid @ resid) / dof
    if fix_phase:
        amp = float(beta[0])
        return Estimate(abs(amp), float(math.sqrt(cov[0, 0]))), Estimate(0.0 if amp >= 0 else math.pi, 0.0)
    a, b = beta
    vis = float(math.hypot(a, b))
    if vis == 0:
        return Estimate(0.0, float(math.sqrt(max(cov[0, 0], cov[1, 1])))), Estimate(0.0, math.pi)
    phi = math.atan2(-b, a) % (2 * math.pi)
    j_v = np.array([a, b]) / vis
    j_phi = np.array([b, -a]) / vis ** 2
    s_v = float(math.sqrt(max(j_v @ cov @ j_v, 0)))
    s_phi = float(math.sqrt(max(j_phi @ cov @ j_phi, 0)))
    return Estimate(vis, s_v), Estimate(phi, s_phi)


class SignalToNoise(NamedTuple):
    ratio: float
    floored: bool


def signal_to_noise(z: CountRecord) -> SignalToNoise:
    """Mean count of 0^n and 1^n over the mean of every other bin.

    With no counts outside the two desired bins the noise total is floored at
    one count and the result is flagged.
    """
    if not z.setting.is_all_z:
        raise AnalysisError("signal-to-noise needs an all-Z record")
    c = z.counts.astype(float)
    signal = (c[0] + c[-1]) / 2
    others = c[1:-1]
    noise = others.mean()
    if noise == 0:
        floor = (1.0 / others.size) if not z.exact else (1e-9 / others.size)
        return SignalToNoise(signal / floor, True)
    return SignalToNoise(signal / noise, False)


def diagonal_fraction(z: CountRecord, n_photons: int) -> float:
    """Share of off-target Z-basis weight on bitstrings whose polarization bits
    equal their spatial bits photon by photon (the 'diagonal line')."""
    n = z.n
    if n != 2 * n_photons:
        raise AnalysisError("record does not have two qubits per photon")
    idx = np.arange(2 ** n)
    pol = idx >> n_photons
    spatial = idx & (2 ** n_photons - 1)
    c = z.counts.astype(float).copy()
    c[0] = c[-1] = 0
    tot = c.sum()
    return float(c[pol == spatial].sum() / tot) if tot > 0 else 1.0


# ---------------------------------------------------------------------------
# report

def fringe_points(records: Sequence[CountRecord]) -> list[tuple[float, Estimate]]:
    """(theta, <M_theta^{(x)n}>) for every common-angle record, sorted by theta."""
    pts = [(r.setting.common_theta, expectation_M(r)) for r in records
           if r.setting.common_theta is not None]
    return sorted(pts, key=lambda t: t[0])


def fit_fringe_records(records: Sequence[CountRecord], n: int) -> tuple[Estimate, Estimate]:
    """Full fit when the angles resolve the phase, amplitude-only otherwise."""
    pts = fringe_points(records)
    try:
        return fringe_fit(pts, n)
    except AnalysisError:
        return fringe_fit(pts, n, fix_phase=True)


def analysis_report(records: Sequence[CountRecord], filter_mode: str | None = None) -> dict:
    """JSON-ready summary of a cat-state data set."""
    inp = cat_input(records)
    n = inp.n
    fid = fidelity_cat(inp)
    wit = witness_value(fid)
    per_setting = [{"k": k, "theta": k * math.pi / n, "value": e.value, "sigma": e.sigma}
                   for k, e in inp.coherence_terms()]
    vis, phase = fit_fringe_records(records, n)
    snr = signal_to_noise(inp.z_record)
    report = {
        "n": n,
        "fidelity": {"value": fid.value, "sigma": fid.sigma},
        "witness": {"value": wit.value, "sigma": wit.sigma, "significance": _json_float(wit.significance)},
        "visibility_fit": {"visibility": vis.value, "visibility_sigma": vis.sigma,
                           "phase": phase.value, "phase_sigma": phase.sigma},
        "signal_to_noise": {"ratio": snr.ratio, "floored": snr.floored},
        "expectations": per_setting,
    }
    if filter_mode:
        runs = {}
        for obj in OBJECTIVES:
            lam, est = optimize_filter(inp, obj, filter_mode)
            runs[obj] = {"lambdas": list(lam.lambdas), "objective": obj,
                         "value": est.value, "sigma": est.sigma}
        # witness run at top level, fidelity run nested
        report["filter"] = {"mode": filter_mode, **runs["min_witness"],
                            "max_fidelity": runs["max_fidelity"]}
    return report


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")
