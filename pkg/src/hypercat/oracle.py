"""Dense brute-force references: cat states, Pauli-type expectations,
filtered witness/fidelity and a stabilizer checker.

Qubit 0 is the most significant bit of the basis index. Everything here is
plain linear algebra on 2^n vectors / 2^n x 2^n matrices and independent of
the count-based estimators it is used to check.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

MAX_QUBITS = 12

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


class OracleError(ValueError):
    pass


def dense_cat(n: int, sign: int = 1) -> np.ndarray:
    """(|0...0> + sign |1...1>)/sqrt(2) as a 2^n vector."""
    if not 1 <= n <= MAX_QUBITS:
        raise OracleError(f"n={n} outside 1..{MAX_QUBITS}")
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1 / np.sqrt(2)
    psi[-1] = sign / np.sqrt(2)
    return psi


def cat_projector(n: int) -> np.ndarray:
    psi = dense_cat(n)
    return np.outer(psi, psi.conj())


def m_theta(theta: float) -> np.ndarray:
    return np.cos(theta) * SX + np.sin(theta) * SY


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def setting_operator(bases: Sequence) -> np.ndarray:
    return kron_all([SZ if b == "Z" else m_theta(float(b)) for b in bases])


def _check_rho(rho: np.ndarray, n: int | None = None) -> int:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise OracleError("density matrix must be square")
    dim = rho.shape[0]
    k = int(round(np.log2(dim)))
    if 2 ** k != dim or (n is not None and k != n):
        raise OracleError("dimension mismatch")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise OracleError("density matrix is not Hermitian")
    return k


def direct_expectation(rho: np.ndarray, setting) -> float:
    """Tr(rho O_1 x ... x O_n), O_i = sigma_z or M_theta."""
    bases = getattr(setting, "bases", setting)
    _check_rho(rho, len(bases))
    val = np.sum(rho * setting_operator(bases).T)
    if abs(val.imag) > 1e-10:
        raise OracleError("expectation not real")
    return float(val.real)


def fidelity(rho: np.ndarray, psi: np.ndarray | None = None) -> float:
    n = _check_rho(rho)
    psi = dense_cat(n) if psi is None else psi
    return float(np.real(psi.conj() @ rho @ psi))


def filter_diagonal(lambdas: Sequence[float]) -> np.ndarray:
    """Diagonal of F = (x)_i [(1 + l_i)|0><0| + (1 - l_i)|1><1|]."""
    return reduce(np.kron, [np.array([1 + l, 1 - l]) for l in lambdas], np.ones(1))


def direct_filtered(rho: np.ndarray, lambdas: Sequence[float]) -> tuple[float, float]:
    """(Tr(W_F rho), <Cat|F rho F|Cat> / Tr(F rho F)) by explicit matrices.

    W = 1/2 - |Cat><Cat|, W_F = N' F W F with Tr(W_F) = Tr(W).
    """
    n = _check_rho(rho, len(lambdas))
    # F is diagonal: F A F = f_i A_ij f_j
    f = filter_diagonal(lambdas)
    w = 0.5 * np.eye(2 ** n) - cat_projector(n)
    fwf = f[:, None] * w * f[None, :]
    tr = np.real(np.trace(fwf))
    if abs(tr) < 1e-300:
        raise OracleError("singular witness normalization")
    w_f = np.real(np.trace(w)) / tr * fwf
    witness = float(np.real(np.sum(w_f * rho.T)))
    frf = f[:, None] * rho * f[None, :]
    den = np.real(np.trace(frf))
    if den <= 0:
        raise OracleError("filtered state has zero trace")
    fid = float(np.real(dense_cat(n).conj() @ frf @ dense_cat(n)) / den)
    return witness, fid


def apply_filter(rho: np.ndarray, lambdas: Sequence[float], inverse: bool = False) -> np.ndarray:
    d = filter_diagonal(lambdas)
    if inverse:
        d = 1 / d
    return d[:, None] * rho * d[None, :]


def parse_pauli(text: str) -> tuple[complex, str]:
    s = text.strip()
    sign = 1
    if s[:1] in "+-":
        sign = -1 if s[0] == "-" else 1
        s = s[1:]
    if not s or set(s) - set(PAULI):
        raise OracleError(f"malformed Pauli string {text!r}")
    return sign, s


def pauli_operator(text: str) -> np.ndarray:
    sign, s = parse_pauli(text)
    return sign * kron_all([PAULI[c] for c in s])


def stabilizer_check(state: np.ndarray, generators: Sequence[str], atol: float = 1e-9) -> bool:
    """True iff g|psi> = |psi> for every generator (e.g. ``"XXX"``, ``"-ZZI"``)."""
    psi = np.asarray(state, dtype=complex)
    n = int(round(np.log2(psi.size)))
    for g in generators:
        _, s = parse_pauli(g)
        if len(s) != n:
            raise OracleError(f"generator {g!r} has length {len(s)}, state has {n} qubits")
        if not np.allclose(pauli_operator(g) @ psi, psi, atol=atol):
            return False
    return True


def graph_state(n: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """|G> = prod_{(a,b) in E} CZ_ab |+>^n."""
    idx = np.arange(2 ** n)
    bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
    phase = np.zeros(2 ** n, dtype=int)
    for a, b in edges:
        phase += bits[a] & bits[b]
    return ((-1.0) ** phase / np.sqrt(2 ** n)).astype(complex)


def graph_stabilizers(n: int, edges: Sequence[tuple[int, int]]) -> list[str]:
    gens = []
    for v in range(n):
        s = ["I"] * n
        s[v] = "X"
        for a, b in edges:
            if a == v:
                s[b] = "Z"
            elif b == v:
                s[a] = "Z"
        gens.append("".join(s))
    return gens


def redundant_stabilizers(n: int, edges: Sequence[tuple[int, int]], encoded: Sequence[int]) -> list[str]:
    """Stabilizers after copying qubits ``encoded`` onto new qubits n, n+1, ...

    Copy map a|0> + b|1> -> a|00> + b|11>: X_v -> X_v X_v', Z_v unchanged,
    plus Z_v Z_v' for each copy.
    """
    encoded = sorted(encoded)
    total = n + len(encoded)
    copy_of = {v: n + j for j, v in enumerate(encoded)}
    gens = []
    for g in graph_stabilizers(n, edges):
        s = list(g) + ["I"] * len(encoded)
        for v, c in copy_of.items():
            if g[v] == "X":
                s[c] = "X"
        gens.append("".join(s))
    for v, c in copy_of.items():
        s = ["I"] * total
        s[v] = s[c] = "Z"
        gens.append("".join(s))
    return gens


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed mixed state."""
    dim = 2 ** n
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def white_noise_cat(n: int, p: float) -> np.ndarray:
    return p * cat_projector(n) + (1 - p) * np.eye(2 ** n) / 2 ** n


def amplitude_damp(rho: np.ndarray, qubit: int, gamma: float) -> np.ndarray:
    n = _check_rho(rho)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    out = np.zeros_like(rho, dtype=complex)
    for k in (k0, k1):
        full = kron_all([k if q == qubit else I2 for q in range(n)])
        out += full @ rho @ full.conj().T
    return out


def exact_distribution(rho: np.ndarray, bases: Sequence) -> np.ndarray:
    """Outcome probabilities by explicit projectors (|R>, |L> for angles)."""
    n = _check_rho(rho, len(bases))
    vecs = []
    for b in bases:
        if b == "Z":
            vecs.append([np.array([1, 0], complex), np.array([0, 1], complex)])
        else:
            e = np.exp(1j * float(b))
            vecs.append([np.array([1, e]) / np.sqrt(2), np.array([1, -e]) / np.sqrt(2)])
    probs = np.empty(2 ** n)
    for idx in range(2 ** n):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        v = reduce(np.kron, [vecs[q][bits[q]] for q in range(n)])
        probs[idx] = np.real(v.conj() @ rho @ v)
    return probs
