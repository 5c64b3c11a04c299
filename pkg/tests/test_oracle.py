import math
import time

import numpy as np
import pytest

from hypercat import oracle
from hypercat.detection import MeasurementSetting


def test_dense_cat_small():
    np.testing.assert_allclose(oracle.dense_cat(1), [2 ** -0.5, 2 ** -0.5])
    np.testing.assert_allclose(oracle.dense_cat(2), np.array([1, 0, 0, 1]) / math.sqrt(2))


def test_dense_cat_ten_qubits():
    psi = oracle.dense_cat(10)
    assert psi.shape == (1024,)
    assert np.count_nonzero(psi) == 2
    assert np.linalg.norm(psi) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n", [0, 13])
def test_dense_cat_range(n):
    with pytest.raises(oracle.OracleError):
        oracle.dense_cat(n)


def test_cat_self_consistency():
    n = 4
    assert oracle.fidelity(oracle.cat_projector(n)) == pytest.approx(1)
    minus = oracle.dense_cat(n, sign=-1)
    assert oracle.fidelity(np.outer(minus, minus.conj())) == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("theta", [0.0, 0.5, 2.2])
def test_direct_expectation_cat(theta):
    for n in (2, 5):
        e = oracle.direct_expectation(oracle.cat_projector(n), MeasurementSetting.equatorial(n, theta))
        assert e == pytest.approx(math.cos(n * theta), abs=1e-12)


def test_direct_expectation_identity():
    assert oracle.direct_expectation(np.eye(8) / 8, [0.3, 1.0, 2.0]) == pytest.approx(0, abs=1e-15)
    assert oracle.direct_expectation(oracle.cat_projector(3), ["Z", "Z", "Z"]) == pytest.approx(0)
    assert oracle.direct_expectation(oracle.cat_projector(2), ["Z", "Z"]) == pytest.approx(1)


def test_direct_expectation_rejects_non_hermitian():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 1] = 1
    with pytest.raises(oracle.OracleError):
        oracle.direct_expectation(rho, ["Z", "Z"])
    with pytest.raises(oracle.OracleError):
        oracle.direct_expectation(np.eye(4) / 4, ["Z"])


def test_direct_filtered_identity():
    rho = oracle.random_density_matrix(3, np.random.default_rng(1))
    w, f = oracle.direct_filtered(rho, (0, 0, 0))
    assert f == pytest.approx(oracle.fidelity(rho), abs=1e-12)
    assert w == pytest.approx(0.5 - f, abs=1e-12)


def test_direct_filtered_uniform_on_cat():
    _, f = oracle.direct_filtered(oracle.cat_projector(2), (0.5, 0.5))
    a, b = 2.25, 0.25
    assert f == pytest.approx((a + b) ** 2 / (2 * (a * a + b * b)), abs=1e-12)


def test_direct_filtered_product_state_invariant():
    rho = np.zeros((8, 8))
    rho[0, 0] = 1
    for lam in [(0.1, 0.2, 0.3), (-0.8, 0.5, 0.9)]:
        assert oracle.direct_filtered(rho, lam)[1] == pytest.approx(0.5, abs=1e-12)


def test_stabilizer_check_cat():
    psi = oracle.dense_cat(3)
    assert oracle.stabilizer_check(psi, ["XXX", "ZZI", "IZZ"])
    assert not oracle.stabilizer_check(psi, ["-XXX"])
    with pytest.raises(oracle.OracleError):
        oracle.stabilizer_check(psi, ["XQX"])
    with pytest.raises(oracle.OracleError):
        oracle.stabilizer_check(psi, ["XX"])


def test_redundant_cluster_stabilizers():
    edges = [(0, 1), (1, 2), (2, 3)]
    psi4 = oracle.graph_state(4, edges)
    assert oracle.stabilizer_check(psi4, oracle.graph_stabilizers(4, edges))
    # copy every qubit: a|0> + b|1> -> a|00> + b|11>, built index by index
    psi8 = np.zeros(256, dtype=complex)
    for idx, amp in enumerate(psi4):
        psi8[(idx << 4) | idx] = amp
    assert oracle.stabilizer_check(psi8, oracle.redundant_stabilizers(4, edges, [0, 1, 2, 3]))
    assert not oracle.stabilizer_check(psi8, ["XIIIIIII"])


def test_ten_qubit_routines_are_fast():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    rho = oracle.white_noise_cat(10, 0.5)
    oracle.direct_expectation(rho, MeasurementSetting.equatorial(10, 0.3))
    oracle.direct_filtered(rho, rng.uniform(-0.5, 0.5, 10))
    oracle.fidelity(rho)
    oracle.amplitude_damp(rho, 0, 0.3)
    assert time.perf_counter() - t0 < 10
