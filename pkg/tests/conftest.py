import math

import numpy as np
import pytest

from hypercat import fock
from hypercat.circuit import INJECTED, CircuitPlan, SourceSpec
from hypercat.detection import MeasurementSetting, QubitEnsemble, exact_record, outcome_distribution

ACCEPTANCE = {}
N_CRITERIA = 9


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        if k in ACCEPTANCE:
            ok, detail = ACCEPTANCE[k]
            tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"criterion {k}: FAIL  (not evaluated)")


def cat_records(rho: np.ndarray, n: int, ks=None):
    """Exact all-Z record plus exact equatorial records at k*pi/n."""
    ens = QubitEnsemble(rho, n, 1.0)
    ks = range(1, n + 1) if ks is None else ks
    z = MeasurementSetting.all_z(n)
    out = [exact_record(outcome_distribution(ens, z), z)]
    for k in ks:
        s = MeasurementSetting.equatorial(n, k * math.pi / n)
        out.append(exact_record(outcome_distribution(ens, s), s))
    return out


def growth_plan(m: int, pol_state=(2 ** -0.5, 2 ** -0.5)) -> CircuitPlan:
    """m photons in ``pol_state`` on paths 0..m-1 fused in a chain of PBSs."""
    amps = np.array([1.0 + 0j])
    for _ in range(m):
        amps = np.kron(amps, np.asarray(pol_state, dtype=complex))
    src = SourceSpec(INJECTED, tuple(range(m)), amplitudes=tuple(amps))
    elements, free, carry, outs = [], m, 0, []
    for j in range(1, m):
        c, d = free, free + 1
        free += 2
        elements.append(fock.PBS(carry, j, c, d))
        outs.append(c)
        carry = d
    outs.append(carry)
    return CircuitPlan((src,), tuple(elements), tuple((p,) for p in outs),
                       tuple(("pol", i) for i in range(m)), fusions=tuple(range(m - 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
