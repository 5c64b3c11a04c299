import pytest

from hypercat import calibration
from hypercat.calibration import ANCHORS, CALIBRATED


@pytest.fixture(scope="module")
def summary():
    return calibration.summary(CALIBRATED)


def test_pair_visibilities_hit_anchors():
    zz, xx = calibration.pair_visibilities(CALIBRATED)
    assert zz == pytest.approx(ANCHORS.pair_visibility_hv, abs=1e-9)
    assert xx == pytest.approx(ANCHORS.pair_visibility_diag, abs=1e-9)


def test_calibrated_figures_of_merit(summary):
    assert summary["rate_ratio_10_8"] == pytest.approx(ANCHORS.rate_ratio_10_8, rel=1e-3)
    assert summary["cat10"]["snr"] == pytest.approx(ANCHORS.snr_cat10, rel=1e-2)
    assert summary["cat8"]["fidelity"] == pytest.approx(ANCHORS.fidelity_cat8, abs=1e-3)
    # the unanchored predictions keep the observed ordering
    assert summary["cat6"]["fidelity"] < summary["cat8"]["fidelity"]
    assert summary["cat10"]["fidelity"] < summary["cat8"]["fidelity"]
    assert summary["cat6"]["snr"] < summary["cat10"]["snr"]
    assert summary["cat10"]["success_prob"] < summary["cat8"]["success_prob"]


def test_calibrated_ten_qubit_fidelity_between_bounds(summary):
    assert 0.48 <= summary["cat10"]["fidelity"] <= 0.65


@pytest.mark.slow
def test_recalibration_reproduces_frozen_values():
    cal = calibration.calibrate()
    assert cal.noise.tau == pytest.approx(CALIBRATED.tau, abs=2e-5)
    assert cal.noise.eta == pytest.approx(CALIBRATED.eta, abs=2e-5)
    assert cal.noise.xi == pytest.approx(CALIBRATED.xi, abs=2e-5)
