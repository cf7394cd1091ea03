from __future__ import annotations

import math

import numpy as np
import pytest

from chain.errors import ConfigError, InstabilityError, ThresholdError
from chain.linear import (
    analyzer_gain_db, build_linear_system, check_below_threshold, filtered_covariance,
    g2_for_gain_db, lyapunov_covariance, measured_squeezing_axis, minor_axis_angle,
    squeezer_photon_number, squeezing_axis, steady_means, threshold, wrap_half_turn,
)
from chain.params import ChainParams


def _same_axis(a: float, b: float, tol: float = 1e-6) -> bool:
    return abs(wrap_half_turn(a - b)) < tol


def test_threshold_resonant():
    assert threshold(ChainParams(kappa1=0.0, gamma=1.0), "squeezer") == pytest.approx(0.5, abs=1e-9)
    assert threshold(ChainParams(kappa2=1.0, gamma=1.0), "analyzer") == pytest.approx(1.0, abs=1e-9)


def test_threshold_with_detuning():
    p = ChainParams(delta1=0.3, delta2=-0.4)
    assert threshold(p, "squeezer") == pytest.approx(math.hypot(0.3, 0.5), abs=1e-9)
    assert threshold(p, "analyzer") == pytest.approx(math.hypot(0.4, 1.0), abs=1e-9)


def test_threshold_unknown_mode():
    with pytest.raises(ConfigError):
        threshold(ChainParams(), "pump")


def test_above_threshold_rejected():
    with pytest.raises(ThresholdError) as info:
        check_below_threshold(ChainParams(g1=0.500001))
    assert info.value.g_th == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(InstabilityError):
        lyapunov_covariance(build_linear_system(ChainParams(g2=1.2)))


def test_squeezer_photon_number_at_ninety_percent():
    p = ChainParams(g1=0.9 * 0.5)
    assert squeezer_photon_number(p) == pytest.approx(2.13, abs=0.01)


def test_lyapunov_residual(linear_params):
    sys = build_linear_system(linear_params)
    C = lyapunov_covariance(sys)
    np.testing.assert_allclose(sys.J @ C + C @ sys.J.T + sys.D, 0, atol=1e-12)
    np.testing.assert_allclose(C, C.T)


def test_steady_means_solve_drive(linear_params):
    sys = build_linear_system(linear_params)
    z = steady_means(sys)
    np.testing.assert_allclose(sys.J @ z + sys.b, 0, atol=1e-12)
    assert z[3] == pytest.approx(np.conj(z[2]))


def test_filtered_covariance_vacuum(vacuum_params):
    sys = build_linear_system(vacuum_params)
    np.testing.assert_allclose(filtered_covariance(sys, 50.0), 0.5 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(filtered_covariance(sys, 50.0, n_cl=3.0), 2.0 * np.eye(2), atol=1e-14)


def test_filtered_covariance_finite_window_correction(linear_params):
    sys = build_linear_system(linear_params)
    short, long_, longer = (filtered_covariance(sys, T) for T in (100.0, 1000.0, 10000.0))
    assert np.all(np.linalg.eigvalsh(short) > 0)
    # the window correction falls off as 1/T
    d1 = np.abs(long_ - short).max()
    d2 = np.abs(longer - long_).max()
    assert d2 < d1 / 5


def test_filtered_covariance_rejects_bad_inputs(linear_params):
    sys = build_linear_system(linear_params)
    with pytest.raises(ConfigError):
        filtered_covariance(sys, 0.0)
    with pytest.raises(ConfigError):
        filtered_covariance(sys, 10.0, n_cl=-0.1)


def test_squeezing_axis_formula():
    assert squeezing_axis(0.0) == pytest.approx(math.pi / 4)
    assert squeezing_axis(math.pi) == pytest.approx(-math.pi / 4)


@pytest.mark.parametrize("phi1", [0.0, math.pi])
def test_measured_axis_matches_formula_for_task_phases(phi1):
    sys = build_linear_system(ChainParams(g1=0.4, phi1=phi1, g2=0.0, lam=0.0))
    assert _same_axis(measured_squeezing_axis(sys, 800.0), squeezing_axis(phi1))


@pytest.mark.parametrize("phi1", [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
def test_measured_axis_rotates_with_half_pump_phase(phi1):
    sys = build_linear_system(ChainParams(g1=0.4, phi1=phi1, g2=0.0, lam=0.0))
    assert _same_axis(measured_squeezing_axis(sys, 800.0), math.pi / 4 + phi1 / 2)


def test_minor_axis_angle():
    sigma = np.array([[1.0, 0.0], [0.0, 0.2]])
    assert _same_axis(minor_axis_angle(sigma), math.pi / 2)


def test_gain_table():
    p = ChainParams()
    assert analyzer_gain_db(p) == 0.0
    g20 = g2_for_gain_db(p, 20.0)
    assert g20 == pytest.approx(9 / 11, rel=1e-9)
    assert analyzer_gain_db(p.replace(g2=g20)) == pytest.approx(20.0, abs=1e-9)
    with pytest.raises(ThresholdError):
        analyzer_gain_db(p.replace(g2=1.0))
    with pytest.raises(ConfigError):
        g2_for_gain_db(p, -1.0)
