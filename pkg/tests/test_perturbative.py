from __future__ import annotations

import math

import numpy as np
import pytest

from chain.errors import PerturbativeError
from chain.integrate import solve_steady
from chain.metrics import fisher, proxy_stats
from chain.params import PHASE, ChainParams, Encoding, SimControls
from chain.perturbative import (
    PerturbativeSolution, dressed_jacobian, first_order_cumulants, first_order_mean,
    perturbative_delta_mu, perturbative_fisher, perturbative_V, scaled_drive, solve_perturbative,
    solve_zeroth_mean, stable_roots, symmetric_variance, zeroth_cumulants,
)


@pytest.fixture
def operating_point() -> ChainParams:
    return ChainParams(g1=0.4, g2=0.5, phi2=0.0, lam=0.01, eta_d2=3.0, phi_d2=0.0)


def _at_scaled_drive(p: ChainParams, lam: float, eta_scaled: float) -> ChainParams:
    return p.replace(lam=lam, eta_d2=eta_scaled / math.sqrt(lam))


def test_zeroth_mean_solves_scaled_equation(operating_point):
    p = operating_point
    s = solve_zeroth_mean(p)
    kappa = p.kappa2 + p.gamma
    residual = (
        (1j * p.delta2 - kappa / 2) * s - 1j * p.g2 * np.exp(1j * p.phi2) * np.conj(s)
        - math.sqrt(p.kappa2) * scaled_drive(p) * np.exp(1j * p.phi_d2) + 1j * abs(s) ** 2 * s
    )
    assert abs(residual) < 1e-10
    assert np.max(np.linalg.eigvals(dressed_jacobian(p, s)).real) < 0


def test_zeroth_mean_is_zero_without_drive(operating_point):
    assert solve_zeroth_mean(operating_point.replace(eta_d2=0.0)) == 0j


def test_linear_chain_gives_exactly_zero_separation(operating_point):
    sol = solve_perturbative(operating_point.replace(lam=0.0))
    assert np.array_equal(perturbative_delta_mu(sol, 800.0), np.zeros(2))
    assert perturbative_fisher(sol, 800.0) == 0.0


def test_identical_dispersive_classes_give_zero(operating_point):
    sol = solve_perturbative(operating_point, Encoding(kind="dispersive", chi=0.0))
    assert np.array_equal(perturbative_delta_mu(sol, 800.0), np.zeros(2))
    assert perturbative_fisher(sol, 800.0) == 0.0


def test_phase_classes_separate(operating_point):
    sol = solve_perturbative(operating_point, PHASE)
    assert isinstance(sol, PerturbativeSolution)
    assert sol.exponents == (-0.5, 0.5, 0, 1)
    dmu = perturbative_delta_mu(sol, 800.0)
    assert np.linalg.norm(dmu) > 0
    np.testing.assert_allclose(perturbative_delta_mu(sol, 3200.0), 2 * dmu, rtol=1e-12)
    assert perturbative_fisher(sol, 3200.0) == pytest.approx(4 * perturbative_fisher(sol, 800.0))


def test_separation_grows_as_root_lambda_at_fixed_scaled_drive(operating_point):
    eta_scaled = scaled_drive(operating_point)
    norms = []
    for lam in (1e-3, 4e-3):
        sol = solve_perturbative(_at_scaled_drive(operating_point, lam, eta_scaled))
        norms.append(np.linalg.norm(perturbative_delta_mu(sol, 800.0)))
    assert norms[1] == pytest.approx(2 * norms[0], rel=1e-8)


def test_combined_variance(operating_point):
    sol = solve_perturbative(operating_point)
    V = perturbative_V(sol)
    np.testing.assert_allclose(V, V.T)
    assert np.all(np.linalg.eigvalsh(V) > 0)
    np.testing.assert_allclose(symmetric_variance(sol), 2 * V + 0.5 * np.eye(2), rtol=1e-12, atol=1e-14)


def test_vacuum_variance_is_zero():
    vacuum = solve_perturbative(ChainParams(g1=0.0, g2=0.0, lam=0.01, eta_d2=0.0))
    np.testing.assert_allclose(perturbative_V(vacuum), np.zeros((2, 2)), atol=1e-14)
    np.testing.assert_allclose(symmetric_variance(vacuum), 0.5 * np.eye(2), atol=1e-14)
    assert perturbative_fisher(vacuum, 800.0) == 0.0


@pytest.mark.slow
def test_symmetric_variance_matches_intracavity_proxy(operating_point):
    p = _at_scaled_drive(operating_point, 1e-3, scaled_drive(operating_point))
    sol = solve_perturbative(p)
    states = [solve_steady(PHASE.apply(p, k), SimControls()) for k in (1, 2)]
    V = proxy_stats(states[0], states[1], 800.0).V
    np.testing.assert_allclose(symmetric_variance(sol), V, rtol=0.05, atol=0.02)


def test_indefinite_variance_is_rejected(operating_point, monkeypatch):
    sol = solve_perturbative(operating_point)
    monkeypatch.setattr(
        "chain.perturbative.perturbative_V", lambda _: np.array([[1.0, 0.0], [0.0, -0.1]])
    )
    with pytest.raises(PerturbativeError):
        perturbative_fisher(sol, 800.0)


def test_zeroth_cumulants_are_hermitian(operating_point):
    s = solve_zeroth_mean(operating_point)
    css, cd, cdd = zeroth_cumulants(operating_point, s, 1)
    assert cdd == pytest.approx(np.conj(css))
    assert abs(cd.imag) < 1e-12
    assert cd.real > 0


def test_first_order_corrections_are_finite(operating_point):
    sol = solve_perturbative(operating_point)
    s1 = first_order_mean(sol, 1)
    assert s1[1] == pytest.approx(np.conj(s1[0]))
    C1 = first_order_cumulants(sol, 2)
    assert C1.shape == (4, 4)
    assert np.all(np.isfinite(C1))
    with pytest.raises(PerturbativeError):
        first_order_cumulants(solve_perturbative(operating_point.replace(lam=0.0)), 1)


def test_weak_kerr_is_monostable(operating_point):
    sol = solve_perturbative(operating_point)
    assert not sol.multistable
    assert len(stable_roots(operating_point, reference=sol.s2_bar)) == 1


def test_reused_mean_matches_fresh_solve(operating_point):
    fresh = solve_perturbative(operating_point)
    reused = solve_perturbative(operating_point, s2_bar=fresh.s2_bar, multistable=fresh.multistable)
    np.testing.assert_array_equal(perturbative_delta_mu(fresh, 800.0), perturbative_delta_mu(reused, 800.0))


@pytest.mark.slow
def test_closed_form_matches_cumulant_steady_state(operating_point):
    eta_scaled = scaled_drive(operating_point)
    T = 800.0
    errors = []
    for lam in (1e-3, 5e-4):
        p = _at_scaled_drive(operating_point, lam, eta_scaled)
        states = [solve_steady(PHASE.apply(p, k), SimControls()) for k in (1, 2)]
        exact = proxy_stats(states[0], states[1], T).delta_mu
        approx = perturbative_delta_mu(solve_perturbative(p), T)
        errors.append(np.linalg.norm(approx - exact))
        if lam == 1e-3:
            assert errors[-1] < 0.1 * np.linalg.norm(exact)
    assert errors[1] <= 0.5 * errors[0] * 1.05


@pytest.mark.slow
def test_closed_form_fisher_matches_cumulant_steady_state(operating_point):
    p = _at_scaled_drive(operating_point, 1e-3, scaled_drive(operating_point))
    T = 800.0
    sol = solve_perturbative(p)
    states = [solve_steady(PHASE.apply(p, k), SimControls()) for k in (1, 2)]
    exact = proxy_stats(states[0], states[1], T)
    normal_ordered = (exact.V - 0.5 * np.eye(2)) / 2
    assert perturbative_fisher(sol, T) == pytest.approx(fisher(exact.delta_mu, normal_ordered), rel=0.15)
    closed = fisher(perturbative_delta_mu(sol, T), symmetric_variance(sol))
    assert closed == pytest.approx(exact.D_F, rel=0.15)


def test_separation_is_phase_covariant(rng):
    """Rotating every phase with the oscillator frame leaves ‖Δμ‖ and the eigenvalues of V unchanged."""
    enc = Encoding(kind="dispersive", chi=0.2)
    for _ in range(8):
        p = ChainParams(
            g1=rng.uniform(0.05, 0.4), phi1=rng.uniform(-np.pi, np.pi),
            g2=rng.uniform(0.05, 0.6), phi2=rng.uniform(-np.pi, np.pi),
            lam=0.01, eta_d2=rng.uniform(0.5, 3.0), phi_d2=rng.uniform(-np.pi, np.pi),
        )
        d = rng.uniform(-np.pi, np.pi)
        q = p.replace(phi1=p.phi1 + 2 * d, phi2=p.phi2 + 2 * d, phi_d2=p.phi_d2 + d)
        a, b = solve_perturbative(p, enc), solve_perturbative(q, enc)
        norm_a = np.linalg.norm(perturbative_delta_mu(a, 800.0))
        assert norm_a > 0
        assert np.linalg.norm(perturbative_delta_mu(b, 800.0)) == pytest.approx(norm_a, rel=1e-8)
        np.testing.assert_allclose(
            np.linalg.eigvalsh(perturbative_V(b)), np.linalg.eigvalsh(perturbative_V(a)), rtol=1e-8, atol=1e-12
        )
