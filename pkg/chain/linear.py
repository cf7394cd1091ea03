"""Closed-form analysis of the linear (Λ = 0) chain.

Mode vector z = (s₁, s₁†, s₂, s₂†). The second cumulants form the symmetric
matrix C_ij = ⟨:δz_i δz_j:⟩, whose steady state solves J C + C Jᵀ + D = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as la
from scipy import optimize

from chain.cumulants import (
    C11, C12, C22, CD11, CD12, CD21, CD22, CDD11, CDD12, CDD22,
    N_ENTRIES, S1, S1D, S2, S2D, CumulantState,
)
from chain.errors import ConfigError, InstabilityError, ThresholdError
from chain.params import ChainParams

U = np.array([[1, 1], [-1j, 1j]]) / math.sqrt(2)

# (row, col) of C for each cumulant entry
C_INDEX = {
    C11: (0, 0), C12: (0, 2), C22: (2, 2),
    CD11: (0, 1), CD12: (1, 2), CD21: (0, 3), CD22: (2, 3),
    CDD11: (1, 1), CDD12: (1, 3), CDD22: (3, 3),
}
MEAN_INDEX = {S1: 0, S1D: 1, S2: 2, S2D: 3}

Mode = Literal["squeezer", "analyzer"]


@dataclass(frozen=True)
class LinearSystem:
    """Drift J, cumulant inhomogeneity D and drive b of the linear chain."""

    J: np.ndarray
    D: np.ndarray
    b: np.ndarray
    gamma_H: float
    M: dict[int, np.ndarray] = field(default_factory=dict)

    def extraction(self, modes: tuple[int, ...] = (2,)) -> np.ndarray:
        return np.vstack([self.M[k] for k in modes])


def _mode_block(delta: float, g: float, phi: float, kappa_eff: float) -> np.ndarray:
    return np.array([
        [-kappa_eff / 2 + 1j * delta, -1j * g * np.exp(1j * phi)],
        [1j * g * np.exp(-1j * phi), -kappa_eff / 2 - 1j * delta],
    ])


def build_linear_system(p: ChainParams) -> LinearSystem:
    J = np.zeros((4, 4), dtype=complex)
    J[:2, :2] = _mode_block(p.delta1, p.g1, p.phi1, p.kappa1 + p.gamma)
    J[2:, 2:] = _mode_block(p.delta2, p.g2, p.phi2, p.kappa2 + p.gamma)
    # one-way coupling; the analyzer → squeezer block stays zero
    J[2, 0] = J[3, 1] = -p.gamma

    D = np.diag([
        -1j * p.g1 * np.exp(1j * p.phi1),
        1j * p.g1 * np.exp(-1j * p.phi1),
        -1j * p.g2 * np.exp(1j * p.phi2),
        1j * p.g2 * np.exp(-1j * p.phi2),
    ])

    drive = math.sqrt(p.kappa2) * p.eta_d2
    b = np.array([0, 0, -drive * np.exp(1j * p.phi_d2), -drive * np.exp(-1j * p.phi_d2)])

    gamma_H = p.kappa2
    M = {}
    for k in (1, 2):
        m = np.zeros((2, 4), dtype=complex)
        m[:, 2 * (k - 1):2 * k] = math.sqrt(gamma_H) * U
        M[k] = m
    return LinearSystem(J=J, D=D, b=b, gamma_H=gamma_H, M=M)


def max_real_eig(J: np.ndarray) -> float:
    return float(np.max(la.eigvals(J).real))


def _require_stable(J: np.ndarray) -> None:
    top = max_real_eig(J)
    if top >= 0:
        raise InstabilityError("drift matrix is not stable", top)


def threshold(p: ChainParams, which: Mode) -> float:
    """Smallest pump strength at which the mode's own 2×2 block loses stability."""
    if which == "squeezer":
        delta, phi, kappa_eff = p.delta1, p.phi1, p.kappa1 + p.gamma
    elif which == "analyzer":
        delta, phi, kappa_eff = p.delta2, p.phi2, p.kappa2 + p.gamma
    else:
        raise ConfigError(f"unknown mode {which!r}")

    def top(g: float) -> float:
        return max_real_eig(_mode_block(delta, g, phi, kappa_eff))

    if top(0.0) >= 0:
        return 0.0
    hi = abs(delta) + kappa_eff / 2 + 1.0
    return float(optimize.bisect(top, 0.0, hi, xtol=1e-12, maxiter=200))


def check_below_threshold(p: ChainParams) -> None:
    g_th = threshold(p, "squeezer")
    if p.g1 >= g_th:
        raise ThresholdError("squeezer", p.g1, g_th)


def lyapunov_covariance(sys: LinearSystem) -> np.ndarray:
    """Steady normal-ordered covariance C with J C + C Jᵀ + D = 0."""
    _require_stable(sys.J)
    C = la.solve_sylvester(sys.J, sys.J.T, -sys.D)
    return (C + C.T) / 2


def steady_means(sys: LinearSystem) -> np.ndarray:
    _require_stable(sys.J)
    return -la.solve(sys.J, sys.b)


def to_cumulant_state(sys: LinearSystem) -> CumulantState:
    """Lyapunov steady state arranged as the 14-entry cumulant vector."""
    C = lyapunov_covariance(sys)
    z = steady_means(sys)
    values = np.zeros(N_ENTRIES, dtype=complex)
    for entry, k in MEAN_INDEX.items():
        values[entry] = z[k]
    for entry, (i, j) in C_INDEX.items():
        values[entry] = C[i, j]
    return CumulantState(values)


def squeezer_photon_number(p: ChainParams) -> float:
    C = lyapunov_covariance(build_linear_system(p))
    return float(C[0, 1].real)


def filtered_covariance(
    sys: LinearSystem,
    T: float,
    n_cl: float = 0.0,
    *,
    C: np.ndarray | None = None,
    modes: tuple[int, ...] = (2,),
) -> np.ndarray:
    """Covariance of boxcar-filtered (I, Q) shots over a window T.

    Exact for a stationary linear chain; the 1/T part carries the finite-window
    correction.
    """
    if not T > 0:
        raise ConfigError(f"filter window must be positive, got {T!r}")
    if n_cl < 0:
        raise ConfigError(f"n_cl must be non-negative, got {n_cl!r}")
    _require_stable(sys.J)
    if C is None:
        C = lyapunov_covariance(sys)

    J = sys.J
    eye = np.eye(J.shape[0])
    try:
        Jinv = la.inv(J)
    except la.LinAlgError as exc:
        raise InstabilityError("drift matrix is singular", 0.0) from exc
    JinvT = Jinv.T
    tail = (
        C @ JinvT @ JinvT @ (eye - la.expm(J.T * T))
        + Jinv @ Jinv @ (eye - la.expm(J * T)) @ C
    ) / T
    M = sys.extraction(modes)
    core = M @ (C @ JinvT + Jinv @ C + tail) @ M.T
    sigma = 0.5 * (1 + n_cl) * np.eye(M.shape[0]) - 0.5 * core
    scale = 1.0 + float(np.max(np.abs(sigma)))
    if np.max(np.abs(sigma.imag)) > 1e-9 * scale:
        raise InstabilityError("filtered covariance has a non-negligible imaginary part", 0.0)
    sigma = sigma.real
    return (sigma + sigma.T) / 2


def minor_axis_angle(sigma: np.ndarray) -> float:
    """Angle of the minor principal axis of a 2×2 covariance, in (−π/2, π/2]."""
    w, v = np.linalg.eigh(sigma)
    vec = v[:, 0]
    return wrap_half_turn(math.atan2(vec[1], vec[0]))


def measured_squeezing_axis(sys: LinearSystem, T: float) -> float:
    return minor_axis_angle(filtered_covariance(sys, T))


def wrap_half_turn(angle: float) -> float:
    return math.pi / 2 - ((math.pi / 2 - angle) % math.pi)


def squeezing_axis(phi1: float) -> float:
    return wrap_half_turn(math.pi / 4 - phi1 / 2)


def _gain_db(g2: float, kappa: float) -> float:
    return 20 * math.log10((kappa / 2 + g2) / (kappa / 2 - g2))


def analyzer_gain_db(p: ChainParams) -> float:
    """Amplified-quadrature gain of the isolated linear analyzer, in dB.

    Uses the resonant response ratio; Δ₂ does not enter.
    """
    kappa = p.kappa2 + p.gamma
    g_lim = min(threshold(p, "analyzer"), kappa / 2)
    if p.g2 >= g_lim:
        raise ThresholdError("analyzer", p.g2, g_lim)
    return _gain_db(p.g2, kappa)


def g2_for_gain_db(p: ChainParams, db: float) -> float:
    if db < 0:
        raise ConfigError(f"gain must be non-negative, got {db!r} dB")
    kappa = p.kappa2 + p.gamma
    if db == 0:
        return 0.0
    hi = kappa / 2 * (1 - 1e-12)
    return float(optimize.brentq(lambda g: _gain_db(g, kappa) - db, 0.0, hi, xtol=1e-15, rtol=1e-15))
