"""Shared fixtures: small, fast operating points of the chain."""

from __future__ import annotations

from typing import Callable

import numpy as np
import pytest

from chain.cumulants import (
    C11, C12, C22, CD11, CD12, CD21, CD22, CDD11, CDD12, CDD22, N_ENTRIES, S1, S1D, S2, S2D,
)
from chain.params import ChainParams, SimControls


@pytest.fixture
def linear_params() -> ChainParams:
    """Linear chain below both thresholds, with a weak analyzer drive."""
    return ChainParams(g1=0.4, g2=0.3, phi2=0.3, lam=0.0, eta_d2=0.5, phi_d2=0.2)


@pytest.fixture
def kerr_params() -> ChainParams:
    return ChainParams(g1=0.4, g2=0.5, lam=0.01, eta_d2=3.0)


@pytest.fixture
def vacuum_params() -> ChainParams:
    return ChainParams(g1=0.0, g2=0.0, lam=0.0, eta_d2=0.0)


@pytest.fixture
def fast_controls() -> SimControls:
    return SimControls(dt=0.01, t_settle=0.5, t_filter=2.0, n_traj=8, seed=11)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def hermitian_state(rng: np.random.Generator) -> Callable[[], np.ndarray]:
    """Factory for 14-entry states obeying the conjugate-pair and real-diagonal relations."""

    def make() -> np.ndarray:
        z = rng.normal(size=6) + 1j * rng.normal(size=6)
        y = np.zeros(N_ENTRIES, dtype=complex)
        y[S1], y[S2], y[C11], y[C12], y[C22], y[CD12] = z
        y[S1D], y[S2D] = np.conj(y[S1]), np.conj(y[S2])
        y[CDD11], y[CDD12], y[CDD22] = np.conj(y[C11]), np.conj(y[C12]), np.conj(y[C22])
        y[CD21] = np.conj(y[CD12])
        y[CD11], y[CD22] = abs(rng.normal()), abs(rng.normal())
        return y

    return make
