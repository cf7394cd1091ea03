"""Two-class separation metrics for filtered shots and steady-state proxies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la
from scipy.stats import multivariate_normal

from chain.cumulants import CD22, C22, CDD22, S2, S2D, CumulantState
from chain.errors import ConfigError, MetricsError
from chain.measure import ShotRecord

ShotsLike = Sequence[ShotRecord] | np.ndarray

COND_LIMIT = 1e12
QDA_EPS = 1e-9


@dataclass(frozen=True)
class ClassStats:
    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    V: np.ndarray
    delta_mu: np.ndarray
    D_F: float
    fidelity: float | None = None

    @property
    def delta_mu_norm(self) -> float:
        return float(np.linalg.norm(self.delta_mu))


def shots_array(shots: ShotsLike) -> np.ndarray:
    if isinstance(shots, np.ndarray):
        x = np.asarray(shots, dtype=float)
    else:
        x = np.array([[s.I, s.Q] for s in shots], dtype=float).reshape(-1, 2)
    if x.ndim != 2 or x.shape[1] != 2:
        raise MetricsError(f"expected (n, 2) shots, got shape {x.shape}")
    return x


def _two_classes(shots1: ShotsLike, shots2: ShotsLike, minimum: int = 2) -> tuple[np.ndarray, np.ndarray]:
    x1, x2 = shots_array(shots1), shots_array(shots2)
    for label, x in ((1, x1), (2, x2)):
        if len(x) < minimum:
            raise MetricsError(f"class {label} has {len(x)} shots, need at least {minimum}")
    return x1, x2


def mean_separation(shots1: ShotsLike, shots2: ShotsLike) -> tuple[np.ndarray, float]:
    x1, x2 = _two_classes(shots1, shots2)
    delta = x1.mean(axis=0) - x2.mean(axis=0)
    return delta, float(np.linalg.norm(delta))


def fisher(delta_mu: np.ndarray, V: np.ndarray) -> float:
    """D_F = Δμᵀ V⁻¹ Δμ; V gets ε𝕀 added only when it is ill-conditioned."""
    delta_mu = np.asarray(delta_mu, dtype=float)
    V = np.asarray(V, dtype=float)
    if not np.any(delta_mu):
        return 0.0
    # NaN condition numbers (all-zero V) count as ill-conditioned
    if not np.linalg.cond(V) <= COND_LIMIT:
        V = V + QDA_EPS * np.trace(V) / 2 * np.eye(len(V))
        if not np.linalg.cond(V) <= COND_LIMIT:
            raise MetricsError("combined covariance V is singular")
    try:
        value = float(delta_mu @ la.solve(V, delta_mu, assume_a="sym"))
    except la.LinAlgError as exc:
        raise MetricsError("combined covariance V is singular") from exc
    return max(value, 0.0)


def fisher_discriminant(stats: ClassStats) -> float:
    return fisher(stats.delta_mu, stats.V)


def augment_classical_noise(Sigma: np.ndarray, n_cl: float) -> np.ndarray:
    """Σⁿ = n̄_cl·𝕀 + Σ."""
    if n_cl < 0:
        raise ConfigError(f"n_cl must be non-negative, got {n_cl!r}")
    Sigma = np.asarray(Sigma, dtype=float)
    if not np.allclose(Sigma, Sigma.T, rtol=1e-10, atol=1e-12):
        raise ConfigError("covariance must be symmetric")
    return Sigma + n_cl * np.eye(len(Sigma))


def _gaussian(x: np.ndarray, label: int) -> multivariate_normal:
    sigma = np.cov(x, rowvar=False)
    sigma = sigma + QDA_EPS * np.trace(sigma) / 2 * np.eye(2)
    try:
        return multivariate_normal(mean=x.mean(axis=0), cov=sigma)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise MetricsError(f"class {label} covariance is degenerate") from exc


def qda_fidelity(shots1: ShotsLike, shots2: ShotsLike, *, held_out: bool = False) -> float:
    """Fraction of shots assigned to their own class by per-class Gaussian likelihood.

    Equal priors; ties go to class 1. ``held_out`` fits on the first half of
    each class and scores the second half.
    """
    x1, x2 = _two_classes(shots1, shots2, minimum=4 if held_out else 2)
    if held_out:
        (fit1, test1), (fit2, test2) = (np.array_split(x, 2) for x in (x1, x2))
    else:
        fit1, test1, fit2, test2 = x1, x1, x2, x2
    g1, g2 = _gaussian(fit1, 1), _gaussian(fit2, 2)
    right1 = np.atleast_1d(g1.logpdf(test1)) >= np.atleast_1d(g2.logpdf(test1))
    right2 = np.atleast_1d(g2.logpdf(test2)) > np.atleast_1d(g1.logpdf(test2))
    return float((right1.sum() + right2.sum()) / (len(test1) + len(test2)))


def class_stats(
    shots1: ShotsLike, shots2: ShotsLike, *, n_cl: float = 0.0, held_out: bool = False
) -> ClassStats:
    """Empirical statistics of two shot clouds; ``n_cl`` augments both covariances."""
    x1, x2 = _two_classes(shots1, shots2)
    sigma1 = augment_classical_noise(np.cov(x1, rowvar=False), n_cl)
    sigma2 = augment_classical_noise(np.cov(x2, rowvar=False), n_cl)
    V = (sigma1 + sigma2) / 2
    delta, _ = mean_separation(x1, x2)
    return ClassStats(
        mu1=x1.mean(axis=0), mu2=x2.mean(axis=0), sigma1=sigma1, sigma2=sigma2,
        V=V, delta_mu=delta, D_F=fisher(delta, V),
        fidelity=qda_fidelity(x1, x2, held_out=held_out),
    )


# ── Steady-state proxies ──


def _values(state: CumulantState | np.ndarray) -> np.ndarray:
    y = state.values if isinstance(state, CumulantState) else np.asarray(state)
    if not np.all(np.isfinite(y)):
        raise MetricsError("state contains non-finite entries")
    return y


def intracavity_means(state: CumulantState | np.ndarray) -> np.ndarray:
    """(⟨Î₂⟩, ⟨Q̂₂⟩) with Î₂ = (ŝ₂ + ŝ₂†)/√2 and Q̂₂ = −i(ŝ₂ − ŝ₂†)/√2."""
    y = _values(state)
    s2, s2d = y[..., S2], y[..., S2D]
    return np.stack([((s2 + s2d) / math.sqrt(2)).real, (-1j * (s2 - s2d) / math.sqrt(2)).real], axis=-1)


def intracavity_covariance_proxy(state: CumulantState | np.ndarray) -> np.ndarray:
    """Symmetrised analyzer quadrature covariance [[ΔI₂, ΔIQ₂], [ΔIQ₂, ΔQ₂]]."""
    y = _values(state)
    c22, cd22, cdd22 = y[..., C22], y[..., CD22], y[..., CDD22]
    var_i = ((c22 + cdd22 + 2 * cd22 + 1) / 2).real
    var_q = ((-c22 - cdd22 + 2 * cd22 + 1) / 2).real
    cov_iq = (-0.5j * (c22 - cdd22)).real
    return np.stack([np.stack([var_i, cov_iq], -1), np.stack([cov_iq, var_q], -1)], -2)


def proxy_stats(
    state1: CumulantState | np.ndarray,
    state2: CumulantState | np.ndarray,
    t_filter: float,
    n_cl: float = 0.0,
) -> ClassStats:
    """Steady-state estimate of the shot statistics with μ = √𝒯·⟨Î₂, Q̂₂⟩."""
    root_t = math.sqrt(t_filter)
    mu1, mu2 = root_t * intracavity_means(state1), root_t * intracavity_means(state2)
    sigma1 = augment_classical_noise(intracavity_covariance_proxy(state1), n_cl)
    sigma2 = augment_classical_noise(intracavity_covariance_proxy(state2), n_cl)
    V = (sigma1 + sigma2) / 2
    delta = mu1 - mu2
    return ClassStats(
        mu1=mu1, mu2=mu2, sigma1=sigma1, sigma2=sigma2, V=V,
        delta_mu=delta, D_F=fisher(delta, V),
    )
