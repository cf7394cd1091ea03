"""Truncated cumulant equations of motion for the squeezer → analyzer chain.

The state holds 14 complex entries: four means and ten normal-ordered second
cumulants. Conjugate pairs are evolved redundantly; the Hermiticity relations
are checked, not imposed. Every kernel accepts a single state of shape (14,)
or a batch of shape (n, 14), paired with either one ``ChainParams`` or a
``ParamArrays`` of length n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chain.errors import ConfigError

NAMES = (
    "s1", "s2", "s1d", "s2d",
    "c11", "c12", "c22",
    "cd11", "cd12", "cd21", "cd22",
    "cdd11", "cdd12", "cdd22",
)
(S1, S2, S1D, S2D,
 C11, C12, C22,
 CD11, CD12, CD21, CD22,
 CDD11, CDD12, CDD22) = range(len(NAMES))
N_ENTRIES = len(NAMES)

# (entry, conjugate partner) pairs
CONJUGATE_PAIRS = ((S1, S1D), (S2, S2D), (C11, CDD11), (C12, CDD12), (C22, CDD22), (CD12, CD21))
REAL_ENTRIES = (CD11, CD22)


@dataclass(frozen=True)
class CumulantState:
    """Means and second cumulants of the two modes (or their time derivative)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape[-1:] != (N_ENTRIES,):
            raise ConfigError(f"expected trailing dimension {N_ENTRIES}, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def vacuum(cls) -> CumulantState:
        return cls(np.zeros(N_ENTRIES, dtype=complex))

    @classmethod
    def from_entries(cls, **entries: complex) -> CumulantState:
        """Build a state from named entries; unnamed entries are zero."""
        values = np.zeros(N_ENTRIES, dtype=complex)
        for name, value in entries.items():
            if name not in NAMES:
                raise ConfigError(f"unknown cumulant entry: {name!r}")
            values[NAMES.index(name)] = value
        return cls(values)

    def __getitem__(self, name: str) -> complex | np.ndarray:
        return self.values[..., NAMES.index(name)]

    @property
    def s2(self) -> complex | np.ndarray:
        return self.values[..., S2]

    def as_dict(self) -> dict[str, complex]:
        return {name: complex(self.values[i]) for i, name in enumerate(NAMES)}

    def hermiticity_error(self) -> float:
        return hermiticity_error(self.values)


def hermiticity_error(y: np.ndarray) -> float:
    """Largest violation of the conjugate-pair and real-diagonal relations."""
    y = np.asarray(y)
    err = 0.0
    for a, b in CONJUGATE_PAIRS:
        err = max(err, float(np.max(np.abs(y[..., a] - np.conj(y[..., b])), initial=0.0)))
    for a in REAL_ENTRIES:
        err = max(err, float(np.max(np.abs(y[..., a].imag), initial=0.0)))
    return err


def _unpack(state: CumulantState | np.ndarray) -> np.ndarray:
    y = state.values if isinstance(state, CumulantState) else np.asarray(state, dtype=complex)
    if y.shape[-1:] != (N_ENTRIES,):
        raise ConfigError(f"expected trailing dimension {N_ENTRIES}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ConfigError("state contains non-finite entries")
    return y


def drift(y: np.ndarray, p, *, conditioned: bool = False) -> np.ndarray:
    """Deterministic drift of all 14 entries.

    With ``conditioned`` the second-cumulant equations carry the −κ₂ product
    terms of homodyne conditioning on both analyzer quadratures.
    """
    s1, s2, s1d, s2d = y[..., S1], y[..., S2], y[..., S1D], y[..., S2D]
    c11, c12, c22 = y[..., C11], y[..., C12], y[..., C22]
    cd11, cd12, cd21, cd22 = y[..., CD11], y[..., CD12], y[..., CD21], y[..., CD22]
    cdd11, cdd12, cdd22 = y[..., CDD11], y[..., CDD12], y[..., CDD22]

    G, k1, k2, lam = p.gamma, p.kappa1, p.kappa2, p.lam
    d1, d2 = p.delta1, p.delta2
    g1p = p.g1 * np.exp(1j * p.phi1)
    g1m = p.g1 * np.exp(-1j * p.phi1)
    g2p = p.g2 * np.exp(1j * p.phi2)
    g2m = p.g2 * np.exp(-1j * p.phi2)
    drive = np.sqrt(k2) * p.eta_d2 * np.exp(1j * p.phi_d2)
    drive_c = np.sqrt(k2) * p.eta_d2 * np.exp(-1j * p.phi_d2)
    k12 = (k1 + k2) / 2

    s2sq, s2dsq, n2 = s2 * s2, s2d * s2d, s2 * s2d

    out = np.empty_like(y)
    out[..., S1] = (-(G + k1) / 2 + 1j * d1) * s1 - 1j * g1p * s1d
    out[..., S2] = (
        -G * s1 + (1j * d2 - (k2 + G) / 2) * s2
        + 1j * lam * (2 * cd22 * s2 + s2d * (s2sq + c22))
        - 1j * g2p * s2d - drive
    )
    out[..., S1D] = (-(G + k1) / 2 - 1j * d1) * s1d + 1j * g1m * s1
    out[..., S2D] = (
        -G * s1d + (-1j * d2 - (k2 + G) / 2) * s2d
        - 1j * lam * (2 * cd22 * s2d + s2 * (s2dsq + cdd22))
        + 1j * g2m * s2 - drive_c
    )

    out[..., C11] = (-G - k1 + 2j * d1) * c11 - 1j * g1p * (1 + 2 * cd11)
    out[..., C12] = (
        -G * c11 + (-G - k12 + 1j * (d1 + d2)) * c12
        + 1j * lam * (cd21 * c22 + 2 * c12 * cd22 + cd21 * s2sq + 2 * c12 * n2)
        - 1j * g1p * cd12 - 1j * g2p * cd21
    )
    out[..., C22] = (
        -2 * G * c12 + (-G - k2 + 2j * d2) * c22
        + 1j * lam * (c22 + 6 * c22 * cd22 + s2sq + 2 * cd22 * s2sq + 4 * c22 * n2)
        - 1j * g2p * (1 + 2 * cd22)
    )
    out[..., CD11] = (-G - k1) * cd11 - 1j * g1p * cdd11 + 1j * g1m * c11
    out[..., CD12] = (
        -G * cd11 + (-G - k12 + 1j * (d2 - d1)) * cd12
        + 1j * lam * (2 * cd12 * cd22 + cdd12 * c22 + cdd12 * s2sq + 2 * cd12 * n2)
        + 1j * g1m * c12 - 1j * g2p * cdd12
    )
    out[..., CD21] = (
        -G * cd11 + (-G - k12 + 1j * (d1 - d2)) * cd21
        - 1j * lam * (2 * cd21 * cd22 + c12 * cdd22 + 2 * cd21 * n2 + c12 * s2dsq)
        + 1j * g2m * c12 - 1j * g1p * cdd12
    )
    out[..., CD22] = (
        -G * (cd12 + cd21) + (-G - k2) * cd22
        + 1j * lam * (cdd22 * s2sq - c22 * s2dsq)
        - 1j * g2p * cdd22 + 1j * g2m * c22
    )
    out[..., CDD11] = (-G - k1 - 2j * d1) * cdd11 + 1j * g1m * (1 + 2 * cd11)
    out[..., CDD12] = (
        -G * cdd11 + (-G - k12 - 1j * (d1 + d2)) * cdd12
        - 1j * lam * (cd12 * cdd22 + 2 * cdd12 * cd22 + cd12 * s2dsq + 2 * cdd12 * n2)
        + 1j * g1m * cd21 + 1j * g2m * cd12
    )
    out[..., CDD22] = (
        -2 * G * cdd12 + (-G - k2 - 2j * d2) * cdd22
        - 1j * lam * (cdd22 + 6 * cdd22 * cd22 + s2dsq + 2 * cd22 * s2dsq + 4 * cdd22 * n2)
        + 1j * g2m * (1 + 2 * cd22)
    )

    if conditioned:
        out[..., C11] -= 2 * k2 * c12 * cd21
        out[..., C12] -= k2 * (c12 * cd22 + c22 * cd21)
        out[..., C22] -= 2 * k2 * c22 * cd22
        out[..., CD11] -= k2 * (cd12 * cd21 + c12 * cdd12)
        out[..., CD12] -= k2 * (cd12 * cd22 + cdd12 * c22)
        out[..., CD21] -= k2 * (cd21 * cd22 + c12 * cdd22)
        out[..., CD22] -= k2 * (cd22 * cd22 + c22 * cdd22)
        out[..., CDD11] -= 2 * k2 * cd12 * cdd12
        out[..., CDD12] -= k2 * (cdd12 * cd22 + cd12 * cdd22)
        out[..., CDD22] -= 2 * k2 * cd22 * cdd22
    return out


def diffusion(y: np.ndarray, p, dW_I, dW_Q) -> np.ndarray:
    """Measurement backaction on the four means; zero for the cumulants."""
    r = np.sqrt(p.kappa2 / 2)
    dW_I = np.asarray(dW_I)
    dW_Q = np.asarray(dW_Q)
    out = np.zeros_like(y)
    # partner cumulants (⟨a s2⟩, ⟨s2† a⟩) for a = s1, s2, s1†, s2†
    for mean, with_s2, with_s2d in (
        (S1, C12, CD21),
        (S2, C22, CD22),
        (S1D, CD12, CDD12),
        (S2D, CD22, CDD22),
    ):
        a, b = y[..., with_s2], y[..., with_s2d]
        out[..., mean] = r * ((a + b) * dW_I - 1j * (a - b) * dW_Q)
    return out


def teom_rhs(state: CumulantState | np.ndarray, p) -> CumulantState | np.ndarray:
    """Unconditional time derivative of the 14 cumulants."""
    y = _unpack(state)
    out = drift(y, p)
    return CumulantState(out) if isinstance(state, CumulantState) else out


def steom_rhs(
    state: CumulantState | np.ndarray, p, dW_I, dW_Q, dt: float
) -> CumulantState | np.ndarray:
    """Conditional increment: drift·dt plus the homodyne diffusion on the means."""
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt!r}")
    y = _unpack(state)
    out = drift(y, p, conditioned=True) * dt + diffusion(y, p, dW_I, dW_Q)
    return CumulantState(out) if isinstance(state, CumulantState) else out
