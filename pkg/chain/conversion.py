"""Physical SNAIL parameters ↔ effective stiff-pump analyzer parameters.

The pump mode is replaced by its classical steady amplitude P̄. Three-wave
mixing with P̄ gives the effective squeezing term g₂e^{iφ₂} = 6g₃P̄. Four-wave
mixing gives the Kerr term Λ = −12g₄ and the cross-Kerr detuning
Δ₂ = −24g₄(1 + |P̄|²). A positive Λ therefore requires g₄ ≤ 0.
"""

from __future__ import annotations

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from chain.errors import ConversionError
from chain.params import ChainParams


class PhysicalSnailParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    omega_s: float
    omega_p: float
    g3: float
    g4: float
    kappa_s: float = Field(gt=0)
    eps_p: float = Field(0.0, ge=0)
    phi_p: float = 0.0
    eta_sig: float = Field(0.0, ge=0)
    phi_sig: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _default_pump_frequency(cls, data):
        if isinstance(data, dict) and data.get("omega_p") is None and "omega_s" in data:
            data = {**data, "omega_p": 2 * data["omega_s"]}
        return data

    @model_validator(mode="after")
    def _degenerate_pump(self) -> PhysicalSnailParams:
        if not math.isclose(self.omega_p, 2 * self.omega_s, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"omega_p={self.omega_p} must equal 2·omega_s={2 * self.omega_s}")
        return self

    @property
    def pump_susceptibility(self) -> complex:
        """χ_p with χ_p⁻¹ = −iω_s + κ_s/2."""
        return 1 / (-1j * self.omega_s + self.kappa_s / 2)

    @property
    def p_bar(self) -> complex:
        return (
            1j * math.sqrt(self.kappa_s) * self.eps_p * np.exp(-1j * self.phi_p)
            / (1j * self.omega_s - self.kappa_s / 2)
        )


class EffectiveParams(BaseModel):
    """Analyzer-side ChainParams fields implied by a physical SNAIL operating point."""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    delta2: float
    lam: float
    eta_d2: float
    phi_d2: float
    g2: float
    phi2: float

    def apply(self, p: ChainParams) -> ChainParams:
        return p.replace(**self.model_dump())


def to_effective(phys: PhysicalSnailParams) -> EffectiveParams:
    if phys.g4 > 0:
        raise ConversionError(f"g4={phys.g4} > 0 gives a negative Kerr strength Λ = −12g₄")
    p_bar = phys.p_bar
    pump = 6 * phys.g3 * p_bar
    return EffectiveParams(
        delta2=-24 * phys.g4 * (1 + abs(p_bar) ** 2),
        lam=-12 * phys.g4,
        eta_d2=phys.eta_sig,
        phi_d2=phys.phi_sig + math.pi / 2,
        g2=abs(pump),
        phi2=float(np.angle(pump)),
    )


def from_effective(
    p: ChainParams, g3: float, g4: float, omega_s: float, kappa_s: float
) -> PhysicalSnailParams:
    """Physical pump (ε_p, φ_p) and signal drive realising p's analyzer pump and drive."""
    if g3 == 0:
        raise ConversionError("g3 = 0: no three-wave mixing to realise the analyzer pump")
    if kappa_s <= 0:
        raise ConversionError(f"kappa_s must be positive, got {kappa_s}")
    if not math.isclose(p.lam, -12 * g4, rel_tol=1e-12, abs_tol=1e-12):
        raise ConversionError(f"Λ={p.lam} is inconsistent with g4={g4} (expected Λ = −12g₄)")
    chi = 1 / (-1j * omega_s + kappa_s / 2)
    z = -p.g2 * np.exp(1j * p.phi2) / (6j * g3 * math.sqrt(kappa_s) * chi)
    return PhysicalSnailParams(
        omega_s=omega_s,
        g3=g3,
        g4=g4,
        kappa_s=kappa_s,
        eps_p=float(abs(z)),
        phi_p=float(-np.angle(z)),
        eta_sig=p.eta_d2,
        phi_sig=p.phi_d2 - math.pi / 2,
    )
