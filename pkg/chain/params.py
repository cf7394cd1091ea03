"""Parameter models for the two-mode stiff-pump chain.

All rates are in units of κ₂ and all times in 1/κ₂. The models are frozen
pydantic objects so they can be shared read-only between workers and echoed
verbatim into output files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from chain.errors import ConfigError

CLASS_LABELS = (1, 2)


class ChainParams(BaseModel):
    """Physical parameters of squeezer, nonreciprocal coupler, analyzer and detector."""

    model_config = ConfigDict(
        extra="forbid", frozen=True, allow_inf_nan=False, populate_by_name=True
    )

    delta1: float = 0.0
    delta2: float = 0.0
    g1: float = Field(0.0, ge=0)
    phi1: float = 0.0
    g2: float = Field(0.0, ge=0)
    phi2: float = 0.0
    lam: float = Field(0.01, ge=0, alias="lambda")
    kappa1: float = Field(0.0, ge=0)
    kappa2: float = Field(1.0, ge=0)
    gamma: float = Field(1.0, ge=0)
    eta_d2: float = Field(0.0, ge=0)
    phi_d2: float = 0.0
    n_cl: float = Field(0.0, ge=0)

    def replace(self, **changes: float) -> ChainParams:
        """Validated copy with some fields changed."""
        return ChainParams.model_validate({**self.model_dump(), **changes})

    @classmethod
    def field_names(cls) -> set[str]:
        names = set(cls.model_fields)
        names.update(f.alias for f in cls.model_fields.values() if f.alias)
        return names

    @classmethod
    def canonical_name(cls, name: str) -> str:
        for field, info in cls.model_fields.items():
            if name in (field, info.alias):
                return field
        raise ConfigError(f"unknown ChainParams field: {name!r}")


class SimControls(BaseModel):
    """Integration and sampling controls."""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    dt: float = Field(1e-3, gt=0)
    t_settle: float = Field(10.0, ge=0)
    t_filter: float = Field(800.0, gt=0)
    n_traj: int = Field(100, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    steady_tol: float = Field(1e-10, gt=0)
    steady_dt: float = Field(0.05, gt=0)
    polish_tol: float = Field(1e-6, gt=0)
    t_max_steady: float = Field(5000.0, gt=0)
    chunk_steps: int = Field(4096, ge=1)

    @model_validator(mode="after")
    def _window_resolution(self) -> SimControls:
        if self.dt > self.t_filter / 100:
            raise ValueError(f"dt={self.dt} must not exceed t_filter/100={self.t_filter / 100}")
        return self

    @property
    def n_filter(self) -> int:
        return int(round(self.t_filter / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round((self.t_settle + self.t_filter) / self.dt))


class Encoding(BaseModel):
    """How the two input classes differ.

    ``phase``: squeezer pump phase φ₁ = 0 (class 1) or π (class 2).
    ``dispersive``: squeezer detuning Δ₁ = +χ (class 1) or −χ (class 2).
    """

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    kind: Literal["phase", "dispersive"] = "phase"
    chi: float = 0.0

    def apply(self, p: ChainParams, class_label: int) -> ChainParams:
        check_label(class_label)
        if self.kind == "phase":
            return p.replace(phi1=0.0 if class_label == 1 else math.pi)
        return p.replace(delta1=self.chi if class_label == 1 else -self.chi)


PHASE = Encoding()


def check_label(class_label: int) -> None:
    if class_label not in CLASS_LABELS:
        raise ConfigError(f"class_label must be 1 or 2, got {class_label!r}")


@dataclass(frozen=True)
class ParamArrays:
    """Column view of many ChainParams; quacks like ChainParams for the RHS kernels."""

    delta1: np.ndarray
    delta2: np.ndarray
    g1: np.ndarray
    phi1: np.ndarray
    g2: np.ndarray
    phi2: np.ndarray
    lam: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    gamma: np.ndarray
    eta_d2: np.ndarray
    phi_d2: np.ndarray
    n_cl: np.ndarray

    @classmethod
    def stack(cls, params: Sequence[ChainParams]) -> ParamArrays:
        return cls(
            **{
                name: np.array([getattr(p, name) for p in params], dtype=float)
                for name in ChainParams.model_fields
            }
        )

    def take(self, idx: np.ndarray) -> ParamArrays:
        return ParamArrays(
            **{name: getattr(self, name)[idx] for name in ChainParams.model_fields}
        )

    def __len__(self) -> int:
        return len(self.g1)
