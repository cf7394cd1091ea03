"""Experiment configuration: one YAML file per run, validated by pydantic.

Sections mirror the type names (``chain``, ``controls``, ``task``, ``sweep``,
``noise``, ``readout``, ``snail``, ``output``). Unknown keys are errors so a
misspelt physics parameter never silently falls back to a default.

Units: rates in κ₂, times in 1/κ₂. ``eta_d2`` is the dimensionless drive
amplitude that enters the analyzer equation as √κ₂·η_{d,2}.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from chain.errors import ConfigError
from chain.params import PHASE, ChainParams, Encoding, SimControls

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

Scenario = Literal[
    "classify", "sweep2d", "noise_study", "readout_map", "linear_analysis", "convert_params"
]
Emit = Literal["csv", "json"]

# Readout maps sweep the squeezer phase against the dispersive shift
READOUT_AXES = ("phi1", "chi")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


class Axis(_Section):
    param: str
    min: float
    max: float
    steps: int = Field(41, ge=2)

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.steps)


class TaskConfig(_Section):
    encoding: Encoding = PHASE
    # None keeps chain.g1 as given
    g1_frac: float | None = Field(0.8, gt=0, lt=1)
    compare_linear: bool = False
    held_out: bool = False


class SweepConfig(_Section):
    axis1: Axis
    axis2: Axis
    spot_checks: list[tuple[int, int]] = []


class NoiseConfig(_Section):
    n_cl: list[float] = [0.0, 1.0, 4.0, 16.0]
    axis: Axis = Axis(param="phi2", min=-math.pi, max=math.pi, steps=41)

    @field_validator("n_cl")
    @classmethod
    def _non_negative(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("n_cl list must not be empty")
        if any(x < 0 for x in v):
            raise ValueError(f"n_cl values must be non-negative, got {v}")
        return sorted(v)


class ReadoutConfig(_Section):
    chi: float = Field(0.2, ge=0)
    g_frac: float = Field(0.9, gt=0, lt=1)
    phi2: float = math.pi / 2
    eta_d2: float = Field(1.0, ge=0)
    axis1: Axis = Axis(param="phi1", min=-math.pi, max=math.pi, steps=41)
    axis2: Axis = Axis(param="chi", min=0.0, max=0.5, steps=41)
    spot_checks: list[tuple[int, int]] = []
    spot_t_filter: float = Field(4000.0, gt=0)
    spot_traj: int = Field(100, ge=2)

    @property
    def phi_d2(self) -> float:
        return -math.pi / 4 + self.phi2 / 2

    @model_validator(mode="after")
    def _axes(self) -> ReadoutConfig:
        if (self.axis1.param, self.axis2.param) != READOUT_AXES:
            raise ValueError(f"readout axes must be {READOUT_AXES}")
        if self.axis2.min < 0:
            raise ValueError("chi axis must be non-negative")
        return self


class SnailConfig(_Section):
    g3: float
    # None derives g4 = −Λ/12 from the chain
    g4: float | None = None
    omega_s: float
    kappa_s: float = Field(gt=0)


class OutputConfig(_Section):
    directory: str = "out"
    emit: list[Emit] = ["csv", "json"]


class ExperimentConfig(_Section):
    scenario: Scenario = "classify"
    chain: ChainParams = ChainParams()
    controls: SimControls = SimControls()
    task: TaskConfig = TaskConfig()
    sweep: SweepConfig | None = None
    noise: NoiseConfig = NoiseConfig()
    readout: ReadoutConfig = ReadoutConfig()
    snail: SnailConfig | None = None
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _scenario_sections(self) -> ExperimentConfig:
        names = ChainParams.field_names()
        if self.sweep is not None:
            for axis in (self.sweep.axis1, self.sweep.axis2):
                if axis.param not in names:
                    raise ValueError(f"sweep parameter {axis.param!r} is not a ChainParams field")
            _check_spots(self.sweep.spot_checks, self.sweep.axis1, self.sweep.axis2)
        if self.noise.axis.param not in names:
            raise ValueError(f"noise axis {self.noise.axis.param!r} is not a ChainParams field")
        _check_spots(self.readout.spot_checks, self.readout.axis1, self.readout.axis2)
        if self.scenario == "sweep2d" and self.sweep is None:
            raise ValueError("scenario sweep2d needs a sweep section")
        if self.scenario == "convert_params" and self.snail is None:
            raise ValueError("scenario convert_params needs a snail section")
        return self

    def resolved(self) -> dict:
        """The full config, defaults included, as JSON-ready data."""
        return self.model_dump(mode="json", by_alias=True)


def _check_spots(spots: list[tuple[int, int]], axis1: Axis, axis2: Axis) -> None:
    for i, j in spots:
        if not (0 <= i < axis1.steps and 0 <= j < axis2.steps):
            raise ValueError(f"spot check ({i}, {j}) is outside the {axis1.steps}×{axis2.steps} grid")


def load_config(path: Path | str) -> ExperimentConfig:
    """Parse and validate a YAML config; YAML syntax errors become ConfigError."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return ExperimentConfig.model_validate(raw)


def with_overrides(
    cfg: ExperimentConfig,
    *,
    scenario: str | None = None,
    seed: int | None = None,
    n_traj: int | None = None,
    directory: str | None = None,
    emit: list[str] | None = None,
) -> ExperimentConfig:
    """Re-validated copy of ``cfg`` with command-line overrides applied."""
    data = cfg.resolved()
    if scenario is not None:
        data["scenario"] = scenario
    if seed is not None:
        data["controls"]["seed"] = seed
    if n_traj is not None:
        data["controls"]["n_traj"] = n_traj
    if directory is not None:
        data["output"]["directory"] = directory
    if emit is not None:
        data["output"]["emit"] = emit
    return ExperimentConfig.model_validate(data)
