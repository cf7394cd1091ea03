"""Pydantic models for the JSON reports written next to the result tables."""

from __future__ import annotations

from pydantic import BaseModel


class Vector2(BaseModel):
    I: float
    Q: float


class ComplexValue(BaseModel):
    real: float
    imag: float


class ClassifyMetrics(BaseModel):
    delta_mu: Vector2
    delta_mu_norm: float
    D_F: float
    fidelity: float | None


class ClassifyReport(BaseModel):
    params: dict
    g1_threshold: float
    shots: ClassifyMetrics
    held_out_fidelity: float | None = None
    proxy: ClassifyMetrics
    linear_baseline: ClassifyMetrics | None = None


class RowArgmax(BaseModel):
    axis1: float
    argmax: float
    best: float
    interior: bool


class GridOptimum(BaseModel):
    axis1: float
    axis2: float
    value: float


class SpotCheck(BaseModel):
    axis1: float
    axis2: float
    fidelity: float
    delta_mu_norm: float
    fisher_norm: float


class SweepSummary(BaseModel):
    axis1: str
    axis2: str
    points: int
    failed: int
    optimum_delta_mu: GridOptimum | None
    optimum_fisher: GridOptimum | None
    row_argmax: list[RowArgmax]


class NoiseArgmax(BaseModel):
    n_cl: float
    argmax_fisher: float
    argmax_delta_mu: float
    gap: float


class NoiseSummary(BaseModel):
    axis: str
    points: int
    failed: int
    argmax: list[NoiseArgmax]
    gap_non_increasing: bool


class ReadoutSummary(BaseModel):
    g1: float
    g2: float
    s2_bar: ComplexValue
    multistable: bool
    points: int
    failed: int
    optimum: GridOptimum | None


class GainRow(BaseModel):
    g2: float
    g2_frac: float
    gain_db: float


class SqueezingAxisRow(BaseModel):
    phi1: float
    formula: float
    measured: float


class FilteredCovariance(BaseModel):
    class_label: int
    sigma: list[list[float]]


class LinearReport(BaseModel):
    g1_threshold: float
    g2_threshold: float
    g1: float
    squeezer_photon_number: float
    gain_table: list[GainRow]
    g2_for_20db: float
    squeezing_axes: list[SqueezingAxisRow]
    filtered_covariance: list[FilteredCovariance]
    t_filter: float


class ConversionReport(BaseModel):
    physical: dict
    effective: dict
    p_bar: ComplexValue
    implied_delta2: float
