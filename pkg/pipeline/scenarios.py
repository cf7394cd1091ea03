"""Scenario runners: classify, 2-D sweeps, classical-noise study, readout map,
linear report and parameter conversion.

Each runner computes in the library (fanning grid points and trajectories out to
the worker pool), prints progress, writes its files under ``out`` and returns
its main result. Failures at a single grid point become NaN cells with a
``[warn]`` line; they never abort a sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from pydantic import ValidationError

from chain.conversion import from_effective, to_effective
from chain.cumulants import CumulantState
from chain.errors import ChainError, PerturbativeError
from chain.integrate import SteadyBatch, map_blocks, solve_steady, solve_steady_many, split_indices
from chain.linear import (
    analyzer_gain_db, build_linear_system, filtered_covariance, g2_for_gain_db,
    measured_squeezing_axis, squeezer_photon_number, squeezing_axis, threshold,
)
from chain.measure import ShotRecord, shots_for_class
from chain.metrics import ClassStats, class_stats, proxy_stats, qda_fidelity
from chain.params import CLASS_LABELS, ChainParams, Encoding, SimControls
from chain.perturbative import (
    perturbative_delta_mu, perturbative_fisher, solve_perturbative, solve_zeroth_mean, stable_roots,
)
from pipeline.config import Axis, ExperimentConfig
from pipeline.export import write_csv, write_json
from results import queries
from results.models import (
    ClassifyMetrics, ClassifyReport, ComplexValue, ConversionReport, FilteredCovariance,
    GainRow, GridOptimum, LinearReport, NoiseArgmax, NoiseSummary, ReadoutSummary, RowArgmax,
    SpotCheck, SqueezingAxisRow, SweepSummary, Vector2,
)

GRID_COLUMNS = ["axis1", "axis2", "delta_mu_norm", "fisher_norm"]
NOISE_COLUMNS = ["n_cl", "axis", "delta_mu_norm", "fisher_norm"]
PHASE_PARAMS = {"phi1", "phi2", "phi_d2"}
GAIN_FRACTIONS = np.linspace(0.0, 0.9, 10)
AXIS_PHASES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
GAP_TOL = 1e-9


def _step(n: int, title: str) -> None:
    print(f"\n── Step {n}: {title} ──")


def _warn(where: str, exc: Exception) -> None:
    print(f"  [warn] {where}: {type(exc).__name__}: {exc}")


def _task_params(cfg: ExperimentConfig) -> tuple[ChainParams, float]:
    """Chain params with g₁ set from ``task.g1_frac`` and the squeezer threshold used."""
    p = cfg.chain
    g_th = threshold(cfg.task.encoding.apply(p, 1), "squeezer")
    if cfg.task.g1_frac is not None:
        p = p.replace(g1=cfg.task.g1_frac * g_th)
    return p, g_th


def _metrics(stats: ClassStats) -> ClassifyMetrics:
    return ClassifyMetrics(
        delta_mu=Vector2(I=float(stats.delta_mu[0]), Q=float(stats.delta_mu[1])),
        delta_mu_norm=stats.delta_mu_norm,
        D_F=stats.D_F,
        fidelity=stats.fidelity,
    )


def _normalised(stats: ClassStats, t_filter: float) -> tuple[float, float]:
    return stats.delta_mu_norm / math.sqrt(t_filter), stats.D_F / t_filter


# ── Grid plumbing ──


@dataclass(frozen=True)
class _SteadyJob:
    params: list[ChainParams]
    c: SimControls


def _steady_job(job: _SteadyJob) -> SteadyBatch:
    return solve_steady_many(job.params, job.c)


def steady_grid(
    params: list[ChainParams | Exception], c: SimControls, workers: int | None = None
) -> list[CumulantState | Exception]:
    """Steady states of many points through the worker pool, in input order.

    Entries that are already exceptions (invalid parameters) pass through.
    """
    valid = [i for i, p in enumerate(params) if isinstance(p, ChainParams)]
    out: list[CumulantState | Exception] = list(params)
    if not valid:
        return out
    parts = split_indices(len(valid))
    jobs = [_SteadyJob([params[valid[k]] for k in idx], c) for idx in parts]
    for idx, batch in zip(parts, map_blocks(_steady_job, jobs, workers)):
        for j, k in enumerate(idx):
            err = batch.errors[j]
            out[valid[k]] = err if err is not None else CumulantState(batch.states[j])
    return out


def _point(p: ChainParams, changes: dict[str, float]) -> ChainParams | Exception:
    try:
        return p.replace(**{ChainParams.canonical_name(k): v for k, v in changes.items()})
    except (ValidationError, ChainError) as exc:
        return exc


def _class_points(
    p: ChainParams, enc: Encoding, changes: list[dict[str, float]]
) -> list[ChainParams | Exception]:
    """Two entries per point, class 1 then class 2."""
    out: list[ChainParams | Exception] = []
    for ch in changes:
        base = _point(p, ch)
        for k in CLASS_LABELS:
            if isinstance(base, Exception):
                out.append(base)
                continue
            try:
                out.append(enc.apply(base, k))
            except (ValidationError, ChainError) as exc:
                out.append(exc)
    return out


def _proxy_cell(
    s1: CumulantState | Exception, s2: CumulantState | Exception, t_filter: float, n_cl: float
) -> tuple[float, float]:
    for s in (s1, s2):
        if isinstance(s, Exception):
            raise s
    return _normalised(proxy_stats(s1, s2, t_filter, n_cl), t_filter)


def _grid_changes(a1: Axis, a2: Axis) -> list[tuple[int, int, float, float]]:
    """Row-major grid: axis1 outer, axis2 inner."""
    return [
        (i, j, float(x), float(y))
        for i, x in enumerate(a1.values())
        for j, y in enumerate(a2.values())
    ]


def _spot_checks(
    spots: list[tuple[int, int]],
    grid: list[tuple[int, int, float, float]],
    steps2: int,
    point: Callable[[float, float], tuple[ChainParams, Encoding]],
    c: SimControls,
    workers: int | None,
) -> pd.DataFrame:
    rows = []
    for i, j in spots:
        _, _, x, y = grid[i * steps2 + j]
        print(f"  [spot] ({i}, {j}) axis1={x:.6g} axis2={y:.6g}")
        try:
            p, enc = point(x, y)
            shots = {k: shots_for_class(p, c, k, encoding=enc, workers=workers) for k in CLASS_LABELS}
            st = class_stats(shots[1], shots[2])
            dmu, df = _normalised(st, c.t_filter)
            rows.append(SpotCheck(axis1=x, axis2=y, fidelity=st.fidelity, delta_mu_norm=dmu, fisher_norm=df))
            print(f"  [spot] fidelity {st.fidelity:.3f}")
        except (ValidationError, ChainError) as exc:
            _warn(f"spot check ({i}, {j})", exc)
            rows.append(SpotCheck(axis1=x, axis2=y, fidelity=math.nan, delta_mu_norm=math.nan, fisher_norm=math.nan))
    return pd.DataFrame([r.model_dump() for r in rows], columns=list(SpotCheck.model_fields))


def _optimum(row: dict | None) -> GridOptimum | None:
    return GridOptimum(**row) if row else None


# ── Scenarios ──


def _shot_frame(shots: dict[int, list[ShotRecord]]) -> pd.DataFrame:
    records = [s for k in CLASS_LABELS for s in shots[k]]
    return pd.DataFrame({
        "class": [s.class_label for s in records],
        "I": [s.I for s in records],
        "Q": [s.Q for s in records],
        "seed": pd.Series([s.seed for s in records], dtype="uint64"),
    })


def run_classify(cfg: ExperimentConfig, out: Path, workers: int | None = None) -> ClassStats:
    """Binary squeezed-state task: shots per class, QDA fidelity, D_F and Δμ."""
    c, enc = cfg.controls, cfg.task.encoding
    p, g_th = _task_params(cfg)

    _step(1, "Steady states")
    inits = {}
    for k in CLASS_LABELS:
        inits[k] = solve_steady(enc.apply(p, k), c)
        print(f"  [steady] class {k}: ⟨s₂⟩ = {inits[k].s2:.6g}")
    proxy = proxy_stats(inits[1], inits[2], c.t_filter, p.n_cl)

    _step(2, "Trajectories")
    shots = {}
    for k in CLASS_LABELS:
        shots[k] = shots_for_class(p, c, k, encoding=enc, init=inits[k], workers=workers)
        print(f"  [traj] class {k}: {len(shots[k])} shots over 𝒯 = {c.t_filter:g}")
    stats = class_stats(shots[1], shots[2])
    held = qda_fidelity(shots[1], shots[2], held_out=True) if cfg.task.held_out else None
    print(f"  [done] fidelity {stats.fidelity:.3f}, D_F {stats.D_F:.4g}")

    baseline = None
    if cfg.task.compare_linear:
        _step(3, "Linear baseline (η_d2 = 0)")
        lin = p.replace(eta_d2=0.0)
        lin_shots = {k: shots_for_class(lin, c, k, encoding=enc, workers=workers) for k in CLASS_LABELS}
        baseline = class_stats(lin_shots[1], lin_shots[2])
        print(f"  [done] linear fidelity {baseline.fidelity:.3f}")

    _step(4 if cfg.task.compare_linear else 3, "Write")
    write_csv(_shot_frame(shots), out / "shots.csv", cfg)
    report = ClassifyReport(
        params=p.model_dump(by_alias=True),
        g1_threshold=g_th,
        shots=_metrics(stats),
        held_out_fidelity=held,
        proxy=_metrics(proxy),
        linear_baseline=_metrics(baseline) if baseline is not None else None,
    )
    write_json(report, out / "metrics.json", cfg)
    return stats


def run_sweep2d(cfg: ExperimentConfig, out: Path, workers: int | None = None) -> pd.DataFrame:
    """TEOM proxy metrics over a 2-D grid of chain parameters."""
    sweep, c, enc = cfg.sweep, cfg.controls, cfg.task.encoding
    p, _ = _task_params(cfg)
    a1, a2 = sweep.axis1, sweep.axis2
    grid = _grid_changes(a1, a2)

    _step(1, f"Steady states ({a1.param} × {a2.param}, {len(grid)} points)")
    points = _class_points(p, enc, [{a1.param: x, a2.param: y} for _, _, x, y in grid])
    states = steady_grid(points, c, workers)

    _step(2, "Grid metrics")
    rows = []
    for n, (i, j, x, y) in enumerate(grid):
        try:
            dmu, df = _proxy_cell(states[2 * n], states[2 * n + 1], c.t_filter, p.n_cl)
        except (ValidationError, ChainError) as exc:
            _warn(f"point ({i}, {j})", exc)
            dmu, df = math.nan, math.nan
        rows.append((x, y, dmu, df))
    frame = pd.DataFrame(rows, columns=GRID_COLUMNS)
    failed = queries.count_failed(frame)
    print(f"  [grid] {len(frame) - failed}/{len(frame)} points ok")

    row_best = queries.row_argmax(frame, "delta_mu_norm")

    def spot_point(x: float, y: float) -> tuple[ChainParams, Encoding]:
        pt = _point(p, {a1.param: x, a2.param: y})
        if isinstance(pt, Exception):
            raise pt
        return pt, enc

    spots = None
    if sweep.spot_checks:
        _step(3, "Spot checks")
        spots = _spot_checks(sweep.spot_checks, grid, a2.steps, spot_point, c, workers)

    _step(4 if spots is not None else 3, "Write")
    write_csv(frame, out / "grid.csv", cfg)
    write_csv(pd.DataFrame(row_best, columns=["axis1", "argmax", "best", "interior"]), out / "row_argmax.csv", cfg)
    if spots is not None:
        write_csv(spots, out / "spot_checks.csv", cfg)
    summary = SweepSummary(
        axis1=a1.param,
        axis2=a2.param,
        points=len(frame),
        failed=failed,
        optimum_delta_mu=_optimum(queries.grid_optimum(frame, "delta_mu_norm")),
        optimum_fisher=_optimum(queries.grid_optimum(frame, "fisher_norm")),
        row_argmax=[RowArgmax(**r) for r in row_best],
    )
    write_json(summary, out / "summary.json", cfg)
    return frame


def _gap_non_increasing(argmax: list[dict]) -> bool:
    gaps = [r["gap"] for r in argmax]
    return all(b <= a + GAP_TOL for a, b in zip(gaps, gaps[1:]))


def run_noise_study(cfg: ExperimentConfig, out: Path, workers: int | None = None) -> pd.DataFrame:
    """Proxy metrics along one axis for each classical-noise level n̄_cl."""
    noise, c, enc = cfg.noise, cfg.controls, cfg.task.encoding
    p, _ = _task_params(cfg)
    axis = noise.axis
    xs = [float(x) for x in axis.values()]

    _step(1, f"Steady states ({axis.param}, {len(xs)} points)")
    states = steady_grid(_class_points(p, enc, [{axis.param: x} for x in xs]), c, workers)

    _step(2, f"Noise levels {noise.n_cl}")
    rows = []
    for n_cl in noise.n_cl:
        for k, x in enumerate(xs):
            try:
                dmu, df = _proxy_cell(states[2 * k], states[2 * k + 1], c.t_filter, n_cl)
            except (ValidationError, ChainError) as exc:
                _warn(f"n_cl={n_cl:g} point {k}", exc)
                dmu, df = math.nan, math.nan
            rows.append((n_cl, x, dmu, df))
    frame = pd.DataFrame(rows, columns=NOISE_COLUMNS)
    periodic = ChainParams.canonical_name(axis.param) in PHASE_PARAMS
    argmax = queries.noise_argmax(frame, periodic=periodic)
    for r in argmax:
        print(
            f"  [noise] n_cl={r['n_cl']:g}: argmax D_F at {r['argmax_fisher']:.4f}, "
            f"argmax ‖Δμ‖ at {r['argmax_delta_mu']:.4f}"
        )
    if not queries.fisher_monotone_in_noise(frame):
        print("  [warn] D_F increases with n_cl somewhere along the axis")

    _step(3, "Write")
    write_csv(frame, out / "noise.csv", cfg)
    write_csv(pd.DataFrame(argmax, columns=list(NoiseArgmax.model_fields)), out / "noise_argmax.csv", cfg)
    summary = NoiseSummary(
        axis=axis.param,
        points=len(xs),
        failed=queries.count_failed(frame),
        argmax=[NoiseArgmax(**r) for r in argmax],
        gap_non_increasing=_gap_non_increasing(argmax),
    )
    write_json(summary, out / "summary.json", cfg)
    return frame


@dataclass(frozen=True)
class _ReadoutJob:
    base: ChainParams
    s2_bar: complex
    multistable: bool
    t_filter: float
    cells: list[tuple[int, int, float, float]]


def _readout_cell(job: _ReadoutJob, phi1: float, chi: float) -> tuple[float, float]:
    sol = solve_perturbative(
        job.base.replace(phi1=phi1),
        Encoding(kind="dispersive", chi=chi),
        s2_bar=job.s2_bar,
        multistable=job.multistable,
    )
    dmu = perturbative_delta_mu(sol, job.t_filter)
    try:
        D = perturbative_fisher(sol, job.t_filter)
    except PerturbativeError as exc:
        # Δμ stays usable when only V is indefinite
        _warn(f"D_F at φ₁={phi1:.4g} χ={chi:.4g}", exc)
        D = math.nan
    return float(np.linalg.norm(dmu)) / math.sqrt(job.t_filter), D / job.t_filter


def _readout_job(job: _ReadoutJob) -> list[tuple[float, float, float, float]]:
    rows = []
    for i, j, x, y in job.cells:
        try:
            dmu, df = _readout_cell(job, x, y)
        except (ValidationError, ChainError) as exc:
            _warn(f"point ({i}, {j})", exc)
            dmu, df = math.nan, math.nan
        rows.append((x, y, dmu, df))
    return rows


def readout_base(cfg: ExperimentConfig) -> ChainParams:
    """Chain with both pumps at ``g_frac`` of threshold and the readout drive settings."""
    r = cfg.readout
    base = cfg.chain.replace(delta1=0.0, phi2=r.phi2, phi_d2=r.phi_d2, eta_d2=r.eta_d2)
    return base.replace(
        g1=r.g_frac * threshold(base, "squeezer"),
        g2=r.g_frac * threshold(base, "analyzer"),
    )


def run_readout_map(cfg: ExperimentConfig, out: Path, workers: int | None = None) -> pd.DataFrame:
    """Perturbative D_F and ‖Δμ‖ over (φ₁, χ) for the dispersive encoding Δ₁ = ±χ."""
    r, c = cfg.readout, cfg.controls
    base = readout_base(cfg)
    grid = _grid_changes(r.axis1, r.axis2)

    _step(1, "Zeroth-order analyzer mean")
    s2_bar = solve_zeroth_mean(base)
    multistable = len(stable_roots(base, reference=s2_bar)) > 1
    print(f"  [mean] g1={base.g1:.6g} g2={base.g2:.6g} s̄ = {s2_bar:.6g}")
    if multistable:
        print("  [warn] analyzer mean equation has more than one stable root")

    _step(2, f"Perturbative grid ({len(grid)} points)")
    parts = split_indices(len(grid))
    jobs = [_ReadoutJob(base, s2_bar, multistable, c.t_filter, [grid[k] for k in idx]) for idx in parts]
    rows = [row for part in map_blocks(_readout_job, jobs, workers) for row in part]
    frame = pd.DataFrame(rows, columns=GRID_COLUMNS)
    failed = queries.count_failed(frame)
    optimum = queries.grid_optimum(frame, "fisher_norm")
    print(f"  [grid] {len(frame) - failed}/{len(frame)} points ok")
    if optimum:
        print(f"  [grid] optimum φ₁={optimum['axis1']:.4f} χ={optimum['axis2']:.4f}")

    spots = None
    if r.spot_checks:
        _step(3, "Full-chain spot checks")
        spot_c = SimControls.model_validate(
            {**c.model_dump(), "t_filter": r.spot_t_filter, "n_traj": r.spot_traj}
        )

        def spot_point(x: float, y: float) -> tuple[ChainParams, Encoding]:
            return base.replace(phi1=x), Encoding(kind="dispersive", chi=y)

        spots = _spot_checks(r.spot_checks, grid, r.axis2.steps, spot_point, spot_c, workers)

    _step(4 if spots is not None else 3, "Write")
    write_csv(frame, out / "readout_map.csv", cfg)
    if spots is not None:
        write_csv(spots, out / "spot_checks.csv", cfg)
    summary = ReadoutSummary(
        g1=base.g1,
        g2=base.g2,
        s2_bar=ComplexValue(real=s2_bar.real, imag=s2_bar.imag),
        multistable=multistable,
        points=len(frame),
        failed=failed,
        optimum=_optimum(optimum),
    )
    write_json(summary, out / "summary.json", cfg)
    return frame


def run_linear_analysis(cfg: ExperimentConfig, out: Path, workers: int | None = None) -> LinearReport:
    """Thresholds, analyzer gain table, squeezing axes and filtered covariances at Λ = 0."""
    c, enc = cfg.controls, cfg.task.encoding
    p, g1_th = _task_params(cfg)

    _step(1, "Thresholds and gain")
    g2_th = threshold(p, "analyzer")
    g_lim = min(g2_th, (p.kappa2 + p.gamma) / 2)
    gain = [
        GainRow(g2=f * g_lim, g2_frac=f * g_lim / g2_th, gain_db=analyzer_gain_db(p.replace(g2=f * g_lim)))
        for f in GAIN_FRACTIONS
    ]
    g20 = g2_for_gain_db(p, 20.0)
    gain.append(GainRow(g2=g20, g2_frac=g20 / g2_th, gain_db=analyzer_gain_db(p.replace(g2=g20))))
    print(f"  [linear] g1_th={g1_th:.6g} g2_th={g2_th:.6g} g2(20 dB)={g20:.6g}")

    _step(2, "Squeezing axes")
    axes = []
    for phi1 in AXIS_PHASES:
        sys = build_linear_system(p.replace(phi1=phi1, g2=0.0, eta_d2=0.0))
        axes.append(SqueezingAxisRow(
            phi1=phi1, formula=squeezing_axis(phi1), measured=measured_squeezing_axis(sys, c.t_filter)
        ))
        print(f"  [axis] φ₁={phi1:.4f}: formula {axes[-1].formula:.4f}, measured {axes[-1].measured:.4f}")

    _step(3, "Filtered covariance")
    covs = []
    for k in CLASS_LABELS:
        sigma = filtered_covariance(build_linear_system(enc.apply(p, k)), c.t_filter, p.n_cl)
        covs.append(FilteredCovariance(class_label=k, sigma=sigma.tolist()))

    report = LinearReport(
        g1_threshold=g1_th,
        g2_threshold=g2_th,
        g1=p.g1,
        squeezer_photon_number=squeezer_photon_number(enc.apply(p, 1)),
        gain_table=gain,
        g2_for_20db=g20,
        squeezing_axes=axes,
        filtered_covariance=covs,
        t_filter=c.t_filter,
    )
    _step(4, "Write")
    write_json(report, out / "linear_report.json", cfg)
    return report


def run_convert_params(cfg: ExperimentConfig, out: Path, workers: int | None = None) -> ConversionReport:
    """Physical SNAIL pump and drive realising the configured analyzer, and back."""
    s, p = cfg.snail, cfg.chain
    g4 = s.g4 if s.g4 is not None else -p.lam / 12

    _step(1, "Convert")
    phys = from_effective(p, s.g3, g4, s.omega_s, s.kappa_s)
    eff = to_effective(phys)
    pb = phys.p_bar
    print(f"  [convert] ε_p={phys.eps_p:.6g} φ_p={phys.phi_p:.6g} P̄={pb:.6g}")
    report = ConversionReport(
        physical=phys.model_dump(),
        effective=eff.model_dump(),
        p_bar=ComplexValue(real=pb.real, imag=pb.imag),
        implied_delta2=eff.delta2,
    )
    _step(2, "Write")
    write_json(report, out / "conversion.json", cfg)
    return report


SCENARIOS: dict[str, Callable[..., object]] = {
    "classify": run_classify,
    "sweep2d": run_sweep2d,
    "noise_study": run_noise_study,
    "readout_map": run_readout_map,
    "linear_analysis": run_linear_analysis,
    "convert_params": run_convert_params,
}


def run_scenario(cfg: ExperimentConfig, out: Path | None = None, workers: int | None = None) -> object:
    out = Path(cfg.output.directory) if out is None else out
    return SCENARIOS[cfg.scenario](cfg, out, workers)
