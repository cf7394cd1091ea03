"""Homodyne records, classical detection noise and boxcar-filtered shots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from chain.cumulants import CumulantState
from chain.errors import ConfigError
from chain.integrate import (
    TrajectoryRecord, map_blocks, noise_seed, philox, solve_steady, split_indices,
    stream_block, trajectory_seed,
)
from chain.params import PHASE, ChainParams, Encoding, SimControls, check_label


@dataclass(frozen=True)
class QuadratureTrace:
    """Demodulated I/Q record stored as per-step increments 𝓘·dt and 𝓠·dt."""

    t0: float
    dt: float
    dY_I: np.ndarray
    dY_Q: np.ndarray
    seed: int
    class_label: int = 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.dY_I))

    @property
    def i_trace(self) -> np.ndarray:
        return self.dY_I / self.dt

    @property
    def q_trace(self) -> np.ndarray:
        return self.dY_Q / self.dt

    @property
    def span(self) -> float:
        return len(self.dY_I) * self.dt


@dataclass(frozen=True)
class ShotRecord:
    I: float
    Q: float
    class_label: int
    seed: int
    t_filter: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.I) and math.isfinite(self.Q)):
            raise ConfigError(f"non-finite shot from trajectory seed {self.seed}")


def synthesize_trace(
    traj: TrajectoryRecord, p: ChainParams, noise_seed: int | np.random.Generator
) -> QuadratureTrace:
    """Record increments dY = dW + √(κ₂/2)·⟨signal⟩·dt + √n̄_cl·dW_cl.

    The Wiener increments are the ones that drove the conditional state.
    """
    if traj.dW is None:
        raise ConfigError("trajectory record carries no Wiener increments")
    signal = math.sqrt(p.kappa2 / 2) * traj.dt
    # ⟨s₂ + s₂†⟩ = 2 Re⟨s₂⟩ and −i⟨s₂ − s₂†⟩ = 2 Im⟨s₂⟩
    dY_I = traj.dW[:, 0] + signal * 2 * traj.s2.real
    dY_Q = traj.dW[:, 1] + signal * 2 * traj.s2.imag
    if p.n_cl > 0:
        rng = noise_seed if isinstance(noise_seed, np.random.Generator) else philox(noise_seed)
        cl = rng.standard_normal((len(dY_I), 2)) * math.sqrt(p.n_cl * traj.dt)
        dY_I = dY_I + cl[:, 0]
        dY_Q = dY_Q + cl[:, 1]
    return QuadratureTrace(
        t0=traj.t0, dt=traj.dt, dY_I=dY_I, dY_Q=dY_Q,
        seed=traj.seed, class_label=traj.class_label,
    )


def _window(trace_len: int, dt: float, t_filter: float) -> int:
    n_w = int(round(t_filter / dt))
    if n_w < 1:
        raise ConfigError(f"filter window {t_filter} is shorter than one step")
    if n_w > trace_len:
        raise ConfigError(f"filter window {t_filter} exceeds trace span {trace_len * dt}")
    return n_w


def boxcar_filter(trace: QuadratureTrace, t_filter: float) -> ShotRecord:
    """I = Σ dY_I / √(2𝒯) over the last 𝒯 of the trace (same for Q)."""
    n_w = _window(len(trace.dY_I), trace.dt, t_filter)
    norm = math.sqrt(2 * t_filter)
    return ShotRecord(
        I=float(np.sum(trace.dY_I[-n_w:]) / norm),
        Q=float(np.sum(trace.dY_Q[-n_w:]) / norm),
        class_label=trace.class_label,
        seed=trace.seed,
        t_filter=t_filter,
    )


@dataclass(frozen=True)
class _ShotBlock:
    p: ChainParams
    c: SimControls
    init: CumulantState
    class_label: int
    indices: np.ndarray


def _shot_block(block: _ShotBlock) -> list[ShotRecord]:
    """Stream trajectories and accumulate the filter window without keeping records."""
    c, p = block.c, block.p
    seeds = [trajectory_seed(c.seed, block.class_label, int(i)) for i in block.indices]
    noise = [philox(noise_seed(c.seed, block.class_label, int(i))) for i in block.indices]
    n_steps = c.n_steps
    n_w = _window(n_steps, c.dt, c.t_filter)
    window_start = n_steps - n_w
    acc = np.zeros((len(seeds), 2))

    for chunk in stream_block(p, c, block.init, block.indices, seeds, n_steps=n_steps):
        lo = max(window_start - chunk.start, 0)
        for j, seed in enumerate(seeds):
            piece = TrajectoryRecord(
                t0=chunk.start * c.dt, dt=c.dt, s2=chunk.s2[j], dW=chunk.dW[j],
                seed=seed, class_label=block.class_label,
            )
            trace = synthesize_trace(piece, p, noise[j])
            if lo < len(trace.dY_I):
                acc[j, 0] += np.sum(trace.dY_I[lo:])
                acc[j, 1] += np.sum(trace.dY_Q[lo:])

    norm = math.sqrt(2 * c.t_filter)
    return [
        ShotRecord(
            I=float(acc[j, 0] / norm), Q=float(acc[j, 1] / norm),
            class_label=block.class_label, seed=seed, t_filter=c.t_filter,
        )
        for j, seed in enumerate(seeds)
    ]


def shots_for_class(
    p: ChainParams,
    c: SimControls,
    class_label: int,
    *,
    encoding: Encoding = PHASE,
    init: CumulantState | None = None,
    workers: int | None = None,
) -> list[ShotRecord]:
    """Steady state → conditional trajectories → records → filtered shots for one class."""
    check_label(class_label)
    pc = encoding.apply(p, class_label)
    if init is None:
        init = solve_steady(pc, c)
    blocks = [_ShotBlock(pc, c, init, class_label, idx) for idx in split_indices(c.n_traj)]
    return [shot for part in map_blocks(_shot_block, blocks, workers) for shot in part]
