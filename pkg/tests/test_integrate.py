from __future__ import annotations

import pickle

import numpy as np
import pytest

from chain.cumulants import CD22, S2, CumulantState, drift, hermiticity_error
from chain.errors import DivergenceError, InstabilityError, ThresholdError
from chain.integrate import (
    BLOCK_SIZE, noise_seed, run_trajectories, solve_steady, solve_steady_many, split_indices,
    trajectory_seed,
)
from chain.linear import build_linear_system, to_cumulant_state
from chain.params import ChainParams, SimControls

STEADY = SimControls()


def test_linear_steady_state_matches_lyapunov(linear_params):
    state = solve_steady(linear_params, STEADY)
    expected = to_cumulant_state(build_linear_system(linear_params))
    np.testing.assert_allclose(state.values, expected.values, atol=1e-8)


def test_kerr_steady_state_is_a_fixed_point(kerr_params):
    state = solve_steady(kerr_params, STEADY)
    assert np.max(np.abs(drift(state.values, kerr_params))) < 1e-9
    assert state.hermiticity_error() < 1e-9


def test_batch_rows_do_not_interact(kerr_params, linear_params):
    alone = solve_steady(kerr_params, STEADY)
    batch = solve_steady_many([linear_params, kerr_params, kerr_params.replace(g1=0.1)], STEADY)
    assert batch.ok.all()
    np.testing.assert_allclose(batch.state(1).values, alone.values, rtol=1e-12, atol=1e-12)


def test_failed_rows_are_nan(kerr_params):
    batch = solve_steady_many([kerr_params, kerr_params.replace(g1=0.6)], STEADY)
    assert list(batch.ok) == [True, False]
    assert np.all(np.isnan(batch.states[1]))
    assert isinstance(batch.errors[1], ThresholdError)
    with pytest.raises(ThresholdError):
        batch.state(1)


def test_unstable_linear_analyzer_is_reported():
    with pytest.raises(InstabilityError) as info:
        solve_steady(ChainParams(g2=1.2, lam=0.0), STEADY)
    assert info.value.max_eig > 0


def test_errors_survive_pickling():
    for err in (ThresholdError("squeezer", 0.6, 0.5), InstabilityError("stuck", 0.1), DivergenceError(3, 1.5)):
        back = pickle.loads(pickle.dumps(err))
        assert type(back) is type(err)
        assert str(back) == str(err)
    assert pickle.loads(pickle.dumps(DivergenceError(3, 1.5))).index == 3


def test_seed_paths():
    assert trajectory_seed(1, 1, 0) == trajectory_seed(1, 1, 0)
    seeds = {trajectory_seed(1, k, i) for k in (1, 2) for i in range(50)}
    assert len(seeds) == 100
    assert noise_seed(1, 1, 0) != trajectory_seed(1, 1, 0)


def test_split_indices_fixed_blocks():
    parts = split_indices(2 * BLOCK_SIZE + 3)
    assert [len(p) for p in parts] == [BLOCK_SIZE, BLOCK_SIZE, 3]
    assert np.array_equal(np.concatenate(parts), np.arange(2 * BLOCK_SIZE + 3))
    assert split_indices(0) == []


def test_trajectory_records(linear_params, fast_controls):
    init = solve_steady(linear_params, STEADY)
    records = run_trajectories(linear_params, fast_controls, init, class_label=2)
    assert [r.index for r in records] == list(range(fast_controls.n_traj))
    assert all(r.class_label == 2 for r in records)
    assert records[0].s2.shape == (fast_controls.n_steps,)
    assert records[0].dW.shape == (fast_controls.n_steps, 2)
    assert records[0].s2[0] == init.s2
    assert records[0].times[1] == pytest.approx(fast_controls.dt)


def test_trajectories_are_reproducible(linear_params, fast_controls):
    init = solve_steady(linear_params, STEADY)
    a = run_trajectories(linear_params, fast_controls, init, workers=1)
    b = run_trajectories(linear_params, fast_controls, init, workers=1)
    for x, y in zip(a, b):
        assert np.array_equal(x.s2, y.s2)
        assert np.array_equal(x.dW, y.dW)


def test_trajectories_independent_of_worker_count(linear_params):
    c = SimControls(dt=0.01, t_settle=0.2, t_filter=1.0, n_traj=BLOCK_SIZE + 5, seed=3)
    init = solve_steady(linear_params, STEADY)
    one = run_trajectories(linear_params, c, init, workers=1)
    two = run_trajectories(linear_params, c, init, workers=2)
    for x, y in zip(one, two):
        assert x.seed == y.seed
        assert np.array_equal(x.s2, y.s2)


def test_final_chunk_records_match_full_records(linear_params):
    c = SimControls(dt=0.01, t_settle=0.2, t_filter=1.0, n_traj=3, seed=3, chunk_steps=16)
    init = solve_steady(linear_params, STEADY)
    full = run_trajectories(linear_params, c, init, keep_states=True)
    tail = run_trajectories(linear_params, c, init, keep_states=True, keep_records=False)
    for x, y in zip(full, tail):
        assert len(y.s2) <= c.chunk_steps
        assert y.t0 == pytest.approx(x.times[-len(y.s2)])
        np.testing.assert_array_equal(y.s2, x.s2[-len(y.s2):])
        np.testing.assert_array_equal(y.states[-1], x.states[-1])


@pytest.mark.parametrize("n_sets", [10, pytest.param(100, marks=pytest.mark.slow)])
def test_conditional_states_stay_physical(n_sets):
    rng = np.random.default_rng(5)
    c = SimControls(dt=0.01, t_settle=1.0, t_filter=2.0, n_traj=2, seed=9)
    for _ in range(n_sets):
        p = ChainParams(
            g1=rng.uniform(0, 0.45), phi1=rng.uniform(-np.pi, np.pi),
            g2=rng.uniform(0, 0.5), phi2=rng.uniform(-np.pi, np.pi),
            lam=rng.uniform(0, 0.01), eta_d2=rng.uniform(0, 1), phi_d2=rng.uniform(-np.pi, np.pi),
        )
        for rec in run_trajectories(p, c, CumulantState.vacuum(), keep_states=True):
            norm = np.max(np.abs(rec.states), axis=1)
            herm = np.array([hermiticity_error(y) for y in rec.states])
            assert np.all(herm <= 1e-8 * (1 + norm))
            assert np.all(rec.states[:, CD22].real >= -1e-8)


@pytest.mark.slow
def test_conditional_means_average_to_unconditional(linear_params):
    c = SimControls(dt=0.01, t_settle=2.0, t_filter=1.0, n_traj=500, seed=21)
    init = solve_steady(linear_params, STEADY)
    records = run_trajectories(linear_params, c, init, keep_states=True, keep_records=False)
    final = np.stack([r.states[-1] for r in records])
    s2 = final[:, S2]
    se = np.std(s2) / np.sqrt(len(s2))
    assert abs(np.mean(s2) - init.s2) < 5 * se + 1e-3

    # total variance: unconditional ⟨δs†δs⟩ = E[conditional cumulant] + spread of conditional means
    spread = np.abs(s2 - init.s2) ** 2
    total = final[:, CD22].real.mean() + spread.mean()
    se_total = spread.std() / np.sqrt(len(spread))
    assert abs(total - init["cd22"].real) < 5 * se_total + 0.02 * init["cd22"].real
