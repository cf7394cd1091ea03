from __future__ import annotations

import math

import pandas as pd
import pytest

from pipeline.config import ExperimentConfig
from pipeline.export import read_config_line, write_csv
from results import queries


@pytest.fixture
def grid() -> pd.DataFrame:
    rows = []
    for a1 in (0.0, 1.0):
        for a2, v in zip((0.0, 1.0, 2.0, 3.0), (0.1, 0.5, 0.3, 0.2) if a1 == 0 else (0.1, 0.2, 0.3, 0.9)):
            rows.append((a1, a2, v, 2 * v))
    rows[1] = (0.0, 1.0, math.nan, math.nan)
    return pd.DataFrame(rows, columns=["axis1", "axis2", "delta_mu_norm", "fisher_norm"])


def test_row_argmax_skips_nan(grid):
    rows = queries.row_argmax(grid)
    assert [r["axis1"] for r in rows] == [0.0, 1.0]
    assert rows[0]["argmax"] == 2.0
    assert bool(rows[0]["interior"])
    assert rows[1]["argmax"] == 3.0
    assert not bool(rows[1]["interior"])


def test_grid_optimum_and_failures(grid):
    best = queries.grid_optimum(grid, "fisher_norm")
    assert (best["axis1"], best["axis2"]) == (1.0, 3.0)
    assert best["value"] == pytest.approx(1.8)
    assert queries.count_failed(grid) == 1
    empty = grid.assign(fisher_norm=math.nan)
    assert queries.grid_optimum(empty) is None


def test_noise_argmax_periodic_gap():
    rows = []
    for n_cl, best_f in ((0.0, -3.0), (4.0, 2.5)):
        for axis in (-3.0, 0.0, 2.5, 3.0):
            rows.append((n_cl, axis, 1.0 if axis == 3.0 else 0.1, 1.0 if axis == best_f else 0.1))
    noise = pd.DataFrame(rows, columns=["n_cl", "axis", "delta_mu_norm", "fisher_norm"])
    out = queries.noise_argmax(noise)
    assert [r["n_cl"] for r in out] == [0.0, 4.0]
    assert out[0]["gap"] == pytest.approx(2 * math.pi - 6.0)
    assert out[1]["gap"] == pytest.approx(0.5)
    flat = queries.noise_argmax(noise, periodic=False)
    assert flat[0]["gap"] == pytest.approx(6.0)


def test_fisher_monotone_in_noise():
    ok = pd.DataFrame(
        [(0.0, 0.0, 1.0, 2.0), (1.0, 0.0, 1.0, 1.0), (0.0, 1.0, 1.0, 0.5), (1.0, 1.0, 1.0, 0.4)],
        columns=["n_cl", "axis", "delta_mu_norm", "fisher_norm"],
    )
    assert queries.fisher_monotone_in_noise(ok)
    bad = ok.copy()
    bad.loc[3, "fisher_norm"] = 0.6
    assert not queries.fisher_monotone_in_noise(bad)


def test_emitted_csv_round_trip(tmp_path, grid):
    cfg = ExperimentConfig()
    path = write_csv(grid, tmp_path / "grid.csv", cfg)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tool: readout-chain ")
    assert read_config_line(path) == cfg.resolved()
    assert lines[2] == "axis1,axis2,delta_mu_norm,fisher_norm"
    back = queries.load_table(path)
    assert list(back.columns) == list(grid.columns)
    assert len(back) == len(grid)
    assert back["delta_mu_norm"].isna().sum() == 1
    assert queries.table_profile(path, ["fisher_norm"]) == {"n_rows": 8, "bad_fisher_norm": 1}
