"""Output checks for a chain-run result directory.

Run after an experiment to catch truncated or inconsistent outputs before they
go into figures.

Usage:
    chain-validate out/
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from pipeline.export import TOOL, read_config_line
from pipeline.scenarios import GRID_COLUMNS, NOISE_COLUMNS
from results import queries

EXPECTED = {
    "classify": {"csv": ["shots.csv"], "json": ["metrics.json"]},
    "sweep2d": {"csv": ["grid.csv", "row_argmax.csv"], "json": ["summary.json"]},
    "noise_study": {"csv": ["noise.csv", "noise_argmax.csv"], "json": ["summary.json"]},
    "readout_map": {"csv": ["readout_map.csv"], "json": ["summary.json"]},
    "linear_analysis": {"json": ["linear_report.json"]},
    "convert_params": {"json": ["conversion.json"]},
}

COLUMNS = {
    "shots.csv": ["class", "I", "Q", "seed"],
    "grid.csv": GRID_COLUMNS,
    "readout_map.csv": GRID_COLUMNS,
    "noise.csv": NOISE_COLUMNS,
    "row_argmax.csv": ["axis1", "argmax", "best", "interior"],
    "noise_argmax.csv": ["n_cl", "argmax_fisher", "argmax_delta_mu", "gap"],
    "spot_checks.csv": ["axis1", "axis2", "fidelity", "delta_mu_norm", "fisher_norm"],
}

passed = 0
failed = 0
warnings = 0


def _check(name: str, ok: bool, detail: str = "") -> None:
    global passed, failed
    if ok:
        passed += 1
        print(f"  PASS  {name}")
    else:
        failed += 1
        msg = f"  FAIL  {name}"
        if detail:
            msg += f": {detail}"
        print(msg)


def _warn(name: str, detail: str) -> None:
    global warnings
    warnings += 1
    print(f"  WARN  {name}: {detail}")


def _find_config(out: Path) -> dict | None:
    for path in sorted(out.glob("*.json")):
        data = json.loads(path.read_text())
        if isinstance(data, dict) and "config" in data:
            return data["config"]
    for path in sorted(out.glob("*.csv")):
        try:
            return read_config_line(path)
        except ValueError:
            continue
    return None


def _grid_shape(cfg: dict) -> tuple[int, int]:
    section = cfg["sweep"] if cfg["scenario"] == "sweep2d" else cfg["readout"]
    return section["axis1"]["steps"], section["axis2"]["steps"]


def _row_major(df) -> bool:
    a1 = df["axis1"].to_numpy()
    a2 = df["axis2"].to_numpy()
    same_row = a1[1:] == a1[:-1]
    return bool(np.all(np.diff(a1) >= 0) and np.all(np.diff(a2)[same_row] > 0))


def _check_headers(path: Path, cfg: dict) -> None:
    with path.open() as f:
        first = f.readline()
    _check(f"{path.name} tool header", first.startswith(f"# tool: {TOOL} "), first.strip())
    try:
        embedded = read_config_line(path)
    except (ValueError, json.JSONDecodeError) as exc:
        _check(f"{path.name} config header", False, str(exc))
        return
    _check(f"{path.name} embeds the run config", embedded == cfg)


def _check_shots(path: Path, cfg: dict) -> None:
    df = queries.load_table(path)
    n_traj = cfg["controls"]["n_traj"]
    counts = df.groupby("class").size().to_dict()
    _check("shots per class", counts == {1: n_traj, 2: n_traj}, f"got {counts}, expected {n_traj} each")
    profile = queries.table_profile(path, ["I", "Q"])
    _check("shots are finite", profile["bad_I"] == 0 and profile["bad_Q"] == 0, str(profile))


def _check_grid(path: Path, cfg: dict) -> None:
    steps1, steps2 = _grid_shape(cfg)
    df = queries.load_table(path)
    _check(f"{path.name} has {steps1}×{steps2} rows", len(df) == steps1 * steps2, f"got {len(df):,}")
    _check(f"{path.name} is row-major", _row_major(df))
    profile = queries.table_profile(path, ["delta_mu_norm", "fisher_norm"])
    if profile["bad_fisher_norm"]:
        _warn(f"{path.name} NaN cells", f"{profile['bad_fisher_norm']} failed points")
    finite = df["fisher_norm"].dropna()
    _check(f"{path.name} D_F ≥ 0", bool((finite >= 0).all()))


def _check_noise(path: Path, cfg: dict) -> None:
    df = queries.load_table(path)
    expected = len(cfg["noise"]["n_cl"]) * cfg["noise"]["axis"]["steps"]
    _check("noise.csv row count", len(df) == expected, f"got {len(df)}, expected {expected}")
    _check("D_F non-increasing in n_cl", queries.fisher_monotone_in_noise(df))


def _check_fidelity(name: str, value) -> None:
    ok = value is not None and (math.isnan(value) or 0.0 <= value <= 1.0)
    _check(f"{name} fidelity in [0, 1]", ok, f"got {value}")


def _check_json(path: Path, cfg: dict) -> None:
    data = json.loads(path.read_text())
    _check(f"{path.name} tool/version keys", data.get("tool") == TOOL and "version" in data)
    _check(f"{path.name} embeds the run config", data.get("config") == cfg)
    if path.name == "metrics.json":
        _check_fidelity("shots", data["shots"]["fidelity"])
        _check("shots D_F ≥ 0", data["shots"]["D_F"] >= 0, f"got {data['shots']['D_F']}")
        if data.get("linear_baseline"):
            _check_fidelity("linear baseline", data["linear_baseline"]["fidelity"])


def validate(out: Path) -> int:
    """Run all checks on one output directory. Returns number of failures."""
    global passed, failed, warnings
    passed = failed = warnings = 0

    print("=" * 60)
    print(f"Output Validation: {out}")
    print("=" * 60)

    cfg = _find_config(out) if out.is_dir() else None
    _check("embedded config found", cfg is not None, f"no result files under {out}")
    if cfg is None:
        return failed
    scenario = cfg["scenario"]
    emit = cfg["output"]["emit"]
    print(f"  scenario: {scenario}, emit: {','.join(emit)}")

    # ── 1. File existence ──
    print("\n-- File existence --")
    expected = [name for family in emit for name in EXPECTED[scenario].get(family, [])]
    if "csv" in emit and (out / "spot_checks.csv").exists():
        expected.append("spot_checks.csv")
    for name in expected:
        _check(f"{name} exists", (out / name).exists())

    # ── 2. Headers and columns ──
    csvs = [out / n for n in expected if n.endswith(".csv") and (out / n).exists()]
    if csvs:
        print("\n-- CSV headers --")
    for path in csvs:
        _check_headers(path, cfg)
        columns = list(queries.load_table(path).columns)
        _check(f"{path.name} columns", columns == COLUMNS[path.name], f"got {columns}")

    # ── 3. Table contents ──
    if csvs:
        print("\n-- Table contents --")
    for path in csvs:
        if path.name == "shots.csv":
            _check_shots(path, cfg)
        elif path.name in ("grid.csv", "readout_map.csv"):
            _check_grid(path, cfg)
        elif path.name == "noise.csv":
            _check_noise(path, cfg)
        elif path.name == "spot_checks.csv":
            for value in queries.load_table(path)["fidelity"]:
                _check_fidelity("spot check", float(value))

    # ── 4. JSON reports ──
    jsons = [out / n for n in expected if n.endswith(".json") and (out / n).exists()]
    if jsons:
        print("\n-- JSON reports --")
    for path in jsons:
        _check_json(path, cfg)

    # ── Summary ──
    print("\n" + "=" * 60)
    print(f"Results: {passed} passed, {failed} failed, {warnings} warnings")
    print("=" * 60)

    return failed


def main() -> None:
    parser = argparse.ArgumentParser(prog="chain-validate", description="Check a chain-run output directory")
    parser.add_argument("directory", type=Path)
    failures = validate(parser.parse_args().directory)
    sys.exit(1 if failures > 0 else 0)


if __name__ == "__main__":
    main()
