"""Deterministic writers for result tables and JSON reports.

Every file carries the tool version and the fully resolved config, so two runs
with the same embedded config produce the same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from chain import __version__
from pipeline.config import ExperimentConfig

TOOL = "readout-chain"
FLOAT_FORMAT = "%.17g"


def _canonical(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def header_lines(cfg: ExperimentConfig) -> list[str]:
    return [f"# tool: {TOOL} {__version__}", f"# config: {_canonical(cfg.resolved())}"]


def write_csv(df: pd.DataFrame, path: Path, cfg: ExperimentConfig) -> Path:
    if "csv" not in cfg.output.emit:
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    body = df.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="NaN", lineterminator="\n")
    path.write_text("\n".join(header_lines(cfg)) + "\n" + body)
    print(f"  [write] {path.name}: {len(df):,} rows")
    return path


def write_json(report: BaseModel | dict, path: Path, cfg: ExperimentConfig) -> Path:
    if "json" not in cfg.output.emit:
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = report.model_dump(mode="json") if isinstance(report, BaseModel) else dict(report)
    payload.update(tool=TOOL, version=__version__, config=cfg.resolved())
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"  [write] {path.name}")
    return path


def read_config_line(path: Path) -> dict:
    """Config embedded in the second comment line of an emitted CSV."""
    with path.open() as f:
        f.readline()
        line = f.readline()
    prefix = "# config: "
    if not line.startswith(prefix):
        raise ValueError(f"{path.name}: missing config header")
    return json.loads(line[len(prefix):])
