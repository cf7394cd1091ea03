"""Command-line entry point: chain-run <subcommand> --config PATH.

Exit codes: 0 success, 2 config error, 3 physics or metrics error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from chain import __version__
from chain.errors import ConfigError, MetricsError, PhysicsError
from pipeline.config import load_config, with_overrides
from pipeline.scenarios import run_scenario

SUBCOMMANDS = {
    "simulate": "classify",
    "sweep": "sweep2d",
    "noise": "noise_study",
    "readout": "readout_map",
    "linear": "linear_analysis",
    "convert": "convert_params",
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_IO = 4


def _emit(value: str) -> list[str]:
    formats = [v.strip() for v in value.split(",") if v.strip()]
    bad = [v for v in formats if v not in ("csv", "json")]
    if bad or not formats:
        raise argparse.ArgumentTypeError(f"--emit takes csv and/or json, got {value!r}")
    return formats


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"--seed must be an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chain-run", description="Squeezer → analyzer readout chain experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, scenario in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {scenario} scenario")
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=_seed, help="master seed (overrides controls.seed)")
        p.add_argument("--traj", type=int, help="trajectories per class (overrides controls.n_traj)")
        p.add_argument("--emit", type=_emit, help="comma-separated output families: csv,json")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    scenario = SUBCOMMANDS[args.command]
    t0 = time.time()

    print("=" * 60)
    print(f"Readout chain: {scenario}")
    print("=" * 60)

    try:
        cfg = with_overrides(
            load_config(args.config),
            scenario=scenario,
            seed=args.seed,
            n_traj=args.traj,
            directory=args.out,
            emit=args.emit,
        )
        out = Path(cfg.output.directory)
        print(f"  config: {args.config}")
        print(f"  output: {out}")
        run_scenario(cfg, out)
    except (ConfigError, ValidationError) as exc:
        print(f"\n[config error] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhysicsError, MetricsError) as exc:
        print(f"\n[physics error] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"\n[io error] {exc}", file=sys.stderr)
        return EXIT_IO

    elapsed = time.time() - t0
    print(f"\nRun complete in {elapsed:.1f}s")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
