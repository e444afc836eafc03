"""Command-line driver.

    langevin-perturb <subcommand> --config <path> [--out <dir>] [--workers N] [--seed S]

Subcommands: analytic-sweep, mc-sweep, design-j, spectrum, overdamped-check,
bridge (preset diffusion-bridge experiment; --config optional).  Exit codes:
0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments
from .config import ConfigError, ExperimentConfig, bridge_preset
from .dynamics import NumericalDivergenceError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langevin-perturb",
        description="Perturbed underdamped Langevin sampling experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analytic-sweep", "mc-sweep", "design-j", "spectrum", "overdamped-check", "bridge"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment configuration file")
        p.add_argument("--out", help="output directory (default: current)")
        p.add_argument("--workers", type=int, help="parallel workers over grid points")
        p.add_argument("--seed", type=int, help="override base seed")
        if name == "bridge":
            p.add_argument(
                "--paper-scale",
                action="store_true",
                help="original stepsize/horizon/replication settings (slow)",
            )
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.command == "bridge":
        cfg = (
            ExperimentConfig.from_file(args.config)
            if args.config
            else bridge_preset(paper_scale=getattr(args, "paper_scale", False))
        )
    else:
        if not args.config:
            raise ConfigError(f"{args.command} requires --config")
        cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg


def _out_path(args, cfg_path, default_name: str):
    name = cfg_path if cfg_path else default_name
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, os.path.basename(name))


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command in ("mc-sweep", "bridge"):
            if args.command == "bridge":
                print("bridge preset: desk-scale grids (log-spaced gamma presets)")
            table = experiments.run_mc_sweep(cfg)
            csv = _out_path(args, cfg.csv_path, f"{args.command}.csv")
            svg = _out_path(args, cfg.svg_path, f"{args.command}.svg") if cfg.svg_path else None
            experiments.emit(table, csv_path=csv, svg_path=svg, y_field="std")
            print(f"wrote {csv}")
            for row in table.rows:
                print(
                    f"gamma={row.gamma:g} mu={row.mu:g} nu={row.nu:g} "
                    f"mean={row.mean} std={row.std} status={row.status}"
                )
            return EXIT_NUMERICAL if table.failed else EXIT_OK

        if args.command == "analytic-sweep":
            table = experiments.run_analytic_sweep(cfg)
            csv = _out_path(args, cfg.csv_path, "analytic-sweep.csv")
            svg = _out_path(args, cfg.svg_path, "analytic-sweep.svg") if cfg.svg_path else None
            experiments.emit(table, csv_path=csv, svg_path=svg, y_field="sigma2")
            print(f"wrote {csv}")
            return EXIT_NUMERICAL if table.failed else EXIT_OK

        if args.command == "design-j":
            result = experiments.run_design(cfg)
            text = experiments.design_csv_blocks(result)
            sys.stdout.write(text)
            if args.out:
                path = _out_path(args, None, "design-j.csv")
                with open(path, "w", encoding="ascii", newline="") as fh:
                    fh.write(text)
                print(f"wrote {path}")
            return EXIT_OK

        if args.command == "spectrum":
            rows = experiments.run_spectrum(cfg)
            csv = _out_path(args, cfg.csv_path, "spectrum.csv")
            experiments.write_csv(csv, ("m", "re", "im", "multiplicity"), rows)
            print(f"wrote {csv}")
            return EXIT_OK

        if args.command == "overdamped-check":
            rows = experiments.run_overdamped_check(cfg)
            csv = _out_path(args, cfg.csv_path, "overdamped-check.csv")
            experiments.write_csv(csv, ("eps", "seed", "sup_error"), rows)
            print(f"wrote {csv}")
            return EXIT_OK

        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalDivergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
