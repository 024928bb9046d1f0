"""Command line interface: ``run``, ``sweep``, ``plot-data`` and ``validate-config``.

Exit codes: 0 success, 2 configuration error, 3 runtime contract violation.
Set ``BATCHEDMG_LOG`` (DEBUG, INFO, ...) to control logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..errors import ConfigurationError, ContractError, DataError
from .config import load_config
from .plotdata import collect_ledgers, emit_plot_data
from .runner import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="batchedmg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "execute every (K, seed) run of a config"),
                        ("sweep", "run a config, then aggregate its ledgers into plot data")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed-offset", type=int, default=0)
    sp = sub.add_parser("plot-data", help="aggregate ledger CSVs into curves.csv and slopes.csv")
    sp.add_argument("ledgers", nargs="*", help="ledger files or directories")
    sp.add_argument("--out", default=".")
    sp = sub.add_parser("validate-config", help="schema-check a config file")
    sp.add_argument("--config", required=True)
    return p


def _print_summary(s: dict) -> None:
    if s["algorithm"] == "reward_free":
        print(
            f"reward_free seed={s['seed']} batches={s['batch_count']} "
            f"max_gap_mu={s['max_gap_max_player']:.4g} max_gap_nu={s['max_gap_min_player']:.4g}"
        )
    else:
        print(
            f"{s['algorithm']} K={s['K']} seed={s['seed']} K0={s['K0']} batches={s['batch_count']} "
            f"regret={s['regret']:.4f} final_gap={s['final_gap']:.4g}"
        )


def main(argv=None) -> int:
    level = os.environ.get("BATCHEDMG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            cfg = load_config(args.config)
            print(f"ok: {cfg.algorithm} config, hash {cfg.hash}")
        elif args.command in ("run", "sweep"):
            cfg = load_config(args.config)
            if args.workers < 1:
                raise ConfigurationError("--workers must be at least 1")
            out = Path(args.out or cfg.output_dir)
            for s in run_experiment(cfg, out, workers=args.workers, seed_offset=args.seed_offset):
                _print_summary(s)
            if args.command == "sweep" and cfg.algorithm != "reward_free":
                curves, slopes = emit_plot_data(collect_ledgers([out]), out)
                print(f"wrote {curves} and {slopes}")
        else:
            paths = collect_ledgers(args.ledgers)
            curves, slopes = emit_plot_data(paths, args.out)
            print(f"wrote {curves} and {slopes}")
    except (ConfigurationError, DataError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
