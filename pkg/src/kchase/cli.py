"""Command line entry point: ``kchase <subcommand> --config PATH [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .core import CapacityError
from .harness import KINDS, ValidationError, dumps_report, load_config, run, validate

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY = 0, 2, 3

log = logging.getLogger("kchase")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kchase", description="k-chasing and top-k learning experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="overrides experiment.seed")
        sp.add_argument("--out", default=None, help="output directory for report.json and CSVs")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = validate(load_config(args.config), kind=args.command, seed=args.seed)
        log.info("running %s with seed %d, %d trials", cfg.kind, cfg.seed, cfg.trials)
        report = run(cfg, args.out)
    except ValidationError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_VALIDATION
    except CapacityError as exc:
        print(f"capacity error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    if args.out is None:
        sys.stdout.write(dumps_report(report))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
