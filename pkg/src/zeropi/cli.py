"""Command line: ``zeropi <task> --config FILE [--workers N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import TASKS, ConfigError, bundled_config, load_config
from .errors import ZeroPiError
from .runner import EXIT_CONVERGENCE, EXIT_INVALID, EXIT_OK, run, validate, write_gnuplot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zeropi",
        description="Spectra, dispersive shifts and coherence budgets of the 0-pi qubit.",
    )
    parser.add_argument("task", choices=TASKS + ("gnuplot",),
                        help="computation to run; overrides [run] task in the config")
    parser.add_argument("--config", required=True,
                        help="INI config, a manifest.json from an earlier run, or bundled:ps1|ps2|ps3")
    parser.add_argument("--workers", type=int, default=None, help="worker processes for sweep points")
    parser.add_argument("--out", default=None, help="output directory (default: [output] directory)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve(path: str):
    if path.startswith("bundled:"):
        return bundled_config(path.split(":", 1)[1])
    return path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(_resolve(args.config))
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, ZeroPiError) as exc:
        print(f"zeropi: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.task == "gnuplot":
        for name in write_gnuplot(config, args.out):
            print(name)
        return EXIT_OK
    if args.task == "validate":
        report = validate(config)
        for line in report.lines():
            print(line)
        return EXIT_OK

    config = config.with_task(args.task)
    if args.task == "sweep" and config.sweep is None:
        print("zeropi: invalid configuration: task 'sweep' requires a [sweep] section", file=sys.stderr)
        return EXIT_INVALID
    try:
        result = run(config, args.out, args.workers)
    except ZeroPiError as exc:
        print(f"zeropi: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    for err in result.manifest.get("errors", []):
        print(f"zeropi: {err['kind']}: {err['message']}", file=sys.stderr)
    for name in result.files:
        print(name)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
