"""Command-line entry point.

One subcommand per pipeline stage plus ``all``. Configuration comes from an
optional key=value file; every config key can also be overridden by a flag
of the same name. Exit codes: 0 success, 1 usage or config error, 2 data
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .pipeline import SUBCOMMANDS, validate_config, run_stage

_OVERRIDE_KEYS = (
    "incidents",
    "incidents_format",
    "rules",
    "pretagged",
    "embeddings",
    "labels",
    "truth_pairs",
    "synth_spec",
    "epsilon",
    "min_pts",
    "metric",
    "k",
    "clique_min_size",
    "max_eval_rank",
    "embedding_dim",
    "outdir",
    "seed",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="incidentkg",
        description="Mine entities, NPMI relations, knowledge graphs, and "
        "cluster-level entity rankings from incident reports.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=f"run the {name} stage")
        sub.add_argument("--config", help="key=value config file")
        for key in _OVERRIDE_KEYS:
            sub.add_argument(f"--{key}", dest=key, help=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        overrides = {
            key: value
            for key, value in vars(args).items()
            if key in _OVERRIDE_KEYS and value is not None
        }
        config = validate_config(args.config, overrides)
        run_stage(args.subcommand, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports everything
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
