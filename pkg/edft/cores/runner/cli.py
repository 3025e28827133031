# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import argparse
import sys
from typing import List, Optional

from ..common.constants import ExitCode
from ..common.exceptions import ConfigError, EdftError
from ..common.logger import logger
from .catalog import list_fixtures
from .config import apply_overrides, load_config
from .run import compare, run


def _add_run_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, required=True, help="YAML config path or fixture name.")
    parser.add_argument("--algo", type=str, default=None, help="scf, pcg-sN, pcg-r1-sN or pcg-r2-sN.")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out-dir", type=str, default=None)
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edft", description="Ensemble Kohn-Sham free energy minimization.")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Solve one configuration.")
    _add_run_arguments(run_parser)

    compare_parser = commands.add_parser("compare", help="Solve one configuration with several algorithms.")
    _add_run_arguments(compare_parser)
    compare_parser.add_argument(
        "--algos", type=str, default="pcg-s1,pcg-s2,pcg-s3", help="Comma separated algorithm labels."
    )

    fixtures_parser = commands.add_parser("fixtures", help="Fixture catalog.")
    fixtures_commands = fixtures_parser.add_subparsers(dest="fixtures_command", required=True)
    fixtures_commands.add_parser("list", help="Print the fixture names.")

    validate_parser = commands.add_parser("validate", help="Validate a configuration without solving.")
    validate_parser.add_argument("--config", type=str, required=True)
    return parser


def _load(args):
    config = load_config(args.config)
    return apply_overrides(
        config, algo=args.algo, seed=args.seed, out_dir=args.out_dir, max_iter=args.max_iter, tol=args.tol
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return int(ExitCode.OK) if error.code == 0 else int(ExitCode.USAGE)

    try:
        if args.command == "fixtures":
            for name in list_fixtures():
                print(name)
            return int(ExitCode.OK)
        if args.command == "validate":
            config = load_config(args.config)
            print(f"{config.name}: valid ({config.algorithm.name})")
            return int(ExitCode.OK)
        config = _load(args)
        if args.command == "run":
            outcome = run(config)
            print(outcome.summary_path)
            return int(outcome.exit_code)
        algorithms = [name.strip() for name in args.algos.split(",") if name.strip()]
        outcomes = compare(config, algorithms)
        for outcome in outcomes:
            print(outcome.summary_path)
        return max(int(o.exit_code) for o in outcomes) if outcomes else int(ExitCode.OK)
    except ConfigError as error:
        for violation in error.violations:
            logger.error(violation)
        return int(error.exit_code)
    except EdftError as error:
        logger.error(f"{type(error).__name__}: {error}")
        return int(error.exit_code)


if __name__ == "__main__":
    sys.exit(main())
