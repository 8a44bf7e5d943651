"""Command-line interface.

Verbs:
  run           execute one experiment config, write trace/metadata/series/figures
  compare       run several configs over a shared seed list, aggregate mean/range
  suite         execute the full verification battery, one pass/fail line each
  validate-only check a config and the mixing-matrix invariants, run nothing

Exit codes: 0 success, 1 validation failure, 2 divergence, 3 suite failure.
The output root can be overridden with --output-root or DECENTGRAD_OUTPUT_ROOT.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import ConfigError
from .runner import execute_compare, execute_run, format_summary, resolve_output_root
from .suite import SuiteContext, format_result, run_suite

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2
EXIT_SUITE_FAILURE = 3


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"seeds must be a comma-separated integer list: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decentgrad",
        description="Simulate decentralized stochastic subgradient methods.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--validate-only", action="store_true",
                       help="check the config and mixing invariants, run nothing")
    p_run.add_argument("--output-root", default=None)
    p_run.add_argument("--no-figures", action="store_true")

    p_cmp = sub.add_parser("compare", help="run configs over a seed sweep and aggregate")
    p_cmp.add_argument("configs", nargs="+", type=Path)
    p_cmp.add_argument("--seeds", default="0,1,2,3,4")
    p_cmp.add_argument("--out", default="compare")
    p_cmp.add_argument("--output-root", default=None)
    p_cmp.add_argument("--no-figures", action="store_true")

    p_suite = sub.add_parser("suite", help="run the verification battery")
    p_suite.add_argument("--filter", default=None, help="only criteria whose name matches")

    p_val = sub.add_parser("validate-only", help="validate a config, run nothing")
    p_val.add_argument("config", type=Path)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = ExperimentConfig.from_file(args.config)
        if args.validate_only:
            print(config.validation_summary())
            return EXIT_OK
        root = resolve_output_root(args.output_root)
        out_dir = root / config.output_dir
        artifacts = execute_run(config, out_dir, render=not args.no_figures)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    trace = artifacts.trace
    print(f"wrote {len(artifacts.files)} files to {artifacts.out_dir}")
    if trace.diverged:
        print(
            f"run diverged at iteration {trace.diverged_at} "
            f"(trace retained up to the last finite state)",
            file=sys.stderr,
        )
        return EXIT_DIVERGENCE
    print(
        f"{trace.algorithm} on {trace.problem}: f_avg {trace.f_avg[0]:.6g} -> "
        f"{trace.f_avg[-1]:.6g}, consensus {trace.consensus[-1]:.3e}"
    )
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        config = ExperimentConfig.from_file(args.config)
        print(config.validation_summary())
        return EXIT_OK
    except (ConfigError, FileNotFoundError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def _cmd_compare(args: argparse.Namespace) -> int:
    try:
        configs = [ExperimentConfig.from_file(p) for p in args.configs]
        seeds = _parse_seeds(args.seeds)
        root = resolve_output_root(args.output_root)
        result = execute_compare(configs, seeds, root / args.out, render=not args.no_figures)
    except ConfigError as exc:
        print(f"invalid comparison: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    print(format_summary(result))
    print(f"wrote {len(result.files)} aggregate files to {result.out_dir}")
    if result.any_diverged:
        print("at least one run diverged (traces retained)", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def _cmd_suite(args: argparse.Namespace) -> int:
    ctx = SuiteContext()
    try:
        results = run_suite(args.filter, ctx)
    finally:
        ctx.cleanup()
    if not results:
        print(f"no criteria match filter {args.filter!r}", file=sys.stderr)
        return EXIT_VALIDATION
    for res in results:
        print(format_result(res))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_SUITE_FAILURE if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "compare":
        return _cmd_compare(args)
    if args.command == "suite":
        return _cmd_suite(args)
    return _cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
