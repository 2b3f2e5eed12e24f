"""Command line front end: ``bsflow <experiment> [config.toml]``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
configuration or usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .acceptance import DEFAULT_SEED, run_acceptance
from .config import EXPERIMENTS, default_config, parse_config
from .errors import ConfigError, DomainError

log = logging.getLogger("bsflow")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _common(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global flags; SUPPRESS keeps a flag given
    # before the subcommand from being reset by the subparser default.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=d(None), help="output directory (default: config output_dir, or results/)")
    common.add_argument("-v", "--verbose", action="count", default=d(0), help="more logging; repeat for debug")
    common.add_argument("--seed", type=int, default=d(None), help="override the configured seed")
    common.add_argument("--no-figures", action="store_true", default=d(False), help="skip PNG rendering; plot data is still written")
    return common


def _parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    parser = argparse.ArgumentParser(prog="bsflow", parents=[_common(suppress=False)], description="Black-Scholes kernel and probability-flow experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--check", action="store_true", help="run the built-in acceptance suite and exit")
    parser.add_argument("--no-repeat", action="store_true", help="with --check, skip the reproducibility rerun")
    sub = parser.add_subparsers(dest="command")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        p.add_argument("config", nargs="?", type=Path, help="TOML scenario file (defaults are used when omitted)")
    run = sub.add_parser("run", parents=[common], help="run one or more TOML scenario files")
    run.add_argument("configs", nargs="+", type=Path)
    return parser


def _logging(level: int) -> None:
    logging.basicConfig(
        level=logging.WARNING - 10 * min(level, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _print_result(res) -> None:
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}\t{res.experiment}\t{c.name}\t{c.value:.6g}\t{c.threshold}")
    print(f"# outputs in {res.out_dir}")


def _run_one(cfg, args) -> int:
    from .scenarios import run_scenario

    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out if args.out is not None else Path(cfg.output_dir)
    if getattr(args, "command", None) == "run" and len(args.configs) > 1:
        out = out / cfg.experiment
    res = run_scenario(cfg, out, figures=not args.no_figures)
    _print_result(res)
    return res.exit_status


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    _logging(args.verbose)

    if args.check:
        out = args.out if args.out is not None else Path("results") / "acceptance"
        seed = DEFAULT_SEED if args.seed is None else args.seed
        criteria = run_acceptance(out, seed=seed, figures=not args.no_figures, repeat=not args.no_repeat)
        for c in criteria:
            print(c.line())
        failed = [c.number for c in criteria if not c.ok]
        print(f"# {len(criteria) - len(failed)}/{len(criteria)} criteria passed; summary in {out / 'acceptance.csv'}")
        return EXIT_FAILED if failed else EXIT_OK

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            cfgs = [parse_config(path) for path in args.configs]
        elif args.config is not None:
            cfgs = [parse_config(args.config, experiment=args.command)]
        else:
            cfgs = [default_config(args.command)]
    except ConfigError as exc:
        print(f"bsflow: configuration error\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"bsflow: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    for cfg in cfgs:
        try:
            status = max(status, _run_one(cfg, args))
        except DomainError as exc:
            print(f"bsflow: {cfg.experiment}: {exc}", file=sys.stderr)
            status = EXIT_CONFIG
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
