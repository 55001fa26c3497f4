"""Command-line entry point: ``stochns {simulate,verify,sweep,structure}``.

Exit codes: 0 success, 1 validation or usage error, 2 numerical failure,
3 insufficient data.
"""

import argparse
import logging
import sys

from .errors import ConfigError, StochNSError
from .harness import config as config_mod
from .harness.output import out_dir_default
from .harness.runs import run_simulate, run_structure, run_sweep, run_verify

SUITES = ("spectral", "reduction", "symmetry", "identities", "ou")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _global_options(suppress):
    # subcommands repeat the global flags; suppressed defaults keep them from
    # overwriting values given before the subcommand name
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = _Parser(add_help=False)
    common.add_argument("--config", default=d(None), help="TOML configuration file (defaults apply when omitted)")
    common.add_argument("--seed-override", type=int, default=d(None), help="replace simulation.seed")
    common.add_argument("--threads", type=int, default=d(1), help="worker processes for independent runs (default 1)")
    common.add_argument("--out-dir", default=d(None), help="output directory (default $STOCHNS_OUT_DIR or ./stochns_out)")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser():
    top, common = _global_options(False), _global_options(True)

    p = _Parser(prog="stochns", description=__doc__.splitlines()[0], parents=[top])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sim = sub.add_parser("simulate", parents=[common], help="integrate the pair and write time series, checkpoints, manifest")
    sim.add_argument("--resume", help="continue from a checkpoint written by the same configuration")
    ver = sub.add_parser("verify", parents=[common], help="run an oracle suite and report pass/fail")
    ver.add_argument("--suite", required=True, choices=SUITES)
    sub.add_parser("sweep", parents=[common], help="lambda sweep: pathwise distances and stationary convergence")
    st = sub.add_parser("structure", parents=[common], help="structure functions and scaling fits from checkpoints")
    st.add_argument("--checkpoints", required=True, help="glob of checkpoint files")
    return p


def _load(args):
    rc = config_mod.load(args.config) if args.config else config_mod.from_dict({})
    if args.seed_override is not None:
        rc = rc.with_seed(args.seed_override)
    return rc


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"stochns: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = args.out_dir or out_dir_default()
    if args.threads < 1:
        print("stochns: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        rc = _load(args)
        if args.command == "simulate":
            return run_simulate(rc, out, args.threads, args.resume)
        if args.command == "verify":
            return run_verify(rc, out, args.suite, args.threads)
        if args.command == "sweep":
            return run_sweep(rc, out, args.threads)
        return run_structure(rc, out, args.checkpoints, args.threads)
    except ConfigError as exc:
        print("stochns: configuration error:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return 1
    except StochNSError as exc:
        print(f"stochns: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
