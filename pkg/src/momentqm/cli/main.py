"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys

from .. import __version__
from .config import schema_document
from .runner import THREADS_ENV, run, suite


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _threads(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return v


def parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_threads, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=_seed, default=None, help="override the configuration seed")
    common.add_argument("--out", default=None, help="output directory (default: runs/<name>)")
    p = argparse.ArgumentParser(prog="momentqm", description="Moment-map quasimorphism experiments.")
    p.add_argument("--version", action="version", version=f"momentqm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one scenario configuration")
    r.add_argument("config")
    s = sub.add_parser("suite", parents=[common], help="run every *.toml in a directory")
    s.add_argument("directory")
    sub.add_parser("schema", help="print the configuration schemas as JSON")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.command == "schema":
        json.dump(schema_document(), sys.stdout, indent=2)
        print()
        return 0
    if args.command == "run":
        return run(args.config, args.out, args.seed, args.threads).exit_code
    return suite(args.directory, args.out, args.seed, args.threads)
