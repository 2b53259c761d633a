"""Command line entry point: ``trifield run`` and ``trifield verify``."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .errors import ConfigError


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonnegative_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    ap = argparse.ArgumentParser(prog="trifield", description="Three-field solid, fluid and FSI solver.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation from a configuration file")
    r.add_argument("config", help="configuration file (INI syntax)")
    r.add_argument("--out", metavar="DIR", help="output directory (default: [output] dir)")
    r.add_argument("--vtk-every", metavar="N", type=_nonnegative_int,
                   help="write fields every N steps; 0 disables field output")
    r.add_argument("--max-steps", metavar="N", type=_positive_int, help="stop after N steps")
    r.add_argument("--deterministic", action="store_true", default=None,
                   help="serial assembly for bitwise reproducible output")

    v = sub.add_parser("verify", help="run acceptance suites")
    v.add_argument("suite", help="suite name or criterion number; one of: " + ", ".join(SUITES))
    v.add_argument("--report", metavar="FILE", help="also write the report to FILE")
    return ap


def _cmd_run(args) -> int:
    from .config import load_config
    from .runner import run

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: invalid configuration {args.config}:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return 2
    res = run(cfg, out_dir=args.out, vtk_every=args.vtk_every, max_steps=args.max_steps,
              deterministic=args.deterministic)
    stream = sys.stdout if res.exit_code == 0 else sys.stderr
    print(res.message, file=stream)
    for name, path in res.probe_files.items():
        print(f"probe {name}: {path}", file=stream)
    return res.exit_code


def _cmd_verify(args) -> int:
    from .verify import SUITES, format_report, run_suite

    if args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return 2
    results = run_suite(args.suite, echo=lambda msg: print(msg, flush=True))
    text = format_report(results)
    print(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
