"""Command line: ``randexp list | run | validate``.

Exit codes: 0 success (any verdict), 1 invalid configuration, 2 a diagnostic
or the report output failed. ``RANDEXP_OUTPUT_DIR`` sets the directory used
when ``--out`` is not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .report import write_report
from .scenarios import BUILTINS, run_scenario

OUTPUT_DIR_ENV = "RANDEXP_OUTPUT_DIR"

EXIT_OK, EXIT_INVALID, EXIT_INFRA = 0, 1, 2


def _print_errors(err: ConfigError) -> None:
    for path, msg in err.errors:
        print(f"invalid: {path}: {msg}", file=sys.stderr)


def cmd_list(args) -> int:
    for name, doc in BUILTINS.items():
        print(f"{name}\t{doc['description']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.source)
    except ConfigError as err:
        _print_errors(err)
        return EXIT_INVALID
    print(f"ok: {cfg.name} ({len(cfg.diagnostics)} diagnostics)")
    return EXIT_OK


def _output_path(args, name: str, fmt: str) -> Path | None:
    if args.out:
        return Path(args.out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        return None
    return Path(base) / (f"{name}.json" if fmt == "json" else name)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.source)
    except ConfigError as err:
        _print_errors(err)
        return EXIT_INVALID
    fmt = args.format or cfg.output.format
    report = run_scenario(cfg, seed=args.seed)
    out = _output_path(args, cfg.name, fmt)
    if out is None and cfg.output.path and not args.out:
        out = Path(cfg.output.path)
    try:
        paths = write_report(report, fmt, out)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_INFRA
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    for r in report.results:
        status = r["verdict"] if r["status"] == "ok" else f"ERROR {r.get('error')}"
        print(f"{r['index']:2d} {r['kind']:<18} {status}", file=sys.stderr)
    return EXIT_INFRA if report.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randexp", description="Random expansive measure diagnostics")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)
    r = sub.add_parser("run", help="run a built-in scenario or a JSON config")
    r.add_argument("source", help="built-in name or path to a scenario JSON file")
    r.add_argument("--out", help="output file (json) or directory (csv)")
    r.add_argument("--format", choices=["json", "csv"])
    r.add_argument("--seed", type=int, help="override every diagnostic seed")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="validate a scenario JSON file")
    v.add_argument("source")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
