"""
Command line entry point.

    tfpack run <config> [--profile desk|full] [--out DIR] [--seed N] [--override key=value ...]
    tfpack presets

``<config>`` is a TOML file or the name of a bundled preset. Progress goes to
standard error; data goes only to files under ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, build_config, load_config, parse_override, preset_names, preset_text
from .results import emit_results
from .runner import run_experiment

log = logging.getLogger("tfpack")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tfpack", description="Time-frequency packing link simulator")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more progress output")
    ap.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="TOML config file or bundled preset name")
    run.add_argument("--profile", choices=("desk", "full"), default="full")
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="set a dotted config key; repeatable")
    run.add_argument("--workers", type=int, default=None, help="parallel operating points")
    sub.add_parser("presets", help="list bundled presets")
    return ap


def _load(args):
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    path = Path(args.config)
    if path.is_file():
        return load_config(path, args.profile, overrides)
    if args.config in preset_names():
        layers = [(f"preset {args.config}", {"preset": args.config})]
        if overrides:
            layers.append(("--override", dict(parse_override(o) for o in overrides)))
        return build_config(layers, args.profile)
    raise ConfigError(f"{args.config}: no such file or bundled preset")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        for name in preset_names():
            first = preset_text(name).splitlines()[0].lstrip("# ")
            print(f"{name:24s} {first}")
        return EXIT_OK
    try:
        cfg = _load(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    try:
        rows = run_experiment(cfg, args.workers)
        paths = emit_results(rows, args.out, cfg)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        log.error("fatal: %s", exc, exc_info=args.verbose > 0)
        return EXIT_FATAL
    failed = sum(r.status == "failed" for r in rows)
    log.info("%d rows (%d failed) written to %s", len(rows), failed, paths["results"].parent)
    if rows and failed == len(rows):
        log.error("every operating point failed")
        return EXIT_ALL_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
