"""Command-line entry point: ``sim <subcommand> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .config import ConfigError, echo_text, load_config
from .demo import SUBCOMMANDS, write_demos
from .experiments import RunError, run
from .output import FORMATS, emit

EXIT_CONFIG, EXIT_RUN, EXIT_IO = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail({"error": "usage", "message": message}, EXIT_CONFIG)


def _fail(payload: dict, code: int):
    print(json.dumps(payload), file=sys.stderr)
    raise SystemExit(code)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sim", description="Two-ion crystal experiment simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, experiment in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {experiment} config")
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--format", choices=FORMATS, default="csv")
    v = sub.add_parser("validate", help="parse a config and print its normalized echo")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int)
    d = sub.add_parser("demo", help="write the reference configs")
    d.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "demo":
        try:
            paths = write_demos(args.out)
        except OSError as exc:
            _fail({"error": "io", "path": args.out, "message": str(exc)}, EXIT_IO)
        for p in paths:
            print(p)
        return 0
    try:
        cfg = load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        _fail(exc.as_dict(), EXIT_CONFIG)
    if args.command == "validate":
        sys.stdout.write(echo_text(cfg))
        return 0
    expected = SUBCOMMANDS[args.command]
    if cfg.experiment != expected:
        _fail({"error": "config", "path": "experiment",
               "message": f"subcommand {args.command} runs {expected}, config declares {cfg.experiment}"},
              EXIT_CONFIG)
    try:
        result = run(cfg)
    except RunError as exc:
        _fail(exc.as_dict(), EXIT_RUN)
    try:
        paths = emit(result, args.format, args.out)
    except OSError as exc:
        _fail({"error": "io", "path": getattr(exc, "filename", None) or args.out, "message": str(exc)}, EXIT_IO)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
