"""Command line front end: gen, run, breakdown, compare."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import analysis, simgen
from .exporter import load_jsonl
from .model import SpanweaveError
from .parsers import IoError
from .wiring import ConfigError, build_and_run, load_config

log = logging.getLogger("spanweave")


def _setup_logging() -> None:
    level_name = os.environ.get("SPANWEAVE_LOG", "").upper()
    if not level_name:
        return
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


def _emit(document: dict, out_path: str | None) -> None:
    text = json.dumps(document, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _cmd_gen(args: argparse.Namespace) -> int:
    result = simgen.generate(args.scenario, args.seed, args.requests, args.out, args.dq_us)
    log.info("generated %d requests under %s", result.requests, result.out_dir)
    _emit(result.as_dict(), None)
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    stats = build_and_run(cfg, mode=args.mode, fmt=args.format, out=args.out)
    _emit(stats.as_dict(), None)
    return 0


def _cmd_breakdown(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    spans = load_jsonl(args.export)
    if args.trace:
        document = analysis.breakdown(spans, cfg, args.trace).as_dict()
    else:
        document = analysis.aggregate(spans, cfg).as_dict()
    _emit(document, args.out)
    return 0


def _load_breakdown(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read breakdown {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a breakdown document: {exc}") from exc


def _cmd_compare(args: argparse.Namespace) -> int:
    result = analysis.compare(_load_breakdown(args.a), _load_breakdown(args.b))
    _emit(result, args.out)
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanweave",
        description="Reconstruct distributed traces from component simulator logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic scenario with ground truth")
    p_gen.add_argument("scenario", choices=simgen.SCENARIOS)
    p_gen.add_argument("--seed", type=int, default=42)
    p_gen.add_argument("-n", "--requests", type=int, default=10)
    p_gen.add_argument("-o", "--out", required=True, help="output directory")
    p_gen.add_argument(
        "--dq-us", type=int, default=50, help="extra switch0 response delay under load"
    )
    p_gen.set_defaults(func=_cmd_gen)

    p_run = sub.add_parser("run", help="parse, weave and export one configured run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--format", choices=("jaeger", "jsonl"), default=None)
    p_run.add_argument("--out", default=None, help="export path override")
    p_run.add_argument("--mode", choices=("single", "threaded"), default=None)
    p_run.set_defaults(func=_cmd_run)

    p_bd = sub.add_parser("breakdown", help="per-component latency breakdown")
    p_bd.add_argument("export", help="JSONL export to analyze")
    p_bd.add_argument("--config", required=True)
    p_bd.add_argument("--trace", default=None, help="trace id; default aggregates all")
    p_bd.add_argument("--out", default=None, help="also write the JSON document here")
    p_bd.set_defaults(func=_cmd_breakdown)

    p_cmp = sub.add_parser("compare", help="delta table between two breakdowns")
    p_cmp.add_argument("a", help="baseline breakdown JSON")
    p_cmp.add_argument("b", help="comparison breakdown JSON")
    p_cmp.add_argument("--out", default=None)
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"spanweave: config error: {exc}", file=sys.stderr)
        return 2
    except SpanweaveError as exc:
        print(f"spanweave: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
