"""Command line: ``explore run``, ``explore batch`` and ``explore viz``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .batch import batch, parse_seeds
from .config import ConfigError, MissionConfig, load_config, parse_config
from .export import export_viz, load_manifest, render_overview, replay_rmse
from .mission import Outcome, run_any

log = logging.getLogger("real_explore")

EXIT_CODES = {Outcome.COMPLETE: 0, Outcome.STUCK: 2, Outcome.CRASH: 3}
EXIT_ERROR = 1


def _mission_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--world", required=True, help="world file or bundled world name")
    p.add_argument("--config", help="config file of key: value lines")
    p.add_argument("--no-lc", action="store_true", help="disable active loop closing")
    p.add_argument("--planner", choices=("real", "nearest_frontier"))
    p.add_argument("--debug-scores", action="store_true", help="log every score matrix")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")


def _build_config(args: argparse.Namespace) -> MissionConfig:
    cfg = load_config(args.config) if args.config else MissionConfig()
    if args.set:
        cfg = parse_config("\n".join(s.replace("=", ":", 1) for s in args.set), base=cfg)
    kw: dict = {"world": args.world}
    if args.no_lc:
        kw["lc_enabled"] = False
    if args.planner:
        kw["planner"] = args.planner
    if args.debug_scores:
        kw["debug_scores"] = True
    return cfg.replace(**kw)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args).replace(seed=args.seed)
    report, logs = run_any(cfg)
    if args.out:
        export_viz(report, logs, args.out, cfg)
    row = report.summary_row()
    print(",".join(row))
    print(",".join(row.values()))
    return EXIT_CODES[report.outcome]


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    summary = batch(cfg, parse_seeds(args.seeds))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary.write_csv(out / "summary.csv")
    print(summary.text())
    for r in summary.runs:
        if r.error:
            log.error("seed %d: %s", r.seed, r.error)
    return 0


def cmd_viz(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.run)
    rmse = replay_rmse(args.run)
    svg = render_overview(args.run)
    print(f"world: {manifest['world']}  seed: {manifest['seed']}")
    for f in manifest["files"]:
        print(f"  {f['name']:<16} {f['schema']}")
    print(f"rmse (from pose log): {rmse:.4f}")
    print(f"overview: {svg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="explore", description="Autonomous exploration in a simulated 3D world.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one mission")
    _mission_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for run artifacts")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run a mission for each seed and summarize")
    _mission_args(p)
    p.add_argument("--seeds", required=True, help="e.g. 1..10 or 1,4,7")
    p.add_argument("--out", help="directory for summary.csv")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("viz", help="inspect an exported run and draw an overview")
    p.add_argument("--run", required=True, help="run directory written by 'explore run --out'")
    p.set_defaults(func=cmd_viz)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
