"""Command-line entry point ``banditgames``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ConfigError, UsageError
from .harness import ALGORITHMS, ENV_OUT, GAMES, execute, parse_config, summarize
from .library import certify


def _seeds(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="banditgames", description="Bandit learning dynamics in monotone games.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every seed of a config")
    run.add_argument("config", help="path to a JSON run config")
    run.add_argument("--seeds", type=_seeds, help="comma-separated seeds overriding the config")
    run.add_argument("--out", help=f"output root (default: config output_dir, ${ENV_OUT}, ./runs)")
    run.add_argument("--parallelism", type=int, default=1, help="worker processes")
    run.add_argument("--force", action="store_true", help="rerun seeds that already have output")
    run.add_argument("--summarize", action="store_true", help="write the summary after running")

    sm = sub.add_parser("summarize", help="aggregate a manifest's per-seed CSVs")
    sm.add_argument("manifest", help="path to manifest.json")

    sub.add_parser("list-games", help="show registered games")
    sub.add_parser("list-algorithms", help="show registered algorithms")

    cert = sub.add_parser("certify", help="print monotonicity, smoothness and kappa checks for a game")
    cert.add_argument("game", choices=sorted(GAMES))
    cert.add_argument("--params", default="{}", help="game parameters as JSON")
    cert.add_argument("--samples", type=int, default=2000)
    cert.add_argument("--seed", type=int, default=0)
    return p


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.seeds:
        cfg = cfg.with_seeds(args.seeds)
    manifest = execute(cfg, parallelism=args.parallelism, force=args.force, out=args.out)
    state = "cache hit" if manifest.cache_hit else "ran"
    print(f"{state}: {manifest.name} {manifest.config_hash[:12]} -> {manifest.directory}")
    for r in manifest.runs:
        extra = f"  {r['error']}" if r["error"] else ""
        print(f"  seed {r['seed']}: {r['status']}{extra}")
    if args.summarize and manifest.ok:
        rep = summarize(manifest)
        print(f"summary: {rep.csv_path}")
    return 0 if manifest.ok else 1


def _cmd_summarize(args) -> int:
    rep = summarize(args.manifest)
    with open(rep.text_path) as fh:
        sys.stdout.write(fh.read())
    return 0 if rep.status == "complete" else 2


def _cmd_certify(args) -> int:
    params = json.loads(args.params)
    if args.game == "matrix":
        params.setdefault("A", [[1.0, 2.0], [3.0, 4.0]])
    game = GAMES[args.game][0](params, 1000)
    if hasattr(game, "limit_game"):
        game = game.limit_game()
    report = certify(game, samples=args.samples, seed=args.seed)
    print(json.dumps(report, indent=2, default=lambda o: o.tolist() if isinstance(o, np.ndarray) else str(o)))
    ok = report["monotonicity_min"] >= -1e-9 and report["smoothness_ok"] and report.get("kappa_ok", True)
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        if args.command == "list-games":
            for name, (_, desc) in sorted(GAMES.items()):
                print(f"{name:<12} {desc}")
            return 0
        if args.command == "list-algorithms":
            for name, (games, desc) in sorted(ALGORITHMS.items()):
                print(f"{name:<15} [{games}] {desc}")
            return 0
        return _cmd_certify(args)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
