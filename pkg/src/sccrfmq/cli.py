"""Command-line entry point: ``sccrfmq run ...`` and ``sccrfmq colormap ...``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .core import ConfigError, UsageError
from .games import climbing_game, colormap_grid, stochastic_climbing_game
from .harness import (ALGOS, GAMES, emit_outputs, load_config, parse_items, run_experiment,
                      write_grid_csv, write_ppm)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sccrfmq", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded multi-run experiment")
    run.add_argument("--config", help="flat key=value file; command-line flags take precedence")
    run.add_argument("--game", choices=GAMES)
    run.add_argument("--algo", help=f"one algo or a comma list, one per agent ({', '.join(ALGOS)})")
    run.add_argument("--agents", type=int, choices=(1, 2))
    run.add_argument("--episodes", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--samples", type=int)
    run.add_argument("--workers", type=int, help="worker processes; runs are the unit of parallelism")
    run.add_argument("--out", help="output directory")
    run.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="learner/environment parameter override (repeatable)")

    cm = sub.add_parser("colormap", help="dump the expected-reward surface of a matrix game")
    cm.add_argument("--game", choices=("cg", "pscg"), default="cg")
    cm.add_argument("--resolution", type=int, default=101)
    cm.add_argument("--out", required=True, help="output file; .ppm writes an image, anything else CSV")
    return ap


def _cmd_run(args) -> int:
    params = parse_items(args.param)
    cfg = load_config(args.config, game=args.game, algo=args.algo, agents=args.agents,
                      episodes=args.episodes, runs=args.runs, seed=args.seed,
                      samples=args.samples, workers=args.workers, out=args.out, params=params)
    t0 = time.perf_counter()
    series = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    finals = series.final_cumavg()
    if cfg.out:
        emit_outputs(series, cfg)
    for r, v in enumerate(finals):
        print(f"run {r}: final cumulative average {v:.4f}")
    print(f"mean over {cfg.runs} runs: {finals.mean():.4f}  ({elapsed:.1f}s)")
    return 0


def _cmd_colormap(args) -> int:
    game = climbing_game() if args.game == "cg" else stochastic_climbing_game()
    grid = colormap_grid(game, args.resolution)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    if out.suffix.lower() == ".ppm":
        write_ppm(out, grid)
    else:
        write_grid_csv(out, grid)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_colormap(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
