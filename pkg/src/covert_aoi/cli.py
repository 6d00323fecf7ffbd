"""Command-line entry point: ``covert-aoi <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex


def _scenario(conf: ex.ExperimentConfig, args, **overrides):
    changes = dict(overrides)
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    return replace(conf.scenario, **changes)


def _trials(conf, args, section):
    if args.trials is not None:
        return args.trials
    return conf.value(section, "trials", int) if "trials" in conf.section(section) else ex.DEFAULT_TRIALS


def cmd_solve(conf, args):
    cfg = _scenario(conf, args)
    text = ex.dump_json(ex.solve_report(cfg, cfg.rng_seed), args.out)
    if args.out is None:
        sys.stdout.write(text)


def cmd_sweep_users(conf, args):
    spec = ex.SweepSpec(
        "num_users",
        tuple(int(v) for v in conf.floats("sweep_users", "values")),
        trials=_trials(conf, args, "sweep_users"),
        base=_scenario(conf, args),
        companion=conf.floats("sweep_users", "power_budgets"),
    )
    for p in ex.emit_sweep(ex.sweep_users(spec), args.out, "sweep_users"):
        print(p)


def cmd_sweep_power(conf, args):
    sec = conf.section("sweep_power")
    extra = {"num_users": int(sec["num_users"])} if "num_users" in sec else {}
    spec = ex.SweepSpec(
        "power_budget",
        conf.floats("sweep_power", "values"),
        trials=_trials(conf, args, "sweep_power"),
        base=_scenario(conf, args, **extra),
        companion=conf.floats("sweep_power", "willie_distances"),
    )
    for p in ex.emit_sweep(ex.sweep_power(spec), args.out, "sweep_power"):
        print(p)


def cmd_fig5(conf, args):
    sec = conf.section("fig5")
    extra = {"num_users": 3}
    if "power_budget" in sec:
        extra["power_budget"] = float(sec["power_budget"])
    cfg = _scenario(conf, args, **extra)
    slots = int(sec.get("num_slots", 100))
    res = ex.run_fig5(cfg, cfg.rng_seed, slots, args.out)
    for p in res.paths:
        print(p)


COMMANDS = {
    "solve": (cmd_solve, "solve one random scenario and print the result as JSON"),
    "sweep-users": (cmd_sweep_users, "average AoI versus number of users"),
    "sweep-power": (cmd_sweep_power, "Willie's minimum error versus power budget"),
    "fig5": (cmd_fig5, "paired AoC-aware / static slot traces"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covert-aoi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="INI file (built-in defaults if omitted)")
        p.add_argument("--seed", type=int, help="overrides scenario.rng_seed")
        p.add_argument("--out", type=Path, help="output file (solve) or directory")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command != "solve" and args.out is None:
        print(f"covert-aoi {args.command}: --out is required", file=sys.stderr)
        return 2
    if args.trials is not None and args.trials < 1:
        print("--trials must be >= 1", file=sys.stderr)
        return 2
    try:
        conf = ex.load_config(args.config)
        COMMANDS[args.command][0](conf, args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"covert-aoi {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
