"""Command-line entry point.

Subcommands:
    run     execute one catalog scenario, optionally exporting CSV/summary
    list    print the scenario catalog
    serve   start the live steering service for a scenario
    replay  re-run a scenario applying a recorded command file
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import scenarios
from .errors import ScenarioError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfclab",
        description="Networked model-free control laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a catalog scenario")
    run.add_argument("--scenario", required=True, metavar="NAME")
    run.add_argument("--mode", choices=("sim", "udp"), default="sim")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", metavar="TRACE.CSV", default=None)
    run.add_argument("--summary", metavar="OUT.TXT", default=None)
    run.add_argument("--estimator", choices=("algebraic", "closedloop"),
                     default=None)
    run.add_argument("--joy-script", metavar="FILE", default=None,
                     help="override the scripted joystick input (t,axis lines)")

    sub.add_parser("list", help="list available scenarios")

    serve = sub.add_parser("serve", help="serve a scenario with live steering")
    serve.add_argument("--port", type=int, required=True)
    serve.add_argument("--scenario", required=True, metavar="NAME")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--seed", type=int, default=None)
    serve.add_argument("--fast", action="store_true",
                       help="tick flat out instead of pacing to wall time")

    rep = sub.add_parser("replay", help="re-run a recorded command file")
    rep.add_argument("--scenario", required=True, metavar="NAME")
    rep.add_argument("--commands", required=True, metavar="FILE")
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--out", metavar="TRACE.CSV", default=None)
    return parser


def _load_commands(path: str) -> list[tuple[int, str, tuple]]:
    rows = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#") or line == "tick,cmd,value":
                continue
            parts = line.split(",", 2)
            if len(parts) != 3:
                raise ScenarioError(f"{path}:{i}: expected 'tick,cmd,value'")
            tick, cmd, value = parts
            values = tuple(float(v) for v in value.split()) if value else ()
            rows.append((int(tick), cmd, values))
    return rows


def _cmd_run(args) -> int:
    spec = scenarios.build_scenario(args.scenario)
    if args.joy_script is not None:
        if spec.joystick is None:
            print(f"error: scenario {spec.name} takes no joystick input",
                  file=sys.stderr)
            return 2
        joy = replace(spec.joystick,
                      script=scenarios.load_joystick_script(args.joy_script))
        spec = replace(spec, joystick=joy)
    result = scenarios.run_scenario(spec, mode=args.mode, seed=args.seed,
                                    estimator=args.estimator)
    metrics = scenarios.evaluate(result.trace, result.spec,
                                 result.realized_rates)
    if args.out:
        scenarios.export_csv(result.trace, args.out)
    if args.summary:
        scenarios.export_summary(metrics, args.summary)
    print(f"{result.spec.name}: {len(result.trace)} ticks, "
          f"rmse={metrics.rmse:.4g}, iae={metrics.iae:.4g}, "
          f"loss={metrics.realized_loss_1:.1f}%/{metrics.realized_loss_2:.1f}%")
    return 0


def _cmd_list() -> int:
    for name in scenarios.scenario_names():
        print(f"{name:12s} {scenarios.CATALOG[name].description}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    spec = scenarios.build_scenario(args.scenario)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    serve(spec, host=args.host, port=args.port,
          pace="fast" if args.fast else "realtime")
    return 0


def _cmd_replay(args) -> int:
    spec = scenarios.build_scenario(args.scenario)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    commands = _load_commands(args.commands)
    result = scenarios.run_with_commands(spec, commands)
    if args.out:
        scenarios.export_csv(result.trace, args.out)
    print(f"replayed {spec.name}: {len(result.trace)} ticks, "
          f"{len(commands)} commands")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list":
            return _cmd_list()
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "replay":
            return _cmd_replay(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
