"""Command-line entry point.

Exit codes: 0 safe / clean, 2 attack found or deniability, 3 inconclusive,
1 usage or input error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .dsl import ParseError, parse
from .model import goal_text, validate
from .search import (
    Attack, Inconclusive, ReplayError, SearchConfig, check_goals, format_trace, parse_trace,
    replay,
)

EXIT_OK, EXIT_ERROR, EXIT_ATTACK, EXIT_INCONCLUSIVE = 0, 1, 2, 3

log = logging.getLogger("bip70dy")


def fixture_names() -> list[str]:
    return sorted(p.name for p in resources.files("bip70dy.fixtures").iterdir() if p.name.endswith(".anbp"))


def _read_model(path: str) -> tuple[str, str]:
    p = Path(path)
    if p.exists():
        return p.read_text(encoding="utf-8"), str(p)
    name = path if path.endswith(".anbp") else path + ".anbp"
    if "/" not in path and name in fixture_names():
        return resources.files("bip70dy.fixtures").joinpath(name).read_text(encoding="utf-8"), name
    raise FileNotFoundError(path)


def _load(path: str):
    text, where = _read_model(path)
    try:
        spec = parse(text)
    except ParseError as e:
        print(f"{where}:{e.span}: {e}", file=sys.stderr)
        return None
    problems = validate(spec)
    if problems:
        for v in problems:
            print(f"{where}: {v}", file=sys.stderr)
        return None
    return spec


def cmd_check(args) -> int:
    spec = _load(args.model)
    if spec is None:
        return EXIT_ERROR
    cfg = SearchConfig(sessions=args.sessions, intruder_depth=args.depth, max_states=args.max_states,
                       intruder_roles=frozenset(args.corrupt) if args.corrupt else None,
                       typing=args.typing, workers=args.workers)
    unknown = set(args.corrupt or ()) - set(spec.roles)
    if unknown:
        print(f"error: unknown role(s) to corrupt: {', '.join(sorted(unknown))}", file=sys.stderr)
        return EXIT_ERROR
    results = check_goals(spec, cfg)
    attacks = [v for _, v in results if isinstance(v, Attack)]
    print(f"protocol={spec.name} sessions={cfg.sessions}")
    for i, (goal, verdict) in enumerate(results, 1):
        kind = type(verdict).__name__
        print(f"goal={i} verdict={kind} states={verdict.states_explored} text={goal_text(goal)}")
    for v in attacks:
        sys.stdout.write(format_trace(v.trace, spec))
    if attacks and args.trace_out:
        Path(args.trace_out).write_text(format_trace(attacks[0].trace, spec), encoding="utf-8")
    if attacks:
        print("result=Attack")
        return EXIT_ATTACK
    if any(isinstance(v, Inconclusive) for _, v in results):
        print("result=Inconclusive")
        return EXIT_INCONCLUSIVE
    print("result=Safe")
    return EXIT_OK


def cmd_replay(args) -> int:
    spec = _load(args.model)
    if spec is None:
        return EXIT_ERROR
    try:
        trace = parse_trace(Path(args.trace).read_text(encoding="utf-8"), spec)
        verdict = replay(spec, trace)
    except ReplayError as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as e:
        print(f"bad trace: {e}", file=sys.stderr)
        return EXIT_ERROR
    print(f"result=Attack goal={goal_text(verdict.goal)} steps={len(trace.steps)}")
    return EXIT_ATTACK


def cmd_scenario(args) -> int:
    from .bip70.scenario import run_silkroad_scenario
    report = run_silkroad_scenario(args.protocol, args.wallet, args.backend)
    print("\n".join(report.records()))
    return EXIT_ATTACK if report.deniability else EXIT_OK


def cmd_bench(args) -> int:
    from .bip70.bench import bench
    if args.iterations < 100:
        print(f"warning: {args.iterations} iterations; means will be noisy (use at least 100)",
              file=sys.stderr)
    table = bench(args.iterations, args.backend)
    print("\n".join(table.records()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .bip70.crypto import BACKENDS
    p = argparse.ArgumentParser(prog="bip70dy", description="BIP70 payment protocol analysis")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="search a protocol model for attacks")
    c.add_argument("model", help="path to a .anbp file, or the name of a bundled fixture")
    c.add_argument("--sessions", type=int, default=1, choices=(1, 2))
    c.add_argument("--depth", type=int, default=2, help="intruder composition depth (untyped search)")
    c.add_argument("--max-states", type=int, default=500_000)
    c.add_argument("--corrupt", nargs="+", metavar="ROLE", help="roles played by the intruder")
    c.add_argument("--typing", choices=("label", "type", "untyped"), default="label")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--trace-out", help="also write the first attack trace here")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("replay", help="re-execute a saved attack trace")
    r.add_argument("trace")
    r.add_argument("model")
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("scenario", help="run the Silkroad Trader scenario concretely")
    s.add_argument("--protocol", choices=("baseline", "endorsed", "merchant-bound"), default="baseline")
    s.add_argument("--wallet", choices=("honest", "malicious", "omit", "forge"), default="malicious")
    s.add_argument("--backend", choices=sorted(BACKENDS), default="secp256k1")
    s.set_defaults(func=cmd_scenario)

    b = sub.add_parser("bench", help="time each protocol step")
    b.add_argument("--iterations", type=int, default=100)
    b.add_argument("--backend", default="secp256k1")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: no such file: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
