"""Command line entry point: ``chainacl-sim`` / ``python -m chainacl``.

Exit status: 0 on success, 1 on divergence or a chain violation, 2 on usage
or input errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..ledger import verify_chain_lines
from .engine import SimulationError, Trace, replay, run
from .report import dump_policy_matrix, render_figures
from .scenario import ScenarioError, generate_scenario, load_scenario

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    try:
        result = run(scenario, args.seed)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.trace:
        Path(args.trace).write_bytes(result.trace_lines())
    if args.chain:
        Path(args.chain).write_bytes(result.chain.to_lines())
    if args.metrics:
        Path(args.metrics).write_bytes(result.metrics_json())
    else:
        sys.stdout.write(result.metrics_json().decode("utf-8"))
    if args.figures:
        for path in render_figures(result, Path(args.figures)):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    trace = Trace.load(args.trace)
    scenario = load_scenario(args.scenario)
    try:
        divergence = replay(trace, scenario, replicas=args.replicas)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if divergence is None:
        print("OK")
        return EXIT_OK
    print(f"DIVERGENCE at {divergence.index}: {divergence.reason}")
    return EXIT_VIOLATION


def _cmd_matrix(args: argparse.Namespace) -> int:
    sys.stdout.write(dump_policy_matrix())
    return EXIT_OK


def _cmd_verify_chain(args: argparse.Namespace) -> int:
    report = verify_chain_lines(Path(args.chain_file).read_bytes())
    if report is None:
        print("OK")
        return EXIT_OK
    print(f"VIOLATION at block {report.index}: {report.reason}")
    return EXIT_VIOLATION


def _cmd_generate(args: argparse.Namespace) -> int:
    members = [int(m) for m in args.members.split(",")] if args.members else None
    scenario = generate_scenario(args.n, args.events, args.seed, members)
    text = scenario.to_text()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainacl-sim", description="Blockchain access-control overlay simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario")
    p.add_argument("scenario")
    p.add_argument("--trace", help="write the JSON-lines trace here")
    p.add_argument("--metrics", help="write metrics JSON here (default: stdout)")
    p.add_argument("--chain", help="write the block-lines chain dump here")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--figures", help="directory for PNG figures")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="re-run a scenario and compare with a trace")
    p.add_argument("trace")
    p.add_argument("scenario")
    p.add_argument("--replicas", type=int, default=0, help="also check this many independent replicas")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("matrix", help="print the policy tables")
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("verify-chain", help="check a block-lines chain dump")
    p.add_argument("chain_file")
    p.set_defaults(func=_cmd_verify_chain)

    p = sub.add_parser("generate", help="write a random valid scenario")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--events", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--members", help="comma-separated initial group sizes")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
