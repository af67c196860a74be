"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 config error, 4 a scenario or
self-check assertion failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import adversary, replay, winkle
from .crypto import Keypair
from .records import Transfer, make_txn
from .vm import VM, VMConfig

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_ASSERT = 0, 2, 3, 4
DEMO_FORMAT = "shortleash-demo-chain/1"


class ConfigError(Exception):
    pass


class CheckFailed(Exception):
    pass


def bundled_fixtures() -> list[str]:
    root = resources.files("shortleash") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(name: str) -> dict:
    """Read ``name`` as a path, or as the name of a bundled fixture."""
    path = Path(name)
    if path.is_file():
        text = path.read_text()
    else:
        res = resources.files("shortleash") / "fixtures" / f"{name}.json"
        if not res.is_file():
            raise ConfigError(f"no such config file or bundled fixture: {name}")
        text = res.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{name}: bad JSON: {e}") from None


def _emit(args, text: str, report: str | None = None) -> None:
    if args.out:
        Path(args.out).write_text(report if report is not None else text)
    sys.stdout.write(text)


def _scenario(args) -> adversary.Scenario:
    data = load_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.window is not None:
        data["window"] = args.window
    if args.recent is not None:
        data["recent_window"] = args.recent
    try:
        return adversary.Scenario.from_dict(data)
    except adversary.ScenarioError as e:
        raise ConfigError(str(e)) from None


def cmd_run_scenario(args, hard_fork: bool = False) -> int:
    s = _scenario(args)
    try:
        run = adversary.run_hard_fork_scenario if hard_fork else adversary.run_scenario
        report = run(s)
    except adversary.ScenarioError as e:
        raise ConfigError(str(e)) from None
    except (adversary.ScenarioAssertion, adversary.EclipseViolation) as e:
        raise CheckFailed(str(e)) from None
    text = report.summary() if not args.json else report.to_json()
    _emit(args, text, report.to_json())
    failures = report.check_expectations()
    if failures:
        raise CheckFailed("; ".join(failures))
    return EXIT_OK


def _demo(args) -> tuple[dict, list[dict]]:
    data = load_config(args.config)
    if data.get("format") != DEMO_FORMAT:
        raise ConfigError(f"{args.config}: expected format {DEMO_FORMAT!r}")
    fixes = [dict(f) for f in data.get("fixes", [])]
    if not fixes:
        raise ConfigError(f"{args.config}: no fixes listed")
    if args.z is not None:
        fixes[0]["z"] = args.z
    return data, fixes


def cmd_replay_fork(args) -> int:
    data, fixes = _demo(args)
    seed = data.get("seed", 0) if args.seed is None else args.seed
    demo = replay.build_demo_chain(data.get("blocks", 20), seed)
    chain = demo.chain
    if args.window is not None:
        chain.window = args.window
    out, report = [], {"format": "shortleash-replay/1", "name": data.get("name"), "forks": []}
    try:
        for n, fix in enumerate(fixes):
            vm = VM(VMConfig(**fix.get("vm", {})))
            result = replay.replay_from(chain, int(fix["z"]), vm)
            rows = result.pointer_table()
            out.append(f"fork {n + 1}: replay from z = {fix['z']}, {len(result.swizzle)} swizzled pairs")
            out.append(result.table())
            report["forks"].append({"z": fix["z"], "vm": fix.get("vm", {}), "rows": rows,
                                    "swizzle": result.swizzle.to_dict()})
            if not all(r["stable"] for r in rows):
                raise CheckFailed(f"fork {n + 1}: unstable parent pointers")
            chain = result.forked
    except (TypeError, KeyError, replay.IndexOutOfRange) as e:
        raise ConfigError(f"bad fix: {e}") from None
    _emit(args, "\n".join(out), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_winkle_count(args) -> int:
    shapes = winkle.SHAPES if args.shape == "both" else (args.shape,)
    if args.k < 0:
        raise ConfigError("--k must be non-negative")
    lines = []
    if args.table:
        lines.append(f"{'k':>3} {'shape':<12} {'count':>12} {'ceil(k!e)':>12}")
        for shape in shapes:
            for k, count, ceil in winkle.count_table(args.k, shape):
                lines.append(f"{k:>3} {shape:<12} {count:>12} {ceil:>12}")
    else:
        for shape in shapes:
            try:
                count = winkle.count_closed_form(args.k, shape, k_limit=args.k_limit)
            except winkle.CountOverflow as e:
                raise ConfigError(str(e)) from None
            lines.append(str(count) if len(shapes) == 1 else f"{shape}: {count}")
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_winkle_amounts(args) -> int:
    seed = 0 if args.seed is None else args.seed
    fx = winkle.parity_fixture(seed)
    names = {fx.t1: "t1", fx.t2: "t2"}
    lines = [f"{'schedule':<10} {'W_S':>10} {'W_R':>10}"]
    for sched in winkle.acceptable_schedules(fx.base):
        a = winkle.adversary_amounts(sched, fx.db, fx.adversary)
        label = "(" + ",".join(names[t] for t in sched) + ")"
        lines.append(f"{label:<10} {a.sent:>10} {a.received:>10}")
    try:
        ext = winkle.amounts_over_all_schedules(fx.base, fx.db, fx.adversary, k_limit=args.k_limit)
    except winkle.TooLarge as e:
        raise ConfigError(str(e)) from None
    full = winkle.adversary_amounts(fx.base, fx.db, fx.adversary).received
    lines.append(f"W_R over all schedules: min {ext.min_received}, max {ext.max_received}; full schedule {full}")
    lines.append("the empty schedule is included (an empty block is always acceptable)")
    _emit(args, "\n".join(lines) + "\n", json.dumps(ext.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_selftest(args) -> int:
    checks = []
    report = adversary.run_scenario(adversary.Scenario.from_dict(load_config("canonical_lra")))
    checks.append(("canonical scenario", not report.check_expectations()))
    checks.append(("winkle k=6", winkle.count_closed_form(6) == 1957 == len(list(
        winkle.acceptable_schedules(_independent_txns(6))))))
    fx = winkle.parity_fixture()
    checks.append(("parity counterexample",
                   winkle.adversary_amounts(fx.base, fx.db, fx.adversary).received == 1
                   and winkle.adversary_amounts((fx.t2,), fx.db, fx.adversary).received == 1_000_000))
    demo, first, second = replay.demo_double_fork()
    checks.append(("replay pointers", all(r["stable"] for r in first.pointer_table() + second.pointer_table())))
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if not all(ok for _, ok in checks):
        raise CheckFailed("selftest failed")
    return EXIT_OK


def _independent_txns(k: int):
    keys = [Keypair.derive(f"sender-{i}") for i in range(k)]
    return [make_txn(key, 0, Transfer(1, 1)) for key in keys]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shortleash", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config: bool = True):
        if config:
            sp.add_argument("config", help="config file or bundled fixture name")
        sp.add_argument("--seed", type=int, help="override the config's seed")
        sp.add_argument("--out", help="write the structured report here")
        return sp

    for name, helptext in (("run-scenario", "run an attack scenario"),
                           ("run-fork-scenario", "run a hard-fork scenario")):
        sp = common(sub.add_parser(name, help=helptext))
        sp.add_argument("--window", type=int, help="BLOCKHASH window W")
        sp.add_argument("--recent", type=int, help="recent committee window r")
        sp.add_argument("--json", action="store_true", help="print the JSON report instead of the table")

    sp = common(sub.add_parser("replay-fork", help="replay a chain under fixed semantics"))
    sp.add_argument("--z", type=int, help="override the first fix's replay height")
    sp.add_argument("--window", type=int, help="BLOCKHASH window W")

    sp = common(sub.add_parser("winkle-count", help="count acceptable schedules"), config=False)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--shape", choices=winkle.SHAPES + ("both",), default=winkle.INDEPENDENT)
    sp.add_argument("--table", action="store_true", help="print every k up to --k")
    sp.add_argument("--k-limit", type=int, default=winkle.COUNT_K_LIMIT)

    sp = common(sub.add_parser("winkle-amounts", help="W_S/W_R over the parity counterexample"), config=False)
    sp.add_argument("--k-limit", type=int, default=winkle.DEFAULT_K_LIMIT)

    common(sub.add_parser("selftest", help="quick end-to-end checks"), config=False)
    sub.add_parser("list-fixtures", help="list bundled fixtures")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    handlers = {
        "run-scenario": cmd_run_scenario,
        "run-fork-scenario": lambda a: cmd_run_scenario(a, hard_fork=True),
        "replay-fork": cmd_replay_fork,
        "winkle-count": cmd_winkle_count,
        "winkle-amounts": cmd_winkle_amounts,
        "selftest": cmd_selftest,
        "list-fixtures": lambda a: print("\n".join(bundled_fixtures())) or EXIT_OK,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailed as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_ASSERT
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
