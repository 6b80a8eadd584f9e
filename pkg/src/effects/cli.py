"""Command-line front end.

One subcommand per workbench surface: eval, equiv, law, assert, actor.
Reports are line-oriented `key: value` records followed by the verdict or
outcome; everything except the time line is byte-reproducible for a fixed
seed.  Exit codes: 0 holds/success, 1 fails (witness printed), 2 unknown,
3 usage or parse errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

from . import actors as act
from .equivalence import (
    DEFAULT_CONFIG,
    EnumConfig,
    FIRST_ORDER_SORTS,
    Verdict,
    ciu_test,
    strong_iso,
)
from .laws import LAWS, law_check
from .logic import check_valid, read_assertions
from .memory import EMPTY, to_literal
from .reducer import Description, StuckAt, Timeout, Value, eval_with_trace, run
from .syntax import ParseError, parse, to_text

EXIT_HOLDS = 0
EXIT_FAILS = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3


def _default_seed() -> int:
    try:
        return int(os.environ.get("EFFECTS_SEED", "0"))
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="effects",
        description="semantics workbench: evaluation, equivalence oracles, "
        "law checking, assertions, actor simulation",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="reduce an expression")
    ev.add_argument("file", nargs="?", help="file with one expression, or - for stdin")
    ev.add_argument("-e", "--expr", help="inline expression")
    ev.add_argument("--max-steps", type=int, default=2000)
    ev.add_argument("--trace", action="store_true", help="print each description")

    eq = sub.add_parser("equiv", help="compare two expressions")
    eq.add_argument("--method", choices=("strong-iso", "ciu"), default="strong-iso")
    eq.add_argument("--value-depth", type=int, default=2)
    eq.add_argument("--cells", type=int, default=3)
    eq.add_argument("--ctx-depth", type=int, default=2)
    eq.add_argument("--max-steps", type=int, default=2000)
    eq.add_argument("--seed", type=int, default=None)
    eq.add_argument("--first-order", action="store_true",
                    help="restrict generated values to first-order data")
    eq.add_argument("left")
    eq.add_argument("right")

    lw = sub.add_parser("law", help="check laws from the catalog")
    g = lw.add_mutually_exclusive_group(required=True)
    g.add_argument("--name", choices=sorted(LAWS))
    g.add_argument("--all", action="store_true")
    lw.add_argument("--cases", type=int, default=None)
    lw.add_argument("--seed", type=int, default=None)
    lw.add_argument("--max-steps", type=int, default=2000)

    asrt = sub.add_parser("assert", help="check formulas from a file")
    asrt.add_argument("file")
    asrt.add_argument("--value-depth", type=int, default=2)
    asrt.add_argument("--cells", type=int, default=3)
    asrt.add_argument("--max-steps", type=int, default=2000)
    asrt.add_argument("--seed", type=int, default=None)

    ac = sub.add_parser("actor", help="run or observe a configuration")
    ac.add_argument("mode", choices=("run", "observe"))
    ac.add_argument("config", help="configuration file")
    ac.add_argument("--scheduler", default="rr",
                    help="rr | random | path to a script file")
    ac.add_argument("--seed", type=int, default=None)
    ac.add_argument("--samples", type=int, default=64)
    ac.add_argument("--max-steps", type=int, default=2000)
    ac.add_argument("--window", type=int, default=8)
    return p


def _read_source(args) -> str:
    if args.expr is not None:
        return args.expr
    if args.file in (None, "-"):
        return sys.stdin.read()
    with open(args.file) as fh:
        return fh.read()


def _config_from(args, **extra) -> EnumConfig:
    seed = args.seed if getattr(args, "seed", None) is not None else _default_seed()
    cfg = replace(
        DEFAULT_CONFIG,
        value_depth=getattr(args, "value_depth", DEFAULT_CONFIG.value_depth),
        max_cells=getattr(args, "cells", DEFAULT_CONFIG.max_cells),
        ctx_depth=getattr(args, "ctx_depth", DEFAULT_CONFIG.ctx_depth),
        max_steps=getattr(args, "max_steps", DEFAULT_CONFIG.max_steps),
        seed=seed,
        **extra,
    )
    if getattr(args, "first_order", False):
        cfg = replace(cfg, value_sorts=FIRST_ORDER_SORTS)
    return cfg


def _echo_config(cfg: EnumConfig) -> None:
    print(
        f"config: value-depth={cfg.value_depth} cells={cfg.max_cells} "
        f"ctx-depth={cfg.ctx_depth} max-steps={cfg.max_steps} seed={cfg.seed}"
    )


def _verdict_exit(v: Verdict) -> int:
    if v.holds:
        return EXIT_HOLDS
    if v.fails:
        return EXIT_FAILS
    return EXIT_UNKNOWN


def _print_verdict(v: Verdict) -> None:
    print(f"cases: {v.cases} definite: {v.definite} timeouts: {v.timeouts}")
    if v.fails:
        print(f"FAILS {v.witness}")
    elif v.unknown:
        print(f"UNKNOWN {v.reason}")
    else:
        print("HOLDS")


def cmd_eval(args) -> int:
    e = parse(_read_source(args))
    print("command: eval")
    print(f"config: max-steps={args.max_steps}")
    d = Description(EMPTY, e)
    if args.trace:
        out, trace = eval_with_trace(d, args.max_steps)
        for step_d in trace:
            print(f"{step_d.memory} |- {to_text(step_d.expr)}")
    else:
        out = run(d, args.max_steps)
    match out:
        case Value(v, m, steps):
            print(f"VALUE {to_text(v)}")
            print(f"memory: {to_literal(m)}")
            print(f"steps: {steps}")
            return EXIT_HOLDS
        case StuckAt(at, steps):
            print(f"STUCK {to_text(at.expr)}")
            print(f"memory: {to_literal(at.memory)}")
            print(f"steps: {steps}")
            return EXIT_FAILS
        case Timeout(steps):
            print(f"TIMEOUT {steps}")
            return EXIT_UNKNOWN


def cmd_equiv(args) -> int:
    cfg = _config_from(args)
    left, right = parse(args.left), parse(args.right)
    print(f"command: equiv --method {args.method}")
    _echo_config(cfg)
    oracle = strong_iso if args.method == "strong-iso" else ciu_test
    started = time.perf_counter()
    v = oracle(left, right, cfg)
    elapsed = time.perf_counter() - started
    _print_verdict(v)
    print(f"time: {elapsed:.3f}s")
    return _verdict_exit(v)


def cmd_law(args) -> int:
    cfg = _config_from(args)
    names = sorted(LAWS) if args.all else [args.name]
    print(f"command: law {'--all' if args.all else '--name ' + args.name}")
    _echo_config(cfg)
    code = EXIT_HOLDS
    started = time.perf_counter()
    for name in names:
        law = LAWS[name]
        v = law_check(law, cfg, cases=args.cases)
        as_expected = "as expected" if v.tag == law.expected else "UNEXPECTED"
        print(f"law {name}: {v.tag.upper()} (expected {law.expected}, {as_expected}) "
              f"cases={v.cases} definite={v.definite} timeouts={v.timeouts}")
        if v.fails:
            print(f"  witness: {v.witness}")
        code = max(code, _verdict_exit(v))
    print(f"time: {time.perf_counter() - started:.3f}s")
    return code


def cmd_assert(args) -> int:
    cfg = _config_from(args)
    with open(args.file) as fh:
        classes, formulas = read_assertions(fh.read())
    print(f"command: assert {args.file}")
    _echo_config(cfg)
    code = EXIT_HOLDS
    started = time.perf_counter()
    for i, phi in enumerate(formulas, start=1):
        v = check_valid(phi, cfg, classes)
        tagline = str(v) if not v.holds else "HOLDS"
        print(f"formula {i}: {tagline} (cases={v.cases} timeouts={v.timeouts})")
        code = max(code, _verdict_exit(v))
    print(f"time: {time.perf_counter() - started:.3f}s")
    return code


def _make_scheduler(args):
    if args.scheduler == "rr":
        return act.RoundRobinFair(window=args.window)
    if args.scheduler == "random":
        seed = args.seed if args.seed is not None else _default_seed()
        return act.RandomScheduler(seed)
    with open(args.scheduler) as fh:
        return act.ScriptedScheduler(act.parse_script(fh.read()))


def cmd_actor(args) -> int:
    with open(args.config) as fh:
        config = act.parse_config(fh.read())
    print(f"command: actor {args.mode} {args.config}")
    if args.mode == "run":
        sched = _make_scheduler(args)
        trace, final = act.run(config, sched, args.max_steps)
        for label in trace:
            print(label)
        print(f"final: {final}")
        print(f"transitions: {len(trace)}")
        return EXIT_HOLDS
    seed = args.seed if args.seed is not None else _default_seed()
    report = act.observe_event(
        config, args.samples, args.max_steps,
        seeds=range(seed, seed + args.samples),
    )
    print(f"observation: {report.classification}")
    print(f"runs-with-event: {report.runs_with_event}/{report.samples}")
    for tag in sorted(report.tag_counts):
        print(f"  tag {tag or '(untagged)'}: {report.tag_counts[tag]}")
    return EXIT_HOLDS


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        handler = {
            "eval": cmd_eval,
            "equiv": cmd_equiv,
            "law": cmd_law,
            "assert": cmd_assert,
            "actor": cmd_actor,
        }[args.command]
        return handler(args)
    except (ParseError, act.ScriptError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
