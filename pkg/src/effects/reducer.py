"""Small-step and big-step evaluation of descriptions.

A description pairs a memory with a running expression.  `step` performs
exactly one rule application (a beta_v step or one primitive delta) by
decomposing the expression each time; `run` drives an equivalent frame-stack
machine that keeps the decomposition incremental, which matters once step
counts reach the tens of thousands.  The two agree step for step, and the
test suite checks that on generated terms.

Actor primitives do not reduce here: send/become/letactor/event only mean
something inside a configuration (see actors), so the sequential reducer
treats them as stuck.
"""

from __future__ import annotations

from dataclasses import dataclass

from .memory import EMPTY, Memory
from .syntax import (
    Add1,
    App,
    Atom,
    Become,
    Cellp,
    Eq,
    Event,
    Expr,
    Fst,
    Get,
    Hole,
    If,
    Lam,
    Let,
    Letactor,
    Mark,
    Mk,
    Nat,
    Natp,
    NIL,
    Pair,
    Send,
    Seq,
    SetCell,
    Snd,
    Sub1,
    TRUE,
    Var,
    all_names,
    decompose,
    is_value,
    plug,
    substitute,
    to_text,
)


@dataclass(frozen=True, slots=True)
class Description:
    memory: Memory
    expr: Expr

    def __str__(self) -> str:
        return f"{self.memory} |- {to_text(self.expr)}"


@dataclass(frozen=True, slots=True)
class Value:
    value: Expr
    memory: Memory
    steps: int


@dataclass(frozen=True, slots=True)
class StuckAt:
    description: Description
    steps: int


@dataclass(frozen=True, slots=True)
class Timeout:
    steps: int


Outcome = Value | StuckAt | Timeout


def flat_eq(a: Expr, b: Expr) -> bool:
    """The primitive eq: identity on atoms, nats, and names; nil otherwise.

    Lambdas and pairs are never eq, not even to themselves; laws that
    quantify over all values must not lean on eq there.
    """
    match a, b:
        case Var(x), Var(y):
            return x == y
        case Atom(x), Atom(y):
            return x == y
        case Nat(x), Nat(y):
            return x == y
        case _:
            return False


def apply_redex(r: Expr, mem: Memory, fresh: str | None = None):
    """Fire one redex.  Returns (new expr, new memory) or None when stuck.

    `fresh` supplies the cell name for mk; callers compute it against
    whatever names are in scope.
    """
    match r:
        case App(Lam(x, body), v):
            return substitute(body, {x: v}), mem
        case Let(x, v, body):
            return substitute(body, {x: v}), mem
        case Seq(es):
            if len(es) == 1:
                return es[0], mem
            return Seq(es[1:]), mem
        case If(c, t, e):
            return (e if c == NIL else t), mem
        case Mk(v):
            return Var(fresh), mem.bind(fresh, v)
        case Get(Var(z)) if z in mem:
            return mem.lookup(z), mem
        case SetCell(Var(z), v) if z in mem:
            return NIL, mem.assign(z, v)
        case Eq(a, b):
            return (TRUE if flat_eq(a, b) else NIL), mem
        case Cellp(v):
            return (TRUE if isinstance(v, Var) else NIL), mem
        case Natp(v):
            return (TRUE if isinstance(v, Nat) else NIL), mem
        case Fst(Pair(a, _)):
            return a, mem
        case Snd(Pair(_, b)):
            return b, mem
        case Add1(Nat(n)):
            return Nat(n + 1), mem
        case Sub1(Nat(n)) if n > 0:
            return Nat(n - 1), mem
        case _:
            return None  # get/set on non-cells, fst of non-pair, app of
            # non-lambda, sub1 of 0, actor forms, and friends


def fresh_cell(avoid) -> str:
    k = 0
    while f"z{k}" in avoid:
        k += 1
    return f"z{k}"


def step(d: Description) -> Description | None:
    """One reduction step; None when d.expr is a value or no rule applies.

    Use decompose (or is_value) on d.expr to tell the two None cases apart.
    """
    names = d.memory.names()
    res = decompose(d.expr, names)
    if res[0] != "redex":
        return None
    _, ctx, r = res
    fresh = None
    if isinstance(r, Mk):
        fresh = fresh_cell(names | all_names(d.expr))
    fired = apply_redex(r, d.memory, fresh)
    if fired is None:
        return None
    e2, m2 = fired
    return Description(m2, plug(ctx, e2))


# --- frame-stack machine -----------------------------------------------
#
# Frames record one level of reduction context around the focus:
#   ("app_fn", arg)        app(_, arg), fn under evaluation
#   ("app_arg", fnval)     app(fnval, _)
#   ("let", x, body)
#   ("seq", rest)
#   ("if", then, orelse)
#   ("un", cls)            any unary primitive, cls rebuilds it
#   ("two_l", cls, right)  first position of set/eq/pair/send
#   ("two_r", cls, left)   second position, left already a value
#   ("pair_r", left)       pair's second position (pairs of values are
#                          values, so no rule fires when it completes)


def _reassemble(e: Expr, stack: list) -> Expr:
    for frame in reversed(stack):
        match frame:
            case ("app_fn", arg):
                e = App(e, arg)
            case ("app_arg", fn):
                e = App(fn, e)
            case ("let", x, body):
                e = Let(x, e, body)
            case ("seq", rest):
                e = Seq((e,) + rest)
            case ("if", t, o):
                e = If(e, t, o)
            case ("un", cls):
                e = cls(e)
            case ("two_l", cls, right):
                e = cls(e, right)
            case ("two_r", cls, left):
                e = cls(left, e)
            case ("pair_r", left):
                e = Pair(left, e)
    return e


def run(d: Description, max_steps: int, extra_value_names=frozenset()) -> Outcome:
    """Evaluate to completion, a stuck state, or a step budget timeout."""
    mem = d.memory
    names = set(mem.names()) | set(extra_value_names)
    focus: Expr = d.expr
    stack: list = []
    steps = 0

    def stuck() -> StuckAt:
        return StuckAt(Description(mem, _reassemble(focus, stack)), steps)

    while True:
        if is_value(focus, names):
            if not stack:
                return Value(focus, mem, steps)
            frame = stack.pop()
            match frame:
                case ("app_fn", arg):
                    stack.append(("app_arg", focus))
                    focus = arg
                    continue
                case ("two_l", cls, right):
                    if cls is Pair:
                        stack.append(("pair_r", focus))
                    else:
                        stack.append(("two_r", cls, focus))
                    focus = right
                    continue
                case ("pair_r", left):
                    focus = Pair(left, focus)  # pair of values: no rule fires
                    continue
                case ("app_arg", fn):
                    redex = App(fn, focus)
                case ("let", x, body):
                    redex = Let(x, focus, body)
                case ("seq", rest):
                    redex = Seq((focus,) + rest)
                case ("if", t, o):
                    redex = If(focus, t, o)
                case ("un", cls):
                    redex = cls(focus)
                case ("two_r", cls, left):
                    redex = cls(left, focus)
        else:
            match focus:
                case App(f, a):
                    stack.append(("app_fn", a))
                    focus = f
                    continue
                case Let(x, b, body):
                    stack.append(("let", x, body))
                    focus = b
                    continue
                case Seq(es):
                    stack.append(("seq", es[1:]))
                    focus = es[0]
                    continue
                case If(c, t, o):
                    stack.append(("if", t, o))
                    focus = c
                    continue
                case SetCell(a, b) | Eq(a, b) | Pair(a, b) | Send(a, b):
                    stack.append(("two_l", type(focus), b))
                    focus = a
                    continue
                case Become(b):
                    stack.append(("un", Become))
                    focus = b
                    continue
                case Event() | Letactor():
                    redex = focus
                case Var() | Hole() | Mark():
                    return stuck()
                case _:
                    arg = focus.arg  # the remaining unary primitives
                    stack.append(("un", type(focus)))
                    focus = arg
                    continue

        if steps >= max_steps:
            return Timeout(max_steps)
        fresh = None
        if isinstance(redex, Mk):
            fresh = fresh_cell(names | all_names(_reassemble(redex, stack)))
        fired = apply_redex(redex, mem, fresh)
        if fired is None:
            focus = redex
            return stuck()
        focus, mem = fired
        if fresh is not None:
            names.add(fresh)
        steps += 1


def evaluate(d: Description, max_steps: int) -> Outcome:
    return run(d, max_steps)


def eval_expr(e: Expr, max_steps: int = 2000, memory: Memory = EMPTY) -> Outcome:
    return run(Description(memory, e), max_steps)


def eval_with_trace(d: Description, max_steps: int):
    """Like evaluate, but also return the descriptions visited, in order.

    The trace lists the description after each step, so a value has an
    empty trace; it is truncated when the budget runs out.  Driven by
    `step`, so it is the slow path.
    """
    trace: list[Description] = []
    cur = d
    for steps in range(max_steps):
        nxt = step(cur)
        if nxt is None:
            break
        trace.append(nxt)
        cur = nxt
    else:
        return Timeout(max_steps), trace
    if is_value(cur.expr, cur.memory.names()):
        return Value(cur.expr, cur.memory, len(trace)), trace
    return StuckAt(cur, len(trace)), trace
