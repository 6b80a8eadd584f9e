"""Checkable law catalog.

Each law packages a seeded instance generator with the oracle it should be
checked by (strong isomorphism where the two sides reach identical states,
CIU where only use-indistinguishability holds) and the verdict it is
expected to produce.  Counterexample laws (expected "fails") are part of
the catalog on purpose: the checker has to find their known witnesses.

Laws are plain data; registering a new one is constructing a Law and
adding it to LAWS.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable

from .equivalence import (
    EnumConfig,
    DEFAULT_CONFIG,
    Verdict,
    ciu_test,
    enumerate_uses,
    gen_description,
    gen_expr,
    strong_iso,
    worst,
)
from .memory import EMPTY, Memory, canonicalize, memories_alpha_equal
from .programs import counter_maker, eta_expand, eta_thunk, yv_build, YV
from .reducer import Description, StuckAt, Value, run, step
from .syntax import (
    App,
    Eq,
    Expr,
    Hole,
    Lam,
    Let,
    Mk,
    Nat,
    NIL,
    Seq,
    SetCell,
    TRUE,
    Var,
    alpha_equal,
    free_vars,
    fresh_name,
    plug,
    substitute,
)

__all__ = ["Law", "LAWS", "law_check", "law_names", "yv_build", "YV"]


@dataclass(frozen=True)
class Law:
    name: str
    oracle: str  # "strong-iso" | "ciu"
    expected: str  # "holds" | "fails"
    #: rng -> list of (lhs, rhs) pairs; [] means "no instance, skip this draw"
    gen: Callable[[random.Random], list[tuple[Expr, Expr]]]
    #: shapes the oracle budget for one instance
    inner: Callable[[EnumConfig], EnumConfig] = lambda cfg: cfg
    cases: int = 1  # default number of seeded instances
    note: str = ""


def _fixed(*pairs):
    return lambda rng: list(pairs)


# -- the first-order store laws ---------------------------------------------

_x, _u, _v, _w = Var("x"), Var("u"), Var("v"), Var("w")

#: eq only observes atoms, naturals, and names, so its reflexivity law
#: quantifies over exactly those (lambdas and pairs are never eq).
_EQ_SORTS = ("atoms", "cells", "fresh")

_eq_reflexivity = Law(
    "eq-reflexivity",
    oracle="strong-iso",
    expected="holds",
    gen=_fixed((Eq(_x, _x), TRUE)),
    inner=lambda cfg: replace(cfg, value_sorts=_EQ_SORTS),
    note="eq(x,x) is t for every value eq can observe",
)

_set_absorption = Law(
    "set-absorption",
    oracle="strong-iso",
    expected="holds",
    gen=_fixed((Seq((SetCell(_x, _v), SetCell(_x, _w))), SetCell(_x, _w))),
    note="the second write wins",
)

_mk_garbage = Law(
    "mk-garbage",
    oracle="strong-iso",
    expected="holds",
    gen=_fixed((Seq((Mk(_x), Mk(_u))), Mk(_u))),
    note="a dropped allocation is garbage",
)


def _gen_mk_let_fusion(rng: random.Random):
    e = gen_expr(rng, 2, env=("z", "w"))
    lhs = Let("z", Mk(_x), Seq((SetCell(Var("z"), _w), e)))
    rhs = Let("z", Mk(_w), e)
    return [(lhs, rhs)]


_mk_let_fusion = Law(
    "mk-let-fusion",
    oracle="strong-iso",
    expected="holds",
    gen=_gen_mk_let_fusion,
    inner=lambda cfg: replace(cfg, max_values=4),
    cases=25,
    note="allocate-then-overwrite is allocate-with",
)


# -- the let-rules of the computational core ---------------------------------


def _gen_moggi_i(rng: random.Random):
    e = gen_expr(rng, 2, env=("x", "y"))
    beta = App(Lam("x", e), Var("y"))
    return [
        (beta, substitute(e, {"x": Var("y")})),
        (beta, Let("x", Var("y"), e)),
    ]


def _use_pool(rng: random.Random) -> Expr:
    cfg = replace(DEFAULT_CONFIG, ctx_depth=1)
    uses = enumerate_uses(cfg)
    return uses[rng.randrange(len(uses))]


def _gen_moggi_ii(rng: random.Random):
    r = _use_pool(rng)
    e = gen_expr(rng, 2, env=("y",))
    x = fresh_name("x", free_vars(r) | free_vars(e))
    return [(plug(r, e), Let(x, e, plug(r, Var(x))))]


def _gen_moggi_iii(rng: random.Random):
    r = _use_pool(rng)
    x = fresh_name("x", free_vars(r))
    e0 = gen_expr(rng, 2, env=("y",))
    e1 = gen_expr(rng, 2, env=(x, "y"))
    lhs = plug(r, Let(x, e0, e1))
    rhs = Let(x, e0, plug(r, e1))
    return [(lhs, rhs)]


def _moggi_inner(cfg: EnumConfig) -> EnumConfig:
    return cfg.slim(max_values=3)


_moggi = [
    Law("moggi-i", "strong-iso", "holds", _gen_moggi_i, _moggi_inner, cases=100,
        note="beta_v, and let-as-application"),
    Law("moggi-ii", "strong-iso", "holds", _gen_moggi_ii, _moggi_inner, cases=100,
        note="a use of e is a let of e"),
    Law("moggi-iii", "strong-iso", "holds", _gen_moggi_iii, _moggi_inner, cases=100,
        note="let hoists out of uses"),
]


# -- counterexample laws ------------------------------------------------------


def _gen_eta(rng: random.Random):
    f = (eta_thunk, counter_maker)[rng.randrange(2)]()
    return [(eta_expand(f), f)]


_eta_general = Law(
    "eta-general",
    oracle="ciu",
    expected="fails",
    gen=_gen_eta,
    inner=lambda cfg: replace(cfg, ctx_depth=1, memories=(EMPTY,)),
    note="eta fails for lambdas with local memory; the witness applies twice",
)

_subst_into_equals = Law(
    "subst-into-equals",
    oracle="ciu",
    expected="fails",
    gen=_fixed((Eq(Mk(_x), Mk(_x)), TRUE)),
    inner=lambda cfg: replace(cfg, ctx_depth=1, memories=(EMPTY,)),
    note="substituting mk(x) into eq(x,x)=t breaks it: two fresh cells",
)


# -- laws about reduction itself ----------------------------------------------


def _gen_reduction_preservation(rng: random.Random):
    for _ in range(20):
        d = gen_description(rng)
        nxt = step(d)
        if nxt is None:
            continue
        lhs = plug(canonicalize(d.memory), d.expr)
        rhs = plug(canonicalize(nxt.memory), nxt.expr)
        return [(lhs, rhs)]
    return []


_reduction_preservation = Law(
    "reduction-preservation",
    oracle="ciu",
    expected="holds",
    gen=_gen_reduction_preservation,
    inner=lambda cfg: cfg.slim(),
    cases=100,
    note="a step changes no observation",
)


def common_lambda_reduct(r0: Expr, r1: Expr, max_steps: int = 300) -> bool:
    """Do the two uses reach a common reduct on an opaque fresh argument?

    The argument stands for an arbitrary value, so it is treated as a
    first-class name during reduction; the final descriptions must agree
    up to renaming of allocated cells.
    """
    x = fresh_name("hx", free_vars(r0) | free_vars(r1))
    o0 = run(Description(EMPTY, plug(r0, Var(x))), max_steps, extra_value_names={x})
    o1 = run(Description(EMPTY, plug(r1, Var(x))), max_steps, extra_value_names={x})
    match o0, o1:
        case Value(v0, m0, _), Value(v1, m1, _):
            return _desc_alpha(m0, v0, m1, v1)
        case StuckAt(d0, _), StuckAt(d1, _):
            return _desc_alpha(d0.memory, d0.expr, d1.memory, d1.expr)
        case _:
            return False


def _desc_alpha(m0: Memory, e0: Expr, m1: Memory, e1: Expr) -> bool:
    if not memories_alpha_equal(m0, m1):
        return False
    ren = {a: Var(b) for (a, _), (b, _) in zip(m0.bindings, m1.bindings)}
    return alpha_equal(substitute(e0, ren), e1)


def _gen_common_reduct(rng: random.Random):
    hole = Hole()
    x_body = (NIL, Nat(1), Eq(Var("y"), Nat(0)))[rng.randrange(3)]
    candidates = [
        (Seq((hole, x_body)), Let("u", hole, x_body)),
        (Seq((hole, x_body)), App(Lam("u", x_body), hole)),
        (App(Lam("u", Var("u")), hole), hole),
        (Seq((NIL, hole)), hole),
    ]
    r0, r1 = candidates[rng.randrange(len(candidates))]
    if not common_lambda_reduct(r0, r1):
        return []
    e = gen_expr(rng, 2, env=("y",))
    return [(plug(r0, e), plug(r1, e))]


_common_reduct_law = Law(
    "common-lambda-reduct",
    oracle="ciu",
    expected="holds",
    gen=_gen_common_reduct,
    inner=lambda cfg: cfg.slim(),
    cases=40,
    note="uses with a common reduct on a fresh argument are interchangeable",
)


LAWS: dict[str, Law] = {
    law.name: law
    for law in [
        _eq_reflexivity,
        _set_absorption,
        _mk_garbage,
        _mk_let_fusion,
        *_moggi,
        _eta_general,
        _subst_into_equals,
        _reduction_preservation,
        _common_reduct_law,
    ]
}


def law_names() -> list[str]:
    return list(LAWS)


def law_check(law: Law | str, cfg: EnumConfig = DEFAULT_CONFIG,
              cases: int | None = None) -> Verdict:
    """Check a law over seeded instances, dispatching each to its oracle.

    The verdict aggregates worst-first (fails > unknown > holds) and keeps
    the first witness in generation order.  For expected-fails laws a
    "fails" verdict with its witness is the law behaving as documented.
    """
    if isinstance(law, str):
        try:
            law = LAWS[law]
        except KeyError:
            raise KeyError(f"unknown law {law!r}; known: {', '.join(LAWS)}") from None
    rng = random.Random(cfg.seed)
    inner_cfg = law.inner(cfg)
    oracle = strong_iso if law.oracle == "strong-iso" else ciu_test
    n = law.cases if cases is None else cases
    verdicts: list[Verdict] = []
    for _ in range(n):
        for lhs, rhs in law.gen(rng):
            v = oracle(lhs, rhs, inner_cfg)
            verdicts.append(v)
            if v.fails:
                return worst(verdicts)
    return worst(verdicts)
