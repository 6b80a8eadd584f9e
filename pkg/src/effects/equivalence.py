"""Bounded equivalence oracles: strong isomorphism and CIU testing.

Both oracles finitize a universally-quantified definition: strong
isomorphism quantifies over closing instantiations, CIU over closing
instantiations of uses (memory context + substitution + reduction
context).  Verdicts are therefore three-valued and always relative to the
enumeration budget:

  holds    every enumerated case agreed, definitely
  fails    a definite disagreement, with a replayable witness
  unknown  step-budget timeouts (or a case cap) blocked classification

Definedness is the observation.  Two value outcomes disagree definitely
only when the results are observably distinct - different first-order
shape, different atoms or naturals, recursively distinct pair components -
each such distinction being realizable as a use built from if/eq/cell?/
nat?/fst/snd around a stuck expression.  Cells and lambdas are never
directly distinguished as results; only enumerated uses can separate
them.  Divergence alone never yields fails, only unknown.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace

from .memory import EMPTY, Memory, equal_mod_garbage
from .programs import STUCK
from .reducer import Description, Outcome, StuckAt, Timeout, Value, run
from .syntax import (
    Add1,
    App,
    Atom,
    Cellp,
    Eq,
    Expr,
    Fst,
    Get,
    Hole,
    If,
    Lam,
    Let,
    Mk,
    Nat,
    Natp,
    NIL,
    Pair,
    Seq,
    SetCell,
    Snd,
    Sub1,
    TRUE,
    Var,
    free_vars,
    fresh_name,
    is_value,
    plug,
    substitute,
    to_text,
)

_IDENTITY = Lam("x", Var("x"))
_CONST_NIL = Lam("x", NIL)
_WRITER = Lam("x", SetCell(Var("p"), Var("x")))  # p allocated per instantiation


def _discriminator(v: Expr) -> Expr:
    # turns "equals v" into definite undefinedness
    return Lam("x", If(Eq(Var("x"), v), STUCK, NIL))


DEFAULT_PROBES = (
    _IDENTITY,
    _CONST_NIL,
    _WRITER,
    _discriminator(NIL),
    _discriminator(TRUE),
    _discriminator(Nat(0)),
    _discriminator(Nat(1)),
)

ALL_SORTS = ("atoms", "cells", "fresh", "probes", "pairs")
FIRST_ORDER_SORTS = ("atoms", "cells", "fresh", "pairs")


@dataclass(frozen=True)
class EnumConfig:
    """Budgets and pools for the bounded oracles.

    The defaults match the CLI: small enough for sub-second single checks,
    large enough to reach every counterexample the test suite needs.
    """

    value_depth: int = 2
    max_cells: int = 3
    ctx_depth: int = 2
    max_steps: int = 2000
    atoms: tuple[Expr, ...] = (NIL, TRUE, Nat(0), Nat(1), Nat(2))
    probe_pool: tuple[Expr, ...] = DEFAULT_PROBES
    seed: int = 0
    value_sorts: tuple[str, ...] = ALL_SORTS
    max_values: int = 8          # per-variable cap when closing free variables
    max_uses: int | None = None  # cap on enumerated reduction contexts
    max_cases: int | None = None
    memories: tuple[Memory, ...] | None = None  # None: default family

    def first_order(self) -> "EnumConfig":
        return replace(self, value_sorts=FIRST_ORDER_SORTS)

    def slim(self, **over) -> "EnumConfig":
        """A cheap sub-budget for oracle calls nested inside other checks."""
        small = dict(
            ctx_depth=1,
            max_values=4,
            max_uses=24,
            max_steps=min(self.max_steps, 600),
            memories=(EMPTY, Memory((("z0", NIL),))),
        )
        small.update(over)
        return replace(self, **small)


DEFAULT_CONFIG = EnumConfig()


def default_memories(cfg: EnumConfig) -> tuple[Memory, ...]:
    """Starting memories for the oracles: a small family up to max_cells,
    mixing plain contents, a chain, a self-loop, and a cycle."""
    if cfg.memories is not None:
        return cfg.memories
    fam: list[Memory] = [EMPTY]
    if cfg.max_cells >= 1:
        fam.append(Memory((("z0", NIL),)))
        fam.append(Memory((("z0", Var("z0")),)))
    if cfg.max_cells >= 2:
        fam.append(Memory((("z0", TRUE), ("z1", Var("z0")))))
    if cfg.max_cells >= 3:
        fam.append(Memory((("z0", Nat(0)), ("z1", Var("z2")), ("z2", Var("z1")))))
    return tuple(fam)


def enumerate_memories(max_cells: int, contents, cycles: bool = False):
    """Every memory with up to max_cells cells z0.., contents from the pool.

    With cycles=True the pool for cell k also offers references to cells
    z0..zk (so self-loops and back-references are produced).  Exhaustive:
    used where an acceptance criterion demands the full product.
    """
    yield EMPTY
    contents = tuple(contents)
    for n in range(1, max_cells + 1):
        names = [f"z{i}" for i in range(n)]
        pools = []
        for k in range(n):
            pool = contents
            if cycles:
                pool = pool + tuple(Var(names[i]) for i in range(n))
            pools.append(pool)
        for combo in itertools.product(*pools):
            yield Memory(tuple(zip(names, combo)))


def enumerate_values(cfg: EnumConfig, m: Memory, extend: bool = True):
    """Yield (value, possibly-extended memory), deterministically ordered.

    Atoms first, then the cells of m, then fresh cells while capacity under
    max_cells remains (when extend is allowed), then the probe lambdas
    (free variables closed by allocating fresh cells), then pairs built
    over atoms and existing cells up to value_depth.
    """
    sorts = cfg.value_sorts
    if "atoms" in sorts:
        for a in cfg.atoms:
            yield a, m
    if "cells" in sorts:
        for z, _ in m.bindings:
            yield Var(z), m
    if "fresh" in sorts and extend:
        room = max(0, cfg.max_cells - len(m))
        for contents in (NIL, TRUE)[: min(2, room)]:
            z = fresh_name("z", m.names() | {"z"})
            yield Var(z), m.bind(z, contents)
    if "probes" in sorts:
        for p in cfg.probe_pool:
            fv = sorted(free_vars(p))
            if not fv:
                yield p, m
            elif extend:
                m2 = m
                ren = {}
                for name in fv:
                    z = fresh_name("p", m2.names() | {"p"})
                    m2 = m2.bind(z, NIL)
                    ren[name] = Var(z)
                yield substitute(p, ren), m2
    if "pairs" in sorts:
        base = list(cfg.atoms) + [Var(z) for z, _ in m.bindings]
        level = list(base)
        for _ in range(cfg.value_depth - 1):
            level = [Pair(a, b) for a in level for b in level]
            for v in level:
                yield v, m


def count_values(cfg: EnumConfig, m: Memory, extend: bool = True) -> int:
    """Closed-form size of the enumerate_values stream (kept in sync; the
    tests check it against an independent recursive count)."""
    n = 0
    sorts = cfg.value_sorts
    if "atoms" in sorts:
        n += len(cfg.atoms)
    if "cells" in sorts:
        n += len(m)
    if "fresh" in sorts and extend:
        n += min(2, max(0, cfg.max_cells - len(m)))
    if "probes" in sorts:
        for p in cfg.probe_pool:
            if not free_vars(p) or extend:
                n += 1
    if "pairs" in sorts:
        base = len(cfg.atoms) + len(m)
        level = base
        for _ in range(cfg.value_depth - 1):
            level = level * level
            n += level
    return n


def enumerate_substitutions(cfg: EnumConfig, m: Memory, names):
    """Closing substitutions for the given free names over enumerate_values.

    Yields (substitution, extended memory); memory extensions made for one
    variable are visible to the next.  Per-variable choice is capped at
    max_values to keep products tractable.
    """
    names = sorted(names)
    if not names:
        yield {}, m
        return

    def expand(i, sigma, mem):
        if i == len(names):
            yield dict(sigma), mem
            return
        picked = 0
        for v, mem2 in enumerate_values(cfg, mem):
            if picked >= cfg.max_values:
                break
            picked += 1
            sigma[names[i]] = v
            yield from expand(i + 1, sigma, mem2)
        del sigma[names[i]]

    yield from expand(0, {}, m)


# ---------------------------------------------------------------------------
# Uses (reduction contexts)


def enumerate_uses(cfg: EnumConfig, cells=()) -> list[Expr]:
    """Reduction contexts up to ctx_depth frame compositions.

    Depth 0 is the empty use; single frames cover every evaluation
    position of the grammar with operands from a small pool (atoms, the
    given cells, probes, and apply-twice let bodies); deeper uses are
    outer[inner] compositions, so the enumeration is prefix-stable as the
    depth grows.
    """
    cells = tuple(cells)
    atoms = cfg.atoms
    probes = tuple(p for p in cfg.probe_pool if not free_vars(p))
    operand_vals: tuple[Expr, ...] = atoms + tuple(Var(z) for z in cells) + probes

    hole = Hole()
    frames: list[Expr] = []
    for e in operand_vals:
        frames.append(App(hole, e))
    for p in probes:
        frames.append(App(p, hole))
    for un in (Mk, Get, Cellp, Fst, Snd, Add1, Sub1, Natp):
        frames.append(un(hole))
    for e in (NIL, TRUE):
        frames.append(SetCell(hole, e))
    for z in cells:
        frames.append(SetCell(Var(z), hole))
    for e in atoms:
        frames.append(Eq(hole, e))
    for z in cells:
        frames.append(Eq(hole, Var(z)))
    frames.append(Eq(NIL, hole))
    frames.append(If(hole, STUCK, NIL))
    frames.append(If(hole, NIL, STUCK))
    frames.append(If(hole, TRUE, NIL))
    frames.append(Seq((hole, NIL)))
    frames.append(Pair(hole, NIL))
    frames.append(Snd(Pair(TRUE, hole)))
    # let-bound uses; "u" applied twice is what refutes eta-expanded thunks
    u = Var("u")
    let_bodies = (
        u,
        App(u, Nat(0)),
        App(u, NIL),
        Seq((App(u, Nat(1)), App(u, Nat(2)))),
        If(Eq(App(u, Nat(1)), App(u, Nat(2))), STUCK, NIL),
        Eq(u, u),
    )
    for b in let_bodies:
        frames.append(Let("u", hole, b))

    uses: list[Expr] = [hole]
    level: list[Expr] = [hole]
    for _ in range(cfg.ctx_depth):
        level = [plug(f, inner) for f in frames for inner in level]
        uses.extend(level)
        if cfg.max_uses is not None and len(uses) >= cfg.max_uses:
            return uses[: cfg.max_uses]
    if cfg.max_uses is not None:
        return uses[: cfg.max_uses]
    return uses


# ---------------------------------------------------------------------------
# Verdicts


@dataclass(frozen=True)
class Witness:
    """A replayable counterexample: Gamma, R, sigma, and both outcomes."""

    memory: Memory
    context: Expr | None  # None for strong-isomorphism witnesses
    subst: tuple[tuple[str, Expr], ...]
    left: Expr
    right: Expr
    left_outcome: Outcome
    right_outcome: Outcome

    def programs(self) -> tuple[Expr, Expr]:
        sigma = dict(self.subst)
        l, r = substitute(self.left, sigma), substitute(self.right, sigma)
        if self.context is not None:
            l, r = plug(self.context, l), plug(self.context, r)
        return l, r

    def replay(self, max_steps: int) -> tuple[Outcome, Outcome]:
        l, r = self.programs()
        return (
            run(Description(self.memory, l), max_steps),
            run(Description(self.memory, r), max_steps),
        )

    def __str__(self) -> str:
        def grouped(head, items):
            inside = " ".join(items)
            return f"({head} {inside})" if inside else f"({head})"

        parts = [grouped("memory", [f"({z} {to_text(v)})" for z, v in self.memory.bindings])]
        if self.context is not None:
            parts.append(f"(use {to_text(self.context)})")
        parts.append(grouped("subst", [f"({x} {to_text(v)})" for x, v in self.subst]))
        parts.append(f"(left {_outcome_text(self.left_outcome)})")
        parts.append(f"(right {_outcome_text(self.right_outcome)})")
        return "(witness " + " ".join(parts) + ")"


def _outcome_text(o: Outcome) -> str:
    match o:
        case Value(v, _, _):
            return f"(value {to_text(v)})"
        case StuckAt(d, _):
            return f"(stuck {to_text(d.expr)})"
        case Timeout(s):
            return f"(timeout {s})"


@dataclass(frozen=True)
class Verdict:
    tag: str  # "holds" | "fails" | "unknown"
    witness: Witness | None = None
    reason: str | None = None
    cases: int = 0
    definite: int = 0
    timeouts: int = 0

    @property
    def holds(self) -> bool:
        return self.tag == "holds"

    @property
    def fails(self) -> bool:
        return self.tag == "fails"

    @property
    def unknown(self) -> bool:
        return self.tag == "unknown"

    def __str__(self) -> str:
        if self.fails:
            return f"FAILS {self.witness}"
        if self.unknown:
            return f"UNKNOWN {self.reason}"
        return "HOLDS"


def worst(verdicts) -> Verdict:
    """Deterministic aggregation: fails beats unknown beats holds, first
    witness in enumeration order kept."""
    agg = Verdict("holds")
    cases = definite = timeouts = 0
    for v in verdicts:
        cases += v.cases
        definite += v.definite
        timeouts += v.timeouts
        if v.fails and not agg.fails:
            agg = v
        elif v.unknown and agg.holds:
            agg = v
    return replace(agg, cases=cases, definite=definite, timeouts=timeouts)


# ---------------------------------------------------------------------------
# Observable distinctness of results


def _sort_tag(v: Expr) -> str:
    match v:
        case Atom(n):
            return n
        case Nat():
            return "nat"
        case Var():
            return "cell"
        case Lam():
            return "lambda"
        case Pair():
            return "pair"
        case _:
            return "?"


def observably_distinct(a: Expr, b: Expr) -> bool:
    """Are two result values separated by some definite use?

    Differing first-order shape always is (cell?, nat?, if, eq against a
    literal, fst/snd chains, each wrapped around a stuck branch).  Two
    cells or two lambdas are not: cell names alpha-vary and lambdas are
    opaque, so distinguishing those is the enumeration's job.
    """
    ta, tb = _sort_tag(a), _sort_tag(b)
    if ta != tb:
        return True
    if ta == "nat":
        return a != b
    if ta == "pair":
        return observably_distinct(a.left, b.left) or observably_distinct(
            a.right, b.right
        )
    return False


def _compare_definedness(out0: Outcome, out1: Outcome) -> str:
    """"agree" | "disagree" | "indeterminate" for one enumerated case."""
    if isinstance(out0, Timeout) or isinstance(out1, Timeout):
        return "indeterminate"
    if isinstance(out0, StuckAt) and isinstance(out1, StuckAt):
        return "agree"
    if isinstance(out0, StuckAt) or isinstance(out1, StuckAt):
        return "disagree"
    return "disagree" if observably_distinct(out0.value, out1.value) else "agree"


# ---------------------------------------------------------------------------
# The oracles


def strong_iso(e0: Expr, e1: Expr, cfg: EnumConfig = DEFAULT_CONFIG) -> Verdict:
    """Bounded strong isomorphism: equal values in equal-mod-garbage states
    under every enumerated closing instantiation.

    Result values are compared through the memory bijection (lambdas up to
    alpha), which is strictly finer than operational equivalence.
    """
    names = sorted(free_vars(e0) | free_vars(e1))
    cases = definite = timeouts = 0
    first_fail: Witness | None = None
    for m0 in default_memories(cfg):
        for sigma, m in enumerate_substitutions(cfg, m0, names):
            if cfg.max_cases is not None and cases >= cfg.max_cases:
                return _finish(first_fail, cases, definite, timeouts, capped=True)
            cases += 1
            t0 = substitute(e0, sigma)
            t1 = substitute(e1, sigma)
            out0 = run(Description(m, t0), cfg.max_steps)
            out1 = run(Description(m, t1), cfg.max_steps)
            if isinstance(out0, Timeout) or isinstance(out1, Timeout):
                timeouts += 1
                continue
            ok: bool
            if isinstance(out0, Value) and isinstance(out1, Value):
                ok = equal_mod_garbage(
                    out0.memory, out0.value, out1.memory, out1.value, m.names()
                )
            else:
                ok = isinstance(out0, StuckAt) and isinstance(out1, StuckAt)
            definite += 1
            if not ok and first_fail is None:
                first_fail = Witness(
                    m, None, tuple(sorted(sigma.items())), e0, e1, out0, out1
                )
                return _finish(first_fail, cases, definite, timeouts)
    return _finish(first_fail, cases, definite, timeouts)


def ciu_test(e0: Expr, e1: Expr, cfg: EnumConfig = DEFAULT_CONFIG) -> Verdict:
    """Bounded CIU: equi-definedness of Gamma[R[e^sigma]] over enumerated
    memories, closing substitutions, and uses."""
    names = sorted(free_vars(e0) | free_vars(e1))
    cases = definite = timeouts = 0
    first_fail: Witness | None = None
    for m0 in default_memories(cfg):
        uses = enumerate_uses(cfg, cells=[z for z, _ in m0.bindings])
        for sigma, m in enumerate_substitutions(cfg, m0, names):
            t0 = substitute(e0, sigma)
            t1 = substitute(e1, sigma)
            for use in uses:
                if cfg.max_cases is not None and cases >= cfg.max_cases:
                    return _finish(first_fail, cases, definite, timeouts, capped=True)
                cases += 1
                out0 = run(Description(m, plug(use, t0)), cfg.max_steps)
                out1 = run(Description(m, plug(use, t1)), cfg.max_steps)
                res = _compare_definedness(out0, out1)
                if res == "indeterminate":
                    timeouts += 1
                    continue
                definite += 1
                if res == "disagree":
                    first_fail = Witness(
                        m, use, tuple(sorted(sigma.items())), e0, e1, out0, out1
                    )
                    return _finish(first_fail, cases, definite, timeouts)
    return _finish(first_fail, cases, definite, timeouts)


def _finish(fail, cases, definite, timeouts, capped=False) -> Verdict:
    if fail is not None:
        return Verdict("fails", witness=fail, cases=cases, definite=definite,
                       timeouts=timeouts)
    if capped:
        return Verdict("unknown", reason="budget-exhausted", cases=cases,
                       definite=definite, timeouts=timeouts)
    if timeouts:
        return Verdict("unknown", reason=f"{timeouts} timeout case(s)",
                       cases=cases, definite=definite, timeouts=timeouts)
    return Verdict("holds", cases=cases, definite=definite, timeouts=timeouts)


# ---------------------------------------------------------------------------
# Random expression generation (law instances, reduction-preservation)


def gen_expr(rng: random.Random, depth: int, env: tuple[str, ...] = (),
             cells: tuple[str, ...] = ()) -> Expr:
    """A random expression over the given variables and cell names.

    Biased toward convergence: applications only ever apply literal
    lambdas or environment variables (which the oracles close with
    values), so generated terms either converge or get stuck, and the
    definite-case rate stays high.
    """
    leaves: list = ["atom"]
    if env:
        leaves.append("var")
    if cells:
        leaves.append("cellref")
    if depth <= 0:
        kind = rng.choice(leaves)
        if kind == "atom":
            return rng.choice((NIL, TRUE, Nat(0), Nat(1), Nat(2)))
        if kind == "var":
            return Var(rng.choice(env))
        return Var(rng.choice(cells))
    kinds = leaves + [
        "lam", "app", "let", "seq", "if", "mk", "get", "set", "eq",
        "pair", "fst", "snd", "add1", "sub1", "natp", "cellp",
    ]
    kind = rng.choice(kinds)
    sub = lambda: gen_expr(rng, depth - 1, env, cells)
    match kind:
        case "atom":
            return rng.choice((NIL, TRUE, Nat(0), Nat(1), Nat(2)))
        case "var":
            return Var(rng.choice(env))
        case "cellref":
            return Var(rng.choice(cells))
        case "lam":
            x = f"v{rng.randrange(4)}"
            return Lam(x, gen_expr(rng, depth - 1, env + (x,), cells))
        case "app":
            x = f"v{rng.randrange(4)}"
            fn = Lam(x, gen_expr(rng, depth - 1, env + (x,), cells))
            return App(fn, sub())
        case "let":
            x = f"v{rng.randrange(4)}"
            return Let(x, sub(), gen_expr(rng, depth - 1, env + (x,), cells))
        case "seq":
            return Seq(tuple(sub() for _ in range(rng.randrange(1, 3))))
        case "if":
            return If(sub(), sub(), sub())
        case "mk":
            return Mk(sub())
        case "get":
            target = Var(rng.choice(cells)) if cells and rng.random() < 0.8 else Mk(sub())
            return Get(target)
        case "set":
            target = Var(rng.choice(cells)) if cells and rng.random() < 0.8 else Mk(sub())
            return SetCell(target, sub())
        case "eq":
            return Eq(sub(), sub())
        case "pair":
            return Pair(sub(), sub())
        case "fst":
            return Fst(Pair(sub(), sub())) if rng.random() < 0.7 else Fst(sub())
        case "snd":
            return Snd(Pair(sub(), sub())) if rng.random() < 0.7 else Snd(sub())
        case "add1":
            return Add1(rng.choice((Nat(0), Nat(1), sub())))
        case "sub1":
            return Sub1(rng.choice((Nat(1), Nat(2), sub())))
        case "natp":
            return Natp(sub())
        case _:
            return Cellp(sub())


def gen_description(rng: random.Random, depth: int = 3) -> Description:
    """A random closed description: small memory plus an expression over
    its cells."""
    k = rng.randrange(0, 3)
    names = tuple(f"z{i}" for i in range(k))
    bindings = []
    for i, z in enumerate(names):
        pool: list[Expr] = [NIL, TRUE, Nat(0), Nat(1)]
        pool.extend(Var(n) for n in names[: i + 1])
        bindings.append((z, rng.choice(pool)))
    m = Memory(tuple(bindings))
    return Description(m, gen_expr(rng, depth, env=(), cells=names))
