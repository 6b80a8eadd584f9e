"""Formula and classification checker with contextual assertions.

Formulas assert operational equivalence of expressions, class membership,
and first-order combinations of those, plus the contextual assertion
ctx(U, phi): phi holds at the hole of the univalent context U, if execution
ever reaches it.  Satisfaction is three-valued and bounded:

  - equivalence atoms compare evaluations strong-isomorphism-style, which
    under-approximates operational equivalence; a rejected comparison only
    becomes a definite "fails" when a shallow pass over uses exhibits the
    difference, and is "unknown" otherwise;
  - quantifiers range over the values constructible in the current memory
    (no memory-expansion quantifiers);
  - class quantifiers range over a declared finite pool.

Reaching the hole is implemented by plugging a Mark into the context and
reducing until the mark comes into focus; substitutions crossed on the way
accumulate inside the mark, which is exactly the environment the asserted
formula is evaluated in.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .equivalence import (
    DEFAULT_CONFIG,
    EnumConfig,
    Verdict,
    ciu_test,
    enumerate_substitutions,
    enumerate_values,
    default_memories,
    observably_distinct,
)
from .memory import EMPTY, Memory, RootSet, equal_mod_garbage, reachable
from .reducer import Description, StuckAt, Timeout, Value, run
from .syntax import (
    Add1,
    App,
    Cellp,
    Eq,
    Expr,
    Get,
    Hole,
    If,
    Let,
    Mark,
    Mk,
    Nat,
    NIL,
    SAtom,
    SList,
    Seq,
    SetCell,
    TRUE,
    Var,
    alpha_equal,
    build_expr,
    count_holes,
    decompose,
    free_vars,
    is_univalent,
    plug,
    read_sexprs,
    substitute,
    to_text,
)

# ---------------------------------------------------------------------------
# Formulas and classifications


class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Equiv(Formula):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Member(Formula):
    expr: Expr
    cls: "Classification"


@dataclass(frozen=True, slots=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True, slots=True)
class AndF(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class OrF(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    premise: Formula
    conclusion: Formula


@dataclass(frozen=True, slots=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class ForallClass(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class CtxAssert(Formula):
    context: Expr  # univalent, one hole
    body: Formula


class Classification:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Named(Classification):
    name: str  # Val, Nat, Nil, Cell, or a registered comprehension


@dataclass(frozen=True, slots=True)
class ClassVar(Classification):
    name: str


@dataclass(frozen=True, slots=True)
class CellOf(Classification):
    contents: Classification


@dataclass(frozen=True, slots=True)
class Comprehension(Classification):
    var: str
    body: Formula


@dataclass(frozen=True, slots=True)
class Arrow(Classification):
    args: tuple[Classification, ...]
    result: Classification
    kind: str  # "total" | "partial" | "memory"

    def __post_init__(self):
        if not self.args:
            raise ValueError("function classes need at least one argument")


VAL = Named("Val")
NAT = Named("Nat")
NIL_CLASS = Named("Nil")
CELL = Named("Cell")


@dataclass
class ClassEnv:
    """Registered comprehensions plus the finite pool class quantifiers
    range over."""

    named: dict[str, Classification] = field(default_factory=dict)
    pool: tuple[Classification, ...] = (
        VAL,
        NAT,
        NIL_CLASS,
        CELL,
        CellOf(NAT),
        CellOf(NIL_CLASS),
    )

    def register(self, name: str, cls: Classification) -> None:
        self.named[name] = cls
        self.pool = self.pool + (cls,)


DEFAULT_CLASSES = ClassEnv()


# ---------------------------------------------------------------------------
# Three-valued connectives (strong Kleene)

_HOLDS = Verdict("holds")
_FAILS = Verdict("fails")


def _unknown(reason: str) -> Verdict:
    return Verdict("unknown", reason=reason)


def tri_not(v: Verdict) -> Verdict:
    if v.holds:
        return _FAILS
    if v.fails:
        return _HOLDS
    return v


def tri_all(verdicts) -> Verdict:
    out = _HOLDS
    for v in verdicts:
        if v.fails:
            return v
        if v.unknown:
            out = v
    return out


def tri_any(verdicts) -> Verdict:
    out = _FAILS
    for v in verdicts:
        if v.holds:
            return v
        if v.unknown:
            out = v
    return out


# ---------------------------------------------------------------------------
# Satisfaction


def satisfies(
    m: Memory,
    phi: Formula,
    s: dict[str, Expr],
    cfg: EnumConfig = DEFAULT_CONFIG,
    classes: ClassEnv = DEFAULT_CLASSES,
    cenv: dict[str, Classification] | None = None,
) -> Verdict:
    """Bounded Gamma |= phi [sigma]; the memory is the model, the closing
    substitution supplies the values of free variables."""
    cenv = cenv or {}
    match phi:
        case Equiv(l, r):
            return _equiv_atom(m, l, r, s, cfg)
        case Member(e, k):
            out = run(Description(m, substitute(e, s)), cfg.max_steps)
            if isinstance(out, Timeout):
                return _unknown("membership expression timed out")
            if isinstance(out, StuckAt):
                return _FAILS
            return class_member(out.value, k, out.memory, cfg, classes, cenv)
        case Not(b):
            return tri_not(satisfies(m, b, s, cfg, classes, cenv))
        case AndF(parts):
            return tri_all(satisfies(m, p, s, cfg, classes, cenv) for p in parts)
        case OrF(parts):
            return tri_any(satisfies(m, p, s, cfg, classes, cenv) for p in parts)
        case Implies(p, c):
            return tri_any(
                (
                    tri_not(satisfies(m, p, s, cfg, classes, cenv)),
                    satisfies(m, c, s, cfg, classes, cenv),
                )
            )
        case Forall(x, body):
            return tri_all(
                satisfies(m, body, {**s, x: v}, cfg, classes, cenv)
                for v, _ in enumerate_values(cfg, m, extend=False)
            )
        case Exists(x, body):
            return tri_any(
                satisfies(m, body, {**s, x: v}, cfg, classes, cenv)
                for v, _ in enumerate_values(cfg, m, extend=False)
            )
        case ForallClass(x, body):
            return tri_all(
                satisfies(m, body, s, cfg, classes, {**cenv, x: k})
                for k in classes.pool
            )
        case CtxAssert(u, body):
            if count_holes(u) != 1 or not is_univalent(u):
                raise ValueError(f"not a univalent one-hole context: {to_text(u)}")
            reached = run_to_hole(m, u, s, cfg.max_steps)
            if reached == "timeout":
                return _unknown("context evaluation timed out")
            if reached == "vacuous":
                return _HOLDS
            m2, s2 = reached
            return satisfies(m2, body, s2, cfg, classes, cenv)
        case _:
            raise TypeError(f"not a formula: {phi!r}")


def run_to_hole(m: Memory, u: Expr, s: dict[str, Expr], max_steps: int):
    """Evaluate the context until its hole comes into focus.

    Returns (memory, substitution) at the hole, "vacuous" when evaluation
    finishes or gets stuck without ever focusing it, or "timeout".
    """
    marked = substitute(plug(u, Mark(())), s)
    out = run(Description(m, marked), max_steps)
    if isinstance(out, Timeout):
        return "timeout"
    if isinstance(out, Value):
        return "vacuous"
    d = out.description
    tag, _, focus = decompose(d.expr, d.memory.names())
    if tag == "stuck" and isinstance(focus, Mark):
        return d.memory, dict(focus.env)
    return "vacuous"


def _equiv_atom(m: Memory, l: Expr, r: Expr, s, cfg: EnumConfig) -> Verdict:
    t0, t1 = substitute(l, s), substitute(r, s)
    out0 = run(Description(m, t0), cfg.max_steps)
    out1 = run(Description(m, t1), cfg.max_steps)
    if isinstance(out0, Timeout) or isinstance(out1, Timeout):
        return _unknown("equivalence atom timed out")
    if isinstance(out0, StuckAt) and isinstance(out1, StuckAt):
        return _HOLDS  # equi-undefined in this model
    if isinstance(out0, StuckAt) or isinstance(out1, StuckAt):
        return _FAILS
    if equal_mod_garbage(out0.memory, out0.value, out1.memory, out1.value, m.names()):
        return _HOLDS
    if observably_distinct(out0.value, out1.value):
        return _FAILS
    # the comparison is finer than operational equivalence: look for an
    # actual separating use before claiming inequivalence
    shallow = replace(
        cfg,
        memories=(m,),
        ctx_depth=1,
        max_uses=None,
        max_steps=min(cfg.max_steps, 600),
    )
    v = ciu_test(t0, t1, shallow)
    if v.fails:
        return _FAILS
    return _unknown("values differ as states but no separating use found")


# ---------------------------------------------------------------------------
# Class membership


def class_member(
    v: Expr,
    k: Classification,
    m: Memory,
    cfg: EnumConfig = DEFAULT_CONFIG,
    classes: ClassEnv = DEFAULT_CLASSES,
    cenv: dict[str, Classification] | None = None,
) -> Verdict:
    """Bounded membership of a value in a classification."""
    cenv = cenv or {}
    match k:
        case Named("Val"):
            return _HOLDS
        case Named("Nat"):
            return _HOLDS if isinstance(v, Nat) else _FAILS
        case Named("Nil"):
            return _HOLDS if v == NIL else _FAILS
        case Named("Cell"):
            return _HOLDS if isinstance(v, Var) and v.name in m else _FAILS
        case Named(other):
            if other in classes.named:
                return class_member(v, classes.named[other], m, cfg, classes, cenv)
            raise KeyError(f"unknown class {other!r}")
        case ClassVar(x):
            if x in cenv:
                return class_member(v, cenv[x], m, cfg, classes, cenv)
            raise KeyError(f"unbound class variable {x!r}")
        case CellOf(inner):
            if not (isinstance(v, Var) and v.name in m):
                return _FAILS
            return class_member(m.lookup(v.name), inner, m, cfg, classes, cenv)
        case Comprehension(x, body):
            return satisfies(m, body, {x: v}, cfg, classes, cenv)
        case Arrow(args, result, kind):
            return _arrow_member(v, args, result, kind, m, cfg, classes, cenv)
        case _:
            raise TypeError(f"not a classification: {k!r}")


def _class_values(k, m, cfg, classes, cenv):
    picked = 0
    for v, _ in enumerate_values(cfg, m, extend=False):
        if picked >= cfg.max_values:
            return
        if class_member(v, k, m, cfg, classes, cenv).holds:
            picked += 1
            yield v


def _arrow_member(f, args, result, kind, m, cfg, classes, cenv) -> Verdict:
    """Function-space membership by testing on enumerated argument tuples.

    total:   every tested application converges to an effect-free value in
             the codomain (strictly: equivalent to some existing value);
    partial: whenever it converges, the value is in the codomain;
    memory:  the codomain judgment runs at the point after the call, so
             allocation and writes along the way are fine.
    """
    domains = [list(_class_values(k, m, cfg, classes, cenv)) for k in args]
    verdicts = []
    for tup in itertools.product(*domains):
        call: Expr = f
        for a in tup:
            call = App(call, a)
        out = run(Description(m, call), cfg.max_steps)
        if isinstance(out, Timeout):
            verdicts.append(_unknown("application timed out"))
            continue
        if isinstance(out, StuckAt):
            # vacuous for the memory arrow: the hole after the call is
            # never reached; acceptable for partial by definition
            verdicts.append(_FAILS if kind == "total" else _HOLDS)
            continue
        w, m_after = out.value, out.memory
        if kind == "total":
            pure = equal_mod_garbage(m_after, w, m, w, m.names())
            if not pure:
                verdicts.append(_FAILS)
                continue
        verdicts.append(class_member(w, result, m_after, cfg, classes, cenv))
    return tri_all(verdicts)


def member_strictly_partial(
    f: Expr,
    m: Memory = EMPTY,
    cfg: EnumConfig = DEFAULT_CONFIG,
    domain: Classification = NAT,
    codomain: Classification = NAT,
) -> Verdict:
    """Membership in the strictly partial maps: partial arrow plus a
    divergence witness.

    Bounded testing cannot certify divergence, so without a witness the
    verdict is unknown; when some tested argument exhausts the step budget
    the verdict is holds with that argument flagged, which is membership
    modulo the budget.  A stuck application already witnesses partiality.
    """
    witness = None
    definite_undefined = False
    for a in _class_values(domain, m, cfg, DEFAULT_CLASSES, {}):
        out = run(Description(m, App(f, a)), cfg.max_steps)
        if isinstance(out, Timeout):
            if witness is None:
                witness = a
        elif isinstance(out, StuckAt):
            definite_undefined = True
            if witness is None:
                witness = a
        else:
            member = class_member(out.value, codomain, out.memory, cfg)
            if member.fails:
                return Verdict("fails", reason="codomain violated on "
                               f"{to_text(a)}")
    if witness is None:
        return _unknown("no divergence witness among tested arguments")
    if definite_undefined:
        return Verdict("holds", reason=f"undefined at {to_text(witness)}")
    return Verdict(
        "holds",
        reason=f"modulo budget: {to_text(witness)} non-terminating within "
        f"{cfg.max_steps} steps",
    )


# ---------------------------------------------------------------------------
# Effect predicates


@dataclass(frozen=True)
class EffectReport:
    not_expand: Verdict
    not_write: Verdict


def effect_predicates(
    e: Expr,
    m: Memory,
    s: dict[str, Expr],
    cfg: EnumConfig = DEFAULT_CONFIG,
) -> EffectReport:
    """Does evaluating e leave the memory domain, and contents, alone?

    not_expand tolerates unreachable fresh garbage: only cells reachable
    from the original memory, the substitution, and the result count as an
    expansion.  not_write wants every pre-existing cell to hold exactly
    what it held before.  A stuck e satisfies both vacuously (the
    after-the-fact assertion point is never reached); a timeout is
    unknown.
    """
    out = run(Description(m, substitute(e, s)), cfg.max_steps)
    if isinstance(out, Timeout):
        u = _unknown("evaluation timed out")
        return EffectReport(u, u)
    if isinstance(out, StuckAt):
        return EffectReport(_HOLDS, _HOLDS)
    live = reachable(out.memory, RootSet(m.names(), result=out.value))
    fresh_live = live - m.names()
    not_expand = _FAILS if fresh_live else _HOLDS
    not_write = _HOLDS
    for z, before in m.bindings:
        if not alpha_equal(out.memory.lookup(z), before):
            not_write = _FAILS
            break
    return EffectReport(not_expand, not_write)


# ---------------------------------------------------------------------------
# Validity over enumerated models, and the three reasoning principles


def check_valid(
    phi: Formula,
    cfg: EnumConfig = DEFAULT_CONFIG,
    classes: ClassEnv = DEFAULT_CLASSES,
    memories=None,
) -> Verdict:
    """Check phi in every enumerated model (memory + closing substitution)."""
    free = sorted(formula_free_vars(phi))
    worst_v = _HOLDS
    cases = definite = timeouts = 0
    for m in memories if memories is not None else default_memories(cfg):
        for sigma, m2 in enumerate_substitutions(cfg, m, free):
            v = satisfies(m2, phi, sigma, cfg, classes)
            cases += 1
            if v.unknown:
                timeouts += 1
                if worst_v.holds:
                    worst_v = v
            else:
                definite += 1
                if v.fails:
                    return replace(
                        v, cases=cases, definite=definite, timeouts=timeouts,
                        reason=f"model {m2} with {sigma}",
                    )
    return replace(worst_v, cases=cases, definite=definite, timeouts=timeouts)


def formula_free_vars(phi: Formula) -> frozenset[str]:
    match phi:
        case Equiv(l, r):
            return free_vars(l) | free_vars(r)
        case Member(e, k):
            return free_vars(e) | _class_free_vars(k)
        case Not(b):
            return formula_free_vars(b)
        case AndF(parts) | OrF(parts):
            out = frozenset()
            for p in parts:
                out |= formula_free_vars(p)
            return out
        case Implies(p, c):
            return formula_free_vars(p) | formula_free_vars(c)
        case Forall(x, b) | Exists(x, b):
            return formula_free_vars(b) - {x}
        case ForallClass(_, b):
            return formula_free_vars(b)
        case CtxAssert(u, b):
            bound = _context_binders(u)
            return free_vars(u) | (formula_free_vars(b) - bound)
        case _:
            raise TypeError(f"not a formula: {phi!r}")


def _class_free_vars(k: Classification) -> frozenset[str]:
    match k:
        case Comprehension(x, body):
            return formula_free_vars(body) - {x}
        case CellOf(inner):
            return _class_free_vars(inner)
        case Arrow(args, result, _):
            out = _class_free_vars(result)
            for a in args:
                out |= _class_free_vars(a)
            return out
        case _:
            return frozenset()


def _context_binders(u: Expr) -> frozenset[str]:
    """Variables bound by the binders on the path from root to hole."""
    match u:
        case Hole():
            return frozenset()
        case Let(x, b, body):
            if count_holes(b):
                return _context_binders(b)
            return _context_binders(body) | {x}
        case _:
            from .syntax import children

            for c in children(u):
                if count_holes(c):
                    return _context_binders(c)
            return frozenset()


def mk_allocation_axiom(v: Expr | str = "v") -> Formula:
    """forall y. let{x := mk(v)}[[ not(x = y)  and  cell?(x) = t
                                   and  get(x) = v ]]

    The allocation axiom: a fresh cell differs from every pre-existing
    value, answers cell?, and holds what it was given.
    """
    val = Var(v) if isinstance(v, str) else v
    ctx = Let("x", Mk(val), Hole())
    body = AndF(
        (
            Not(Equiv(Var("x"), Var("y"))),
            Equiv(Cellp(Var("x")), TRUE),
            Equiv(Get(Var("x")), val),
        )
    )
    return Forall("y", CtxAssert(ctx, body))


def check_principles(cfg: EnumConfig = DEFAULT_CONFIG, instances: int = 100):
    """Meta-test the three contextual-assertion principles.

    (i)   valid phi stays valid under any U[[.]]
    (ii)  U[[e0 = e1]] lets U[e0] replace U[e1]
    (iii) nesting assertions is composing contexts
    Returns a verdict per principle; a single violation fails it.
    """
    import random as _random

    rng = _random.Random(cfg.seed)
    quick = replace(cfg, max_values=3, max_steps=min(cfg.max_steps, 600))
    mems = (EMPTY, Memory((("z0", NIL),)), Memory((("z0", TRUE), ("z1", Nat(0)))))

    def contexts(m: Memory) -> list[Expr]:
        out = [
            Hole(),
            Let("x", Mk(NIL), Hole()),
            Let("x", Mk(TRUE), Hole()),
            Seq((NIL, Hole())),
            If(TRUE, Hole(), NIL),
            If(NIL, Hole(), NIL),  # unreachable hole
            Let("x", Nat(1), Hole()),
        ]
        for z, _ in m.bindings:
            out.append(Seq((SetCell(Var(z), TRUE), Hole())))
            out.append(Let("x", Get(Var(z)), Hole()))
        return out

    formulas = [
        Equiv(Var("w"), Var("w")),
        Equiv(Cellp(Mk(NIL)), TRUE),
        Equiv(Get(Mk(Var("w"))), Var("w")),
        Equiv(Var("w"), NIL),
        Member(Var("w"), VAL),
        Equiv(Let("q", Var("w"), Eq(Var("q"), Var("q"))), TRUE),
    ]
    pairs = [
        (Get(Mk(Var("w"))), Var("w")),
        (Seq((NIL, Var("w"))), Var("w")),
        (Eq(NIL, NIL), TRUE),
        (Var("w"), NIL),
        (Let("q", Nat(0), Add1(Var("q"))), Nat(1)),
    ]

    necessitation = []
    propagation = []
    composition = []
    count = 0
    while count < instances:
        m = mems[rng.randrange(len(mems))]
        us = contexts(m)
        u0 = us[rng.randrange(len(us))]
        u1 = us[rng.randrange(len(us))]
        phi = formulas[rng.randrange(len(formulas))]
        e0, e1 = pairs[rng.randrange(len(pairs))]
        sigmas = list(enumerate_substitutions(quick, m, ["w"]))[:3]
        for sigma, m2 in sigmas:
            count += 1
            # (i) necessitation, per model: phi holding here implies
            # U[[phi]] holds here too
            base = satisfies(m2, phi, sigma, quick)
            if base.holds:
                lifted = satisfies(m2, CtxAssert(u0, phi), sigma, quick)
                necessitation.append(
                    _violation_free("necessitation", lifted, m2, sigma)
                )
            # (ii) propagation through equations
            asserted = satisfies(m2, CtxAssert(u0, Equiv(e0, e1)), sigma, quick)
            if asserted.holds:
                use_cfg = replace(
                    quick, memories=(m2,), ctx_depth=1, max_uses=30
                )
                t0 = substitute(plug(u0, e0), sigma)
                t1 = substitute(plug(u0, e1), sigma)
                outcome = ciu_test(t0, t1, use_cfg)
                propagation.append(
                    _violation_free("propagation", tri_not_fails(outcome), m2, sigma)
                )
            # (iii) composing contexts = collapsing nested assertions
            nested = satisfies(m2, CtxAssert(u0, CtxAssert(u1, phi)), sigma, quick)
            composed = satisfies(m2, CtxAssert(plug(u0, u1), phi), sigma, quick)
            same = nested.tag == composed.tag
            composition.append(
                Verdict("holds" if same else "fails",
                        reason=None if same else f"{nested.tag} vs {composed.tag}")
            )
    from .equivalence import worst

    return {
        "necessitation": worst(_with_case(v) for v in necessitation),
        "propagation": worst(_with_case(v) for v in propagation),
        "composition": worst(_with_case(v) for v in composition),
    }


def tri_not_fails(v: Verdict) -> Verdict:
    # collapses an oracle verdict to "did it definitely disagree?"
    return _FAILS if v.fails else _HOLDS


def _violation_free(which: str, v: Verdict, m, sigma) -> Verdict:
    if v.fails:
        return Verdict("fails", reason=f"{which} violated in {m} under {sigma}")
    return _HOLDS


def _with_case(v: Verdict) -> Verdict:
    return replace(v, cases=1, definite=0 if v.unknown else 1,
                   timeouts=1 if v.unknown else 0)


# ---------------------------------------------------------------------------
# Surface syntax for formulas and classes


def read_assertions(text: str, classes: ClassEnv | None = None):
    """Parse an assertion file: (defclass N x phi) registrations and
    formulas, in order.  Returns (classes, formulas)."""
    classes = classes or ClassEnv()
    formulas: list[Formula] = []
    for sx in read_sexprs(text):
        if (
            isinstance(sx, SList)
            and sx.items
            and isinstance(sx.items[0], SAtom)
            and sx.items[0].text == "defclass"
        ):
            if len(sx.items) != 4 or not isinstance(sx.items[1], SAtom):
                raise ValueError("defclass needs (defclass Name var formula)")
            name = sx.items[1].text
            var = sx.items[2].text
            body = build_formula(sx.items[3], classes)
            classes.register(name, Comprehension(var, body))
        else:
            formulas.append(build_formula(sx, classes))
    return classes, formulas


def build_formula(sx, classes: ClassEnv, class_vars: frozenset[str] = frozenset()) -> Formula:
    if isinstance(sx, SAtom):
        raise ValueError(f"{sx.line}:{sx.col}: a formula must be a form")
    if not sx.items or not isinstance(sx.items[0], SAtom):
        raise ValueError("formula form must start with an operator")
    op = sx.items[0].text
    args = sx.items[1:]
    sub = lambda a: build_formula(a, classes, class_vars)
    match op:
        case "equiv":
            return Equiv(build_expr(args[0]), build_expr(args[1]))
        case "member":
            return Member(build_expr(args[0]), build_class(args[1], classes, class_vars))
        case "not":
            return Not(sub(args[0]))
        case "and":
            return AndF(tuple(sub(a) for a in args))
        case "or":
            return OrF(tuple(sub(a) for a in args))
        case "implies":
            return Implies(sub(args[0]), sub(args[1]))
        case "forall":
            return Forall(args[0].text, sub(args[1]))
        case "exists":
            return Exists(args[0].text, sub(args[1]))
        case "forall-class":
            inner = build_formula(args[1], classes, class_vars | {args[0].text})
            return ForallClass(args[0].text, inner)
        case "ctx":
            return CtxAssert(build_expr(args[0]), sub(args[1]))
        case _:
            raise ValueError(f"unknown formula operator {op!r}")


def build_class(sx, classes: ClassEnv, class_vars: frozenset[str] = frozenset()) -> Classification:
    if isinstance(sx, SAtom):
        name = sx.text
        if name in class_vars:
            return ClassVar(name)
        if name in ("Val", "Nat", "Nil", "Cell") or name in classes.named:
            return Named(name)
        raise ValueError(f"{sx.line}:{sx.col}: unknown class {name!r}")
    op = sx.items[0].text
    args = sx.items[1:]
    match op:
        case "cellof":
            return CellOf(build_class(args[0], classes, class_vars))
        case "arrow" | "parrow" | "muarrow":
            kind = {"arrow": "total", "parrow": "partial", "muarrow": "memory"}[op]
            ks = [build_class(a, classes, class_vars) for a in args]
            return Arrow(tuple(ks[:-1]), ks[-1], kind)
        case "class":
            return Comprehension(args[0].text, build_formula(args[1], classes, class_vars))
        case _:
            raise ValueError(f"unknown class operator {op!r}")


def subset_formula(k0: Classification, k1: Classification, var: str = "x") -> Formula:
    """K0 subset K1 as its defining formula."""
    return Forall(var, Implies(Member(Var(var), k0), Member(Var(var), k1)))


def class_equal_formula(k0: Classification, k1: Classification) -> Formula:
    return AndF((subset_formula(k0, k1), subset_formula(k1, k0)))
