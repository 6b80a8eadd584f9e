"""Abstract and surface syntax for the lambda language with cells and actors.

Terms are immutable trees.  The surface syntax is parenthesized prefix
notation:

    expr := var | "nil" | "t" | NAT | "(" form ")"
    form := "lambda" "(" var ")" expr
          | "app" expr expr
          | "let" "(" "(" var expr ")" ")" expr
          | "seq" expr+
          | "if" expr expr expr
          | "mk" expr | "get" expr | "set" expr expr
          | "eq" expr expr | "cell?" expr
          | "pair" expr expr | "fst" expr | "snd" expr
          | "add1" expr | "sub1" expr | "nat?" expr
          | "send" expr expr | "become" expr
          | "letactor" "(" "(" var expr ")" ")" expr
          | "event" [symbol]

A context is an expression containing exactly one hole, written "_" in
source text.  Cell names and actor names are ordinary variables bound by
an ambient memory or configuration, so most operations that care about
values take a set of names to treat as first-class values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


class Expr:
    """Base class for all term nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Lam(Expr):
    param: str
    body: Expr


@dataclass(frozen=True, slots=True)
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True, slots=True)
class Let(Expr):
    var: str
    bound: Expr
    body: Expr


@dataclass(frozen=True, slots=True)
class Seq(Expr):
    exprs: tuple[Expr, ...]  # length >= 1

    def __post_init__(self):
        if not self.exprs:
            raise ValueError("seq needs at least one subexpression")


@dataclass(frozen=True, slots=True)
class If(Expr):
    test: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True, slots=True)
class Mk(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Get(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class SetCell(Expr):
    cell: Expr
    value: Expr


@dataclass(frozen=True, slots=True)
class Eq(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Cellp(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Pair(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Fst(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Snd(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Add1(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Sub1(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Natp(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Nat(Expr):
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("nat literals are non-negative")


@dataclass(frozen=True, slots=True)
class Atom(Expr):
    name: str  # "nil" or "t"


NIL = Atom("nil")
TRUE = Atom("t")


@dataclass(frozen=True, slots=True)
class Send(Expr):
    target: Expr
    payload: Expr


@dataclass(frozen=True, slots=True)
class Become(Expr):
    behavior: Expr


@dataclass(frozen=True, slots=True)
class Letactor(Expr):
    var: str
    behavior: Expr  # var is bound here too, so an actor can name itself
    body: Expr


@dataclass(frozen=True, slots=True)
class Event(Expr):
    tag: str | None = None


@dataclass(frozen=True, slots=True)
class Hole(Expr):
    """The context hole, printed as "_"."""


@dataclass(frozen=True, slots=True)
class Mark(Expr):
    """Assertion point used by the formula checker.

    Plugged into the hole of a univalent context before evaluation;
    substitutions reaching it are recorded rather than discarded, so the
    bindings crossed on the way to the hole can be recovered.  Never
    produced by the parser.
    """

    env: tuple[tuple[str, Expr], ...] = ()


# Binder layout: (field holding the bound name, fields the name scopes over).
_BINDERS = {
    Lam: ("param", ("body",)),
    Let: ("var", ("body",)),
    Letactor: ("var", ("behavior", "body")),
}


def children(e: Expr) -> tuple[Expr, ...]:
    """Immediate subterms of e, in field order (Seq is flattened)."""
    if isinstance(e, Seq):
        return e.exprs
    out = []
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, Expr):
            out.append(v)
    return tuple(out)


def rebuild(e: Expr, new: tuple[Expr, ...]) -> Expr:
    """Rebuild e with its Expr-valued fields replaced by new, in order."""
    if isinstance(e, Seq):
        return Seq(new)
    it = iter(new)
    kwargs = {}
    for f in fields(e):
        v = getattr(e, f.name)
        kwargs[f.name] = next(it) if isinstance(v, Expr) else v
    return type(e)(**kwargs)


def free_vars(e: Expr) -> frozenset[str]:
    match e:
        case Var(x):
            return frozenset((x,))
        case Lam(x, b):
            return free_vars(b) - {x}
        case Let(x, e0, b):
            return free_vars(e0) | (free_vars(b) - {x})
        case Letactor(x, bh, b):
            return (free_vars(bh) | free_vars(b)) - {x}
        case Mark(env):
            out = frozenset()
            for _, v in env:
                out |= free_vars(v)
            return out
        case _:
            out = frozenset()
            for c in children(e):
                out |= free_vars(c)
            return out


def all_names(e: Expr) -> frozenset[str]:
    """Every variable name occurring in e, bound or free."""
    match e:
        case Var(x):
            return frozenset((x,))
        case Lam(x, b):
            return all_names(b) | {x}
        case Let(x, e0, b):
            return all_names(e0) | all_names(b) | {x}
        case Letactor(x, bh, b):
            return all_names(bh) | all_names(b) | {x}
        case Mark(env):
            out = frozenset(k for k, _ in env)
            for _, v in env:
                out |= all_names(v)
            return out
        case _:
            out = frozenset()
            for c in children(e):
                out |= all_names(c)
            return out


def fresh_name(base: str, avoid) -> str:
    """First name of the family base, base1, base2, ... not in avoid."""
    root = base.rstrip("0123456789") or base
    if base not in avoid:
        return base
    i = 1
    while f"{root}{i}" in avoid:
        i += 1
    return f"{root}{i}"


Subst = dict[str, Expr]


def substitute(e: Expr, s: Subst) -> Expr:
    """Capture-avoiding simultaneous substitution of values for variables."""
    if not s:
        return e
    match e:
        case Var(x):
            return s.get(x, e)
        case Lam(x, b):
            x2, b2, s2 = _under_binder(x, (b,), s)
            if s2 is None:
                return e
            return Lam(x2, substitute(b2[0], s2))
        case Let(x, e0, b):
            e0s = substitute(e0, s)
            x2, b2, s2 = _under_binder(x, (b,), s)
            if s2 is None:
                return Let(x, e0s, b)
            return Let(x2, e0s, substitute(b2[0], s2))
        case Letactor(x, bh, b):
            x2, scoped, s2 = _under_binder(x, (bh, b), s)
            if s2 is None:
                return e
            return Letactor(x2, substitute(scoped[0], s2), substitute(scoped[1], s2))
        case Mark(env):
            return Mark(env + tuple(s.items()))
        case _:
            cs = children(e)
            if not cs:
                return e
            return rebuild(e, tuple(substitute(c, s) for c in cs))


def contains_mark(e: Expr) -> bool:
    if isinstance(e, Mark):
        return True
    return any(contains_mark(c) for c in children(e))


def _under_binder(x: str, scoped: tuple[Expr, ...], s: Subst):
    """Prepare substitution under a binder of x over the scoped subterms.

    Returns (new binder name, renamed scoped subterms, restricted subst),
    or (x, scoped, None) when nothing needs doing.  The binder is renamed
    only when some substituted value would capture it.  A Mark absorbs
    every substitution, so the liveness restriction is off near one.
    """
    absorbing = any(contains_mark(t) for t in scoped)
    live = frozenset()
    for t in scoped:
        live |= free_vars(t)
    s2 = {k: v for k, v in s.items() if k != x and (absorbing or k in live)}
    if not s2:
        return x, scoped, None
    range_fv = frozenset()
    for v in s2.values():
        range_fv |= free_vars(v)
    if x not in range_fv:
        return x, scoped, s2
    avoid = set(range_fv) | set(s2)
    for t in scoped:
        avoid |= all_names(t)
    x2 = fresh_name(x, avoid)
    renamed = tuple(substitute(t, {x: Var(x2)}) for t in scoped)
    return x2, renamed, s2


def alpha_equal(e0: Expr, e1: Expr) -> bool:
    """Structural equality up to consistent renaming of bound variables."""
    return _alpha(e0, e1, {}, {}, 0)


def _alpha(a: Expr, b: Expr, env0, env1, depth) -> bool:
    if type(a) is not type(b):
        return False
    match a, b:
        case Var(x), Var(y):
            bx, by = env0.get(x), env1.get(y)
            if bx is None and by is None:
                return x == y  # both free (e.g. cell names)
            return bx == by
        case Lam(x, bd0), Lam(y, bd1):
            return _alpha(bd0, bd1, {**env0, x: depth}, {**env1, y: depth}, depth + 1)
        case Let(x, i0, bd0), Let(y, i1, bd1):
            return _alpha(i0, i1, env0, env1, depth) and _alpha(
                bd0, bd1, {**env0, x: depth}, {**env1, y: depth}, depth + 1
            )
        case Letactor(x, bh0, bd0), Letactor(y, bh1, bd1):
            e0n = {**env0, x: depth}
            e1n = {**env1, y: depth}
            return _alpha(bh0, bh1, e0n, e1n, depth + 1) and _alpha(
                bd0, bd1, e0n, e1n, depth + 1
            )
        case _:
            if isinstance(a, (Nat, Atom, Event)):
                return a == b
            ca, cb = children(a), children(b)
            if len(ca) != len(cb):
                return False
            return all(_alpha(x, y, env0, env1, depth) for x, y in zip(ca, cb))


# ---------------------------------------------------------------------------
# Values, contexts, decomposition


def is_value(e: Expr, value_names: frozenset[str] = frozenset()) -> bool:
    """Value predicate: lambdas, atoms, nats, bound names, pairs of values.

    value_names holds the cell (or actor) names bound by the ambient
    memory or configuration; a variable is a value exactly when it names
    one of those.
    """
    match e:
        case Lam() | Nat() | Atom():
            return True
        case Var(x):
            return x in value_names
        case Pair(a, b):
            return is_value(a, value_names) and is_value(b, value_names)
        case _:
            return False


def is_redex(e: Expr, value_names: frozenset[str] = frozenset()) -> bool:
    """True when e is a primitive computation step waiting to fire."""
    v = lambda t: is_value(t, value_names)
    match e:
        case App(f, a):
            return v(f) and v(a)
        case Let(_, b, _):
            return v(b)
        case Seq(es):
            return v(es[0])
        case If(c, _, _):
            return v(c)
        case Mk(a) | Get(a) | Cellp(a) | Fst(a) | Snd(a) | Add1(a) | Sub1(a) | Natp(a) | Become(a):
            return v(a)
        case SetCell(a, b) | Eq(a, b) | Send(a, b):
            return v(a) and v(b)
        case Event():
            return True
        case Letactor():
            return True
        case _:
            return False


def _eval_positions(e: Expr) -> tuple[int, ...]:
    """Indices into children(e) that are evaluated, left to right."""
    match e:
        case App() | SetCell() | Eq() | Pair() | Send():
            return (0, 1)
        case Let():
            return (0,)  # the bound expression only
        case Seq():
            return (0,)
        case If():
            return (0,)
        case Mk() | Get() | Cellp() | Fst() | Snd() | Add1() | Sub1() | Natp() | Become():
            return (0,)
        case _:
            return ()


def decompose(e: Expr, value_names: frozenset[str] = frozenset()):
    """Split e into reduction context and redex under left-first CBV.

    Returns one of:
      ("value",)           e is a value
      ("redex", R, r)      e = plug(R, r) with r the unique next redex
      ("stuck", R, at)     the focused position holds something inert
                           (a free variable, a hole, a mark)
    """
    if is_value(e, value_names):
        return ("value",)
    cs = children(e)
    for i in _eval_positions(e):
        c = cs[i]
        if not is_value(c, value_names):
            tag, ctx, focus = decompose(c, value_names)
            wrapped = rebuild(e, cs[:i] + (ctx,) + cs[i + 1 :])
            return (tag, wrapped, focus)
    if is_redex(e, value_names):
        return ("redex", Hole(), e)
    return ("stuck", Hole(), e)


def plug(c: Expr, e: Expr) -> Expr:
    """Textual replacement of the hole; plugging may capture, by design."""
    match c:
        case Hole():
            return e
        case _:
            cs = children(c)
            for i, sub in enumerate(cs):
                if count_holes(sub):
                    return rebuild(c, cs[:i] + (plug(sub, e),) + cs[i + 1 :])
            return c


def count_holes(e: Expr) -> int:
    if isinstance(e, Hole):
        return 1
    return sum(count_holes(c) for c in children(e))


def is_context(e: Expr) -> bool:
    return count_holes(e) == 1


def is_univalent(c: Expr) -> bool:
    """No (non-let) lambda lies on the path from the root to the hole.

    let and letactor binders along the path are fine; a hole inside a
    lambda body or a letactor behavior is not.
    """
    match c:
        case Hole():
            return True
        case Lam():
            return False  # a hole below here sits under the lambda
        case Letactor(_, bh, bd):
            if count_holes(bh):
                return False
            return count_holes(bd) == 0 or is_univalent(bd)
        case _:
            for sub in children(c):
                if count_holes(sub):
                    return is_univalent(sub)
            return True  # no hole at all; vacuous


def is_reduction_context(c: Expr, value_names: frozenset[str] = frozenset()) -> bool:
    """Does the hole sit in the unique next-to-evaluate position?"""
    match c:
        case Hole():
            return True
        case _:
            cs = children(c)
            pos = _eval_positions(c)
            holed = [i for i, sub in enumerate(cs) if count_holes(sub)]
            if len(holed) != 1 or holed[0] not in pos:
                return False
            i = holed[0]
            # every evaluated position to the left must already be a value
            for j in pos:
                if j >= i:
                    break
                if not is_value(cs[j], value_names):
                    return False
            return is_reduction_context(cs[i], value_names)


# ---------------------------------------------------------------------------
# Reader for the parenthesized surface syntax


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class UnknownOperatorError(ParseError):
    pass


@dataclass
class SAtom:
    text: str
    line: int
    col: int


@dataclass
class SList:
    items: list
    line: int
    col: int


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield (ch, line, col)
            col += 1
            i += 1
        else:
            start = i
            startcol = col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            yield (text[start:i], line, startcol)


def read_sexprs(text: str) -> list:
    """Read every s-expression in text into SAtom/SList trees."""
    stack: list[SList] = []
    top: list = []
    for tok, line, col in tokenize(text):
        if tok == "(":
            stack.append(SList([], line, col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            (stack[-1].items if stack else top).append(done)
        else:
            atom = SAtom(tok, line, col)
            (stack[-1].items if stack else top).append(atom)
    if stack:
        raise ParseError("unclosed '('", stack[-1].line, stack[-1].col)
    return top


_NULLARY = {"event"}

_UNARY = {
    "mk": Mk, "get": Get, "cell?": Cellp, "fst": Fst, "snd": Snd,
    "add1": Add1, "sub1": Sub1, "nat?": Natp, "become": Become,
}

_BINARY = {
    "app": App, "set": SetCell, "eq": Eq, "pair": Pair, "send": Send,
}


def build_expr(sx) -> Expr:
    if isinstance(sx, SAtom):
        t = sx.text
        if t == "nil":
            return NIL
        if t == "t":
            return TRUE
        if t == "_":
            return Hole()
        if t.isdigit():
            return Nat(int(t))
        if t == "(" or t == ")":
            raise ParseError("unexpected delimiter", sx.line, sx.col)
        return Var(t)
    if not sx.items:
        raise ParseError("empty form", sx.line, sx.col)
    head = sx.items[0]
    if not isinstance(head, SAtom):
        # ((lambda (x) e) v ...) reads as left-nested application
        if len(sx.items) < 2:
            raise ParseError("application needs an argument", sx.line, sx.col)
        out = build_expr(head)
        for a in sx.items[1:]:
            out = App(out, build_expr(a))
        return out
    op = head.text
    args = sx.items[1:]

    def want(k):
        if len(args) != k:
            raise ParseError(f"{op} takes {k} argument(s), got {len(args)}",
                             head.line, head.col)

    if op in _UNARY:
        want(1)
        return _UNARY[op](build_expr(args[0]))
    if op in _BINARY:
        want(2)
        cls = _BINARY[op]
        return cls(build_expr(args[0]), build_expr(args[1]))
    if op == "lambda":
        want(2)
        return Lam(_binder_name(args[0], op), build_expr(args[1]))
    if op == "let" or op == "letactor":
        want(2)
        name, init = _binding_pair(args[0], op)
        body = build_expr(args[1])
        return Let(name, init, body) if op == "let" else Letactor(name, init, body)
    if op == "seq":
        if not args:
            raise ParseError("seq needs at least one expression", head.line, head.col)
        return Seq(tuple(build_expr(a) for a in args))
    if op == "if":
        want(3)
        return If(build_expr(args[0]), build_expr(args[1]), build_expr(args[2]))
    if op == "event":
        if len(args) > 1:
            raise ParseError("event takes at most one tag", head.line, head.col)
        if args:
            if not isinstance(args[0], SAtom):
                raise ParseError("event tag must be a symbol", head.line, head.col)
            return Event(args[0].text)
        return Event(None)
    raise UnknownOperatorError(f"unknown operator {op!r}", head.line, head.col)


def _binder_name(sx, op) -> str:
    # lambda's parameter list: "(" var ")"
    if isinstance(sx, SList) and len(sx.items) == 1 and isinstance(sx.items[0], SAtom):
        return sx.items[0].text
    raise ParseError(f"{op} expects a single-variable parameter list",
                     sx.line, sx.col)


def _binding_pair(sx, op):
    # let/letactor binding list: "(" "(" var expr ")" ")"
    if (
        isinstance(sx, SList)
        and len(sx.items) == 1
        and isinstance(sx.items[0], SList)
        and len(sx.items[0].items) == 2
        and isinstance(sx.items[0].items[0], SAtom)
    ):
        inner = sx.items[0]
        return inner.items[0].text, build_expr(inner.items[1])
    raise ParseError(f"{op} expects a binding list ((var expr))", sx.line, sx.col)


def parse(text: str) -> Expr:
    """Parse one expression from text."""
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise ParseError(f"expected one expression, found {len(forms)}", 1, 1)
    return build_expr(forms[0])


def to_text(e: Expr) -> str:
    match e:
        case Var(x):
            return x
        case Atom(n):
            return n
        case Nat(v):
            return str(v)
        case Hole():
            return "_"
        case Lam(x, b):
            return f"(lambda ({x}) {to_text(b)})"
        case App(f, a):
            return f"(app {to_text(f)} {to_text(a)})"
        case Let(x, i, b):
            return f"(let (({x} {to_text(i)})) {to_text(b)})"
        case Letactor(x, i, b):
            return f"(letactor (({x} {to_text(i)})) {to_text(b)})"
        case Seq(es):
            return "(seq " + " ".join(to_text(x) for x in es) + ")"
        case If(c, t, o):
            return f"(if {to_text(c)} {to_text(t)} {to_text(o)})"
        case Mk(a):
            return f"(mk {to_text(a)})"
        case Get(a):
            return f"(get {to_text(a)})"
        case SetCell(a, b):
            return f"(set {to_text(a)} {to_text(b)})"
        case Eq(a, b):
            return f"(eq {to_text(a)} {to_text(b)})"
        case Cellp(a):
            return f"(cell? {to_text(a)})"
        case Pair(a, b):
            return f"(pair {to_text(a)} {to_text(b)})"
        case Fst(a):
            return f"(fst {to_text(a)})"
        case Snd(a):
            return f"(snd {to_text(a)})"
        case Add1(a):
            return f"(add1 {to_text(a)})"
        case Sub1(a):
            return f"(sub1 {to_text(a)})"
        case Natp(a):
            return f"(nat? {to_text(a)})"
        case Send(a, b):
            return f"(send {to_text(a)} {to_text(b)})"
        case Become(a):
            return f"(become {to_text(a)})"
        case Event(tag):
            return f"(event {tag})" if tag else "(event)"
        case Mark(env):
            inside = " ".join(f"({k} {to_text(v)})" for k, v in env)
            return f"(#mark {inside})"
        case _:
            raise TypeError(f"not an Expr: {e!r}")


def nat(n: int) -> Nat:
    return Nat(n)


def lam(*params_and_body) -> Expr:
    """lam("x", "y", body) builds nested single-argument lambdas."""
    *params, body = params_and_body
    for p in reversed(params):
        body = Lam(p, body)
    return body


def apply_n(fn: Expr, *args: Expr) -> Expr:
    """Left-nested application of fn to each argument in turn."""
    out = fn
    for a in args:
        out = App(out, a)
    return out
