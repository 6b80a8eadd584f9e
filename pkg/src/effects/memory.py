"""Memory contexts as first-class values.

A memory is an ordered list of cell bindings.  Cell names are ordinary
variable names bound by the memory itself, so cycles are fine: a cell's
contents may mention any cell bound here, including itself.  Reachability,
garbage collection, and comparison-up-to-garbage all live here; the last of
these is the engine behind the strong-isomorphism oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    Atom,
    Event,
    Expr,
    Hole,
    Lam,
    Let,
    Letactor,
    Mk,
    Nat,
    NIL,
    SAtom,
    SetCell,
    Seq,
    Var,
    alpha_equal,
    build_expr,
    children,
    free_vars,
    read_sexprs,
    substitute,
    to_text,
)


@dataclass(frozen=True, slots=True)
class Memory:
    bindings: tuple[tuple[str, Expr], ...] = ()

    def __post_init__(self):
        names = [z for z, _ in self.bindings]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate cell names in memory: {names}")

    def names(self) -> frozenset[str]:
        return frozenset(z for z, _ in self.bindings)

    def __contains__(self, name: str) -> bool:
        return any(z == name for z, _ in self.bindings)

    def lookup(self, name: str) -> Expr:
        for z, v in self.bindings:
            if z == name:
                return v
        raise KeyError(name)

    def bind(self, name: str, value: Expr) -> "Memory":
        """Allocate a new cell; the name must be unused."""
        if name in self:
            raise ValueError(f"cell {name} already bound")
        return Memory(self.bindings + ((name, value),))

    def assign(self, name: str, value: Expr) -> "Memory":
        """Replace the contents of an existing cell, preserving order."""
        if name not in self:
            raise KeyError(name)
        return Memory(tuple((z, value if z == name else v) for z, v in self.bindings))

    def __len__(self) -> int:
        return len(self.bindings)

    def __str__(self) -> str:
        inside = ", ".join(f"{z}:={to_text(v)}" for z, v in self.bindings)
        return "{" + inside + "}"


EMPTY = Memory()


@dataclass(frozen=True, slots=True)
class RootSet:
    cells: frozenset[str] = frozenset()
    result: Expr | None = None


def _cell_refs(e: Expr, domain: frozenset[str]) -> frozenset[str]:
    # closures can capture cells, so free variables of lambda bodies count
    return free_vars(e) & domain


def reachable(m: Memory, roots: RootSet) -> frozenset[str]:
    """Least set of cells containing the roots, closed under contents."""
    domain = m.names()
    seen: set[str] = set()
    work = list(roots.cells & domain)
    if roots.result is not None:
        work.extend(_cell_refs(roots.result, domain))
    while work:
        z = work.pop()
        if z in seen:
            continue
        seen.add(z)
        work.extend(_cell_refs(m.lookup(z), domain))
    return frozenset(seen)


def gc(m: Memory, roots: RootSet) -> Memory:
    """Restrict m to its reachable cells; order preserved, idempotent."""
    live = reachable(m, roots)
    return Memory(tuple((z, v) for z, v in m.bindings if z in live))


def equal_mod_garbage(
    m0: Memory,
    v0: Expr,
    m1: Memory,
    v1: Expr,
    roots: frozenset[str] = frozenset(),
) -> bool:
    """Are (m0, v0) and (m1, v1) identical up to garbage and cell renaming?

    Looks for a bijection between the reachable cells of both sides that is
    the identity on the pre-existing `roots`, aligns v0 with v1, and makes
    cell contents correspond (lambdas up to alpha, through the bijection).
    Because cells are unary the correspondence is forced positionally, so
    this is plain unification: any conflict means no bijection exists.
    """
    names0, names1 = m0.names(), m1.names()
    fwd: dict[str, str] = {}
    bwd: dict[str, str] = {}
    queue: list[tuple[str, str]] = []

    def match_cells(a: str, b: str) -> bool:
        if a in fwd:
            return fwd[a] == b
        if b in bwd:
            return False
        fwd[a] = b
        bwd[b] = a
        queue.append((a, b))
        return True

    for r in sorted(roots):
        in0, in1 = r in names0, r in names1
        if in0 != in1:
            return False
        if in0 and not match_cells(r, r):
            return False

    def match_values(a: Expr, b: Expr, env0: dict, env1: dict, depth: int) -> bool:
        if type(a) is not type(b):
            return False
        match a, b:
            case Var(x), Var(y):
                bx, by = env0.get(x), env1.get(y)
                if bx is not None or by is not None:
                    return bx == by
                cx, cy = x in names0, y in names1
                if cx and cy:
                    return match_cells(x, y)
                if cx or cy:
                    return False
                return x == y
            case Lam(x, b0), Lam(y, b1):
                return match_values(
                    b0, b1, {**env0, x: depth}, {**env1, y: depth}, depth + 1
                )
            case Let(x, i0, b0), Let(y, i1, b1):
                return match_values(i0, i1, env0, env1, depth) and match_values(
                    b0, b1, {**env0, x: depth}, {**env1, y: depth}, depth + 1
                )
            case Letactor(x, h0, b0), Letactor(y, h1, b1):
                n0 = {**env0, x: depth}
                n1 = {**env1, y: depth}
                return match_values(h0, h1, n0, n1, depth + 1) and match_values(
                    b0, b1, n0, n1, depth + 1
                )
            case (Nat(), Nat()) | (Atom(), Atom()) | (Event(), Event()):
                return a == b
            case _:
                ca, cb = children(a), children(b)
                if len(ca) != len(cb):
                    return False
                return all(
                    match_values(x, y, env0, env1, depth) for x, y in zip(ca, cb)
                )

    if not match_values(v0, v1, {}, {}, 0):
        return False
    while queue:
        a, b = queue.pop(0)
        if not match_values(m0.lookup(a), m1.lookup(b), {}, {}, 0):
            return False
    return True


def memories_alpha_equal(m0: Memory, m1: Memory) -> bool:
    """Same shape after renaming cells positionally (binding order matters)."""
    if len(m0) != len(m1):
        return False
    ren = {a: Var(b) for (a, _), (b, _) in zip(m0.bindings, m1.bindings)}
    for (_, v0), (_, v1) in zip(m0.bindings, m1.bindings):
        if not alpha_equal(substitute(v0, ren), v1):
            return False
    return True


def canonicalize(m: Memory) -> Expr:
    """Render m as the allocate-then-assign context.

    Empty memory is just the hole; otherwise
    let{z1:=mk(nil)} ... let{zn:=mk(nil)} seq(set(z1,v1), ..., set(zn,vn), _),
    which rebuilds m (cycles included) when plugged and evaluated.
    """
    if not m.bindings:
        return Hole()
    body = Seq(tuple(SetCell(Var(z), v) for z, v in m.bindings) + (Hole(),))
    for z, _ in reversed(m.bindings):
        body = Let(z, Mk(NIL), body)
    return body


def parse_memory(text: str) -> Memory:
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise ValueError("expected a single (memory ...) form")
    return memory_from_sexpr(forms[0])


def memory_from_sexpr(sx) -> Memory:
    items = getattr(sx, "items", None)
    if not items or not isinstance(items[0], SAtom) or items[0].text != "memory":
        raise ValueError("memory literal must look like (memory (z v) ...)")
    bindings = []
    for b in items[1:]:
        sub = getattr(b, "items", None)
        if not sub or len(sub) != 2 or not isinstance(sub[0], SAtom):
            raise ValueError("memory binding must look like (name value)")
        bindings.append((sub[0].text, build_expr(sub[1])))
    return Memory(tuple(bindings))


def to_literal(m: Memory) -> str:
    inside = " ".join(f"({z} {to_text(v)})" for z, v in m.bindings)
    return f"(memory {inside})" if inside else "(memory)"
