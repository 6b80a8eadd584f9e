"""Shared hypothesis strategies for generating terms."""

from hypothesis import strategies as st

from effects.syntax import (
    Add1,
    App,
    Cellp,
    Eq,
    Fst,
    Get,
    If,
    Lam,
    Let,
    Mk,
    Nat,
    NIL,
    Pair,
    Seq,
    SetCell,
    Snd,
    Sub1,
    TRUE,
    Var,
)

NAMES = ("x", "y", "z", "w")


def exprs(max_depth=4, free_names=NAMES):
    """Terms over a small name pool; free variables allowed."""
    leaves = st.one_of(
        st.sampled_from([NIL, TRUE, Nat(0), Nat(1), Nat(2)]),
        st.sampled_from(free_names).map(Var),
    )

    def extend(children):
        name = st.sampled_from(free_names)
        return st.one_of(
            st.tuples(name, children).map(lambda t: Lam(*t)),
            st.tuples(children, children).map(lambda t: App(*t)),
            st.tuples(name, children, children).map(lambda t: Let(*t)),
            st.lists(children, min_size=1, max_size=3).map(
                lambda es: Seq(tuple(es))
            ),
            st.tuples(children, children, children).map(lambda t: If(*t)),
            children.map(Mk),
            children.map(Get),
            st.tuples(children, children).map(lambda t: SetCell(*t)),
            st.tuples(children, children).map(lambda t: Eq(*t)),
            children.map(Cellp),
            st.tuples(children, children).map(lambda t: Pair(*t)),
            children.map(Fst),
            children.map(Snd),
            children.map(Add1),
            children.map(Sub1),
        )

    return st.recursive(leaves, extend, max_leaves=max_depth * 4)


def closed_exprs(max_depth=4):
    return exprs(max_depth=max_depth, free_names=("x",)).map(_close)


def _close(e):
    from effects.syntax import free_vars, substitute

    s = {x: NIL for x in free_vars(e)}
    return substitute(e, s)
