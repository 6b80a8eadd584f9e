"""Program corpus: the terms the test suite and law library revolve around.

Everything here is a closed expression (or a builder returning one) in the
surface language, kept in one place so tests, laws, and the CLI examples
agree on the exact terms.
"""

from __future__ import annotations

from .syntax import (
    App,
    Expr,
    Get,
    If,
    Lam,
    Let,
    Mk,
    Nat,
    NIL,
    Eq,
    Seq,
    SetCell,
    Sub1,
    Var,
    parse,
    substitute,
)


def substitute_closed(e: Expr, name: str, value: Expr) -> Expr:
    """Splice a closed term in for a free variable."""
    return substitute(e, {name: value})


def omega() -> Expr:
    """The standard divergent term (lambda x. x x)(lambda x. x x)."""
    w = Lam("x", App(Var("x"), Var("x")))
    return App(w, w)


OMEGA = omega()

#: A closed expression that gets stuck in two steps; handy wherever a
#: definitely-undefined (rather than merely slow) term is needed.
STUCK = Get(NIL)


def yv_build() -> Expr:
    """The cell-based call-by-value fixed-point combinator.

    lambda y. let{z := mk(nil)}
                seq(set(z, lambda x. app(app(y, get(z)), x)),
                    get(z))

    Applying it to a functional F = lambda f. lambda x. e yields a closure G
    over a private cell z with G = lambda x. app(app(F, get(z)), x), and G
    behaves like F(G).
    """
    return Lam(
        "y",
        Let(
            "z",
            Mk(NIL),
            Seq(
                (
                    SetCell(
                        Var("z"),
                        Lam("x", App(App(Var("y"), Get(Var("z"))), Var("x"))),
                    ),
                    Get(Var("z")),
                )
            ),
        ),
    )


YV = yv_build()


def eq_via_mutation() -> Expr:
    """Cell identity implemented with get/set instead of the eq primitive.

    lambda x. lambda y.
      let{x0 := get(x)} let{y0 := get(y)}
        seq(set(x, nil), set(y, t),
            let{z := get(x)} seq(set(x, x0), set(y, y0), z))

    Returns t exactly when x and y are the same cell, and puts every cell
    back the way it found it.
    """
    return parse(
        """
        (lambda (x) (lambda (y)
          (let ((x0 (get x))) (let ((y0 (get y)))
            (seq (set x nil)
                 (set y t)
                 (let ((z (get x)))
                   (seq (set x x0) (set y y0) z)))))))
        """
    )


def counter_maker() -> Expr:
    """let{x := mk(0)} lambda y. let{z := get(x)} seq(set(x, add1(z)), z)

    Evaluates to a closure that returns 0, 1, 2, ... on successive calls.
    """
    return parse(
        "(let ((x (mk 0)))"
        " (lambda (y) (let ((z (get x))) (seq (set x (add1 z)) z))))"
    )


def eta_thunk() -> Expr:
    """The memory closure on which the eta law breaks.

    let{z := mk(0)} lambda x. let{y := get(z)} seq(set(z, x), y)

    Each application returns the argument of the previous one (0 the first
    time), while its eta-expansion allocates a fresh cell per call and so
    always returns 0.
    """
    return parse(
        "(let ((z (mk 0)))"
        " (lambda (x) (let ((y (get z))) (seq (set z x) y))))"
    )


def eta_expand(f: Expr, var: str = "v") -> Expr:
    """lambda var. app(f, var), the eta-expansion of f."""
    return Lam(var, App(f, Var(var)))


def _recursive(functional: Expr) -> Expr:
    return App(YV, functional)


def add_program() -> Expr:
    """Curried addition by repeated add1, tied with the fixed-point maker."""
    return _recursive(
        parse(
            "(lambda (a) (lambda (m) (lambda (k)"
            " (if (eq m 0) k (add1 (app (app a (sub1 m)) k))))))"
        )
    )


def mult_program() -> Expr:
    """Curried multiplication by repeated addition."""
    plus = add_program()
    body = parse(
        "(lambda (w) (lambda (m) (lambda (k)"
        " (if (eq m 0) 0 (app (app plus k) (app (app w (sub1 m)) k))))))"
    )
    return Let("plus", plus, _recursive(body))


def fact_functional() -> Expr:
    """F such that app(Yv, F) is factorial (multiplication spelled out)."""
    step = parse(
        "(lambda (f) (lambda (n)"
        " (if (eq n 0) 1 (app (app mult n) (app f (sub1 n))))))"
    )
    return substitute_closed(step, "mult", mult_program())


def fact_program() -> Expr:
    return _recursive(fact_functional())


def zero_functional() -> Expr:
    """lambda p. lambda n. if(eq(n, 0), n, app(p, sub1(n)))

    Its fixed point sends every natural to 0; on naturals it is total even
    though the functional also maps strictly-partial maps to
    strictly-partial maps.
    """
    return Lam(
        "p",
        Lam(
            "n",
            If(
                Eq(Var("n"), Nat(0)),
                Var("n"),
                App(Var("p"), Sub1(Var("n"))),
            ),
        ),
    )


def zero_program() -> Expr:
    return _recursive(zero_functional())


def shared_cell_pair() -> Expr:
    """Two closures communicating through one shared cell.

    let{x := mk(nil)}
      let{f := lambda y. set(x, y)} let{g := lambda z. get(x)} pair(f, g)
    """
    return parse(
        "(let ((x (mk nil)))"
        " (let ((f (lambda (y) (set x y))))"
        "  (let ((g (lambda (z) (get x)))) (pair f g))))"
    )


#: Parsed-and-printed in the syntax round-trip tests.
CORPUS = {
    "omega": OMEGA,
    "stuck": STUCK,
    "yv": YV,
    "eq-via-mutation": eq_via_mutation(),
    "counter": counter_maker(),
    "eta-thunk": eta_thunk(),
    "fact": fact_program(),
    "zero": zero_program(),
    "shared-cell-pair": shared_cell_pair(),
}
