import itertools

import pytest

from effects.memory import (
    EMPTY,
    Memory,
    RootSet,
    canonicalize,
    equal_mod_garbage,
    gc,
    memories_alpha_equal,
    memory_from_sexpr,
    parse_memory,
    reachable,
    to_literal,
)
from effects.reducer import Description, Value, run
from effects.syntax import (
    Lam,
    Nat,
    NIL,
    Pair,
    TRUE,
    Var,
    alpha_equal,
    plug,
    read_sexprs,
)


def mem(*pairs):
    return Memory(tuple(pairs))


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        mem(("z0", NIL), ("z0", TRUE))


def test_assign_preserves_order():
    m = mem(("a", NIL), ("b", NIL)).assign("a", TRUE)
    assert m.bindings == (("a", TRUE), ("b", NIL))


# ---------------------------------------------------------------------------
# Reachability and gc


def test_reachable_chain():
    m = mem(("z0", Var("z1")), ("z1", NIL))
    assert reachable(m, RootSet(frozenset({"z0"}))) == {"z0", "z1"}


def test_reachable_self_loop_closes():
    m = mem(("z0", Var("z0")))
    assert reachable(m, RootSet(frozenset({"z0"}))) == {"z0"}


def test_reachable_ignores_unrooted():
    m = mem(("z0", NIL), ("z1", NIL))
    assert reachable(m, RootSet(frozenset({"z0"}))) == {"z0"}


def test_reachable_through_lambda_capture():
    m = mem(("z0", Lam("x", Var("z1"))), ("z1", NIL))
    assert reachable(m, RootSet(frozenset({"z0"}))) == {"z0", "z1"}


def test_reachable_via_result_value():
    m = mem(("z0", NIL))
    assert reachable(m, RootSet(frozenset(), result=Pair(Var("z0"), NIL))) == {"z0"}


def test_reachable_monotone_in_roots():
    m = mem(("z0", NIL), ("z1", Var("z0")), ("z2", NIL))
    small = reachable(m, RootSet(frozenset({"z1"})))
    big = reachable(m, RootSet(frozenset({"z1", "z2"})))
    assert small <= big


def test_gc_identity_and_idempotence():
    m = mem(("z0", NIL), ("z1", Var("z0")))
    roots = RootSet(frozenset({"z0", "z1"}))
    assert gc(m, roots) == m
    pruned = gc(m, RootSet(frozenset({"z0"})))
    assert pruned == mem(("z0", NIL))
    assert gc(pruned, RootSet(frozenset({"z0"}))) == pruned


# ---------------------------------------------------------------------------
# equal_mod_garbage, checked against a brute-force bijection oracle


def test_iso_examples():
    # fresh self-loops under different names
    assert equal_mod_garbage(
        mem(("z0", Var("z0"))), Var("z0"), mem(("w0", Var("w0"))), Var("w0")
    )
    # contents differ
    assert not equal_mod_garbage(
        mem(("z0", TRUE)), Var("z0"), mem(("z0", NIL)), Var("z0"),
        roots=frozenset({"z0"}),
    )
    # garbage tolerated
    assert equal_mod_garbage(
        mem(("z0", NIL), ("z1", TRUE)), Var("z1"), mem(("w", TRUE)), Var("w")
    )


def test_iso_respects_root_identity():
    # the pre-existing cell must map to itself, not to a lookalike
    m0 = mem(("r", NIL), ("f", NIL))
    m1 = mem(("r", NIL), ("f", NIL))
    assert not equal_mod_garbage(m0, Var("f"), m1, Var("r"), roots=frozenset({"r"}))
    assert equal_mod_garbage(m0, Var("f"), m1, Var("f"), roots=frozenset({"r"}))


def brute_force_iso(m0, v0, m1, v1, roots):
    """Oracle: try every bijection between the reachable cell sets."""
    r0 = sorted(reachable(m0, RootSet(roots, result=v0)))
    r1 = sorted(reachable(m1, RootSet(roots, result=v1)))
    if len(r0) != len(r1):
        return False

    def respects(mapping):
        ren = {a: Var(b) for a, b in mapping.items()}

        def rename(e):
            from effects.syntax import substitute

            return substitute(e, ren)

        for r in roots:
            if r in mapping and mapping[r] != r:
                return False
        if not alpha_equal(rename(v0), v1):
            return False
        for a in r0:
            b = mapping[a]
            if not alpha_equal(rename(m0.lookup(a)), m1.lookup(b)):
                return False
        return True

    for perm in itertools.permutations(r1):
        if respects(dict(zip(r0, perm))):
            return True
    return False


def enumerate_small_memories():
    contents = [NIL, TRUE, Nat(0)]
    yield EMPTY
    for n in (1, 2):
        names = [f"z{i}" for i in range(n)]
        pools = [contents + [Var(z) for z in names]] * n
        for combo in itertools.product(*pools):
            yield Memory(tuple(zip(names, combo)))


def test_iso_matches_brute_force_on_small_memories():
    mems = list(enumerate_small_memories())
    for m0, m1 in itertools.product(mems, mems):
        v0 = Var(m0.bindings[0][0]) if len(m0) else NIL
        v1 = Var(m1.bindings[0][0]) if len(m1) else NIL
        got = equal_mod_garbage(m0, v0, m1, v1)
        want = brute_force_iso(m0, v0, m1, v1, frozenset())
        assert got == want, (str(m0), str(m1))


def test_iso_is_equivalence_on_small_memories():
    mems = [(m, Var(m.bindings[0][0]) if len(m) else NIL)
            for m in enumerate_small_memories()]
    for m, v in mems:
        assert equal_mod_garbage(m, v, m, v)
    for (m0, v0), (m1, v1) in itertools.product(mems, repeat=2):
        assert equal_mod_garbage(m0, v0, m1, v1) == equal_mod_garbage(
            m1, v1, m0, v0
        )
    import random

    rng = random.Random(7)
    sample = rng.sample(list(itertools.product(mems, repeat=3)), 400)
    for (m0, v0), (m1, v1), (m2, v2) in sample:
        if equal_mod_garbage(m0, v0, m1, v1) and equal_mod_garbage(m1, v1, m2, v2):
            assert equal_mod_garbage(m0, v0, m2, v2)


def test_iso_gc_compatibility():
    # agreement up to garbage is agreement of the gc'd versions
    m0 = mem(("z0", NIL), ("junk", TRUE))
    m1 = mem(("w", NIL))
    v0, v1 = Var("z0"), Var("w")
    assert equal_mod_garbage(m0, v0, m1, v1)
    g0 = gc(m0, RootSet(frozenset(), result=v0))
    g1 = gc(m1, RootSet(frozenset(), result=v1))
    assert equal_mod_garbage(g0, v0, g1, v1)
    assert len(g0) == len(g1) == 1


# ---------------------------------------------------------------------------
# Canonical contexts


def test_canonicalize_self_loop_shape():
    ctx = canonicalize(mem(("z0", Var("z0"))))
    from effects.syntax import to_text

    assert to_text(ctx) == "(let ((z0 (mk nil))) (seq (set z0 z0) _))"


def test_canonicalize_empty():
    from effects.syntax import Hole

    assert canonicalize(EMPTY) == Hole()


@pytest.mark.parametrize(
    "m",
    [
        mem(("z0", NIL)),
        mem(("z0", Var("z0"))),
        mem(("z0", NIL), ("z1", Var("z0"))),
        mem(("z0", Var("z1")), ("z1", Var("z0"))),
        mem(("z0", Pair(Var("z0"), Nat(2)))),
    ],
)
def test_canonicalize_round_trip(m):
    # evaluating the rendered context rebuilds the memory up to renaming
    prog = plug(canonicalize(m), NIL)
    out = run(Description(EMPTY, prog), 1000)
    assert isinstance(out, Value)
    assert memories_alpha_equal(out.memory, m)


# ---------------------------------------------------------------------------
# Literals


def test_memory_literal_round_trip():
    m = mem(("z0", NIL), ("z1", Var("z0")))
    assert parse_memory(to_literal(m)) == m
    assert parse_memory("(memory)") == EMPTY


def test_memory_literal_rejects_bad_shape():
    with pytest.raises(ValueError):
        parse_memory("(mem (z0 nil))")
    with pytest.raises(ValueError):
        memory_from_sexpr(read_sexprs("(memory (z0))")[0])
