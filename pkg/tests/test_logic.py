import itertools
from dataclasses import replace

import pytest

from effects.equivalence import DEFAULT_CONFIG, enumerate_memories
from effects.logic import (
    AndF,
    Arrow,
    CELL,
    CellOf,
    ClassEnv,
    Comprehension,
    CtxAssert,
    DEFAULT_CLASSES,
    EffectReport,
    Equiv,
    Exists,
    Forall,
    ForallClass,
    Implies,
    Member,
    NAT,
    NIL_CLASS,
    Not,
    VAL,
    Verdict,
    check_principles,
    check_valid,
    class_equal_formula,
    class_member,
    effect_predicates,
    formula_free_vars,
    member_strictly_partial,
    mk_allocation_axiom,
    read_assertions,
    run_to_hole,
    satisfies,
    subset_formula,
    tri_all,
    tri_any,
    tri_not,
)
from effects.memory import EMPTY, Memory
from effects.programs import OMEGA, zero_program
from effects.reducer import Description, run
from effects.syntax import (
    Eq,
    Get,
    Hole,
    If,
    Lam,
    Let,
    Mk,
    Nat,
    NIL,
    Seq,
    SetCell,
    TRUE,
    Var,
    parse,
)

HOLDS = Verdict("holds")
FAILS = Verdict("fails")
UNKNOWN = Verdict("unknown", reason="?")


def mem(*pairs):
    return Memory(tuple(pairs))


# ---------------------------------------------------------------------------
# Kleene connectives


def test_kleene_tables():
    assert tri_not(HOLDS).fails and tri_not(FAILS).holds and tri_not(UNKNOWN).unknown
    assert tri_all([HOLDS, HOLDS]).holds
    assert tri_all([HOLDS, FAILS]).fails
    assert tri_all([UNKNOWN, FAILS]).fails  # fails dominates unknown in and
    assert tri_all([HOLDS, UNKNOWN]).unknown
    assert tri_any([FAILS, HOLDS]).holds
    assert tri_any([FAILS, UNKNOWN]).unknown
    assert tri_any([FAILS, FAILS]).fails


def test_kleene_monotone_refinement():
    # replacing unknown inputs by either definite value never flips an
    # already-determined connective output
    for op in (tri_all, tri_any):
        for fixed in (HOLDS, FAILS):
            base = op([fixed, UNKNOWN])
            if not base.unknown:
                for refined in (HOLDS, FAILS):
                    assert op([fixed, refined]).tag == base.tag


# ---------------------------------------------------------------------------
# Satisfaction basics


def test_equiv_atom_via_evaluation():
    assert satisfies(EMPTY, Equiv(parse("(get (mk 1))"), Nat(1)), {}).holds
    assert satisfies(EMPTY, Equiv(Nat(0), Nat(1)), {}).fails
    # both undefined in this model: equi-stuck atoms hold
    assert satisfies(EMPTY, Equiv(parse("(get nil)"), parse("(fst 0)")), {}).holds


def test_equiv_atom_on_equivalent_lambdas_is_not_fails():
    v = satisfies(
        EMPTY,
        Equiv(parse("(lambda (x) x)"), parse("(lambda (x) (seq (mk 0) x))")),
        {},
    )
    # they differ as values, so a sound bounded checker must not say holds;
    # and they are operationally equivalent, so it must not say fails
    assert v.unknown


def test_quantifiers_range_over_model_values():
    m = mem(("z0", TRUE))
    phi = Exists("y", Equiv(Get(Var("y")), TRUE))
    assert satisfies(m, phi, {}).holds
    phi2 = Forall("y", Equiv(Var("y"), Var("y")))
    assert satisfies(m, phi2, {}).holds


def test_ctx_assertion_threads_bindings():
    u = Let("x", Mk(NIL), Hole())
    phi = CtxAssert(u, Equiv(Get(Var("x")), NIL))
    assert satisfies(EMPTY, phi, {}).holds


def test_ctx_vacuous_when_hole_unreached():
    phi = CtxAssert(If(NIL, Hole(), NIL), Equiv(Nat(0), Nat(1)))
    assert satisfies(EMPTY, phi, {}).holds
    stuck = CtxAssert(Seq((Get(NIL), Hole())), Equiv(Nat(0), Nat(1)))
    assert satisfies(EMPTY, stuck, {}).holds


def test_ctx_unknown_on_divergence():
    phi = CtxAssert(Seq((OMEGA, Hole())), Equiv(NIL, NIL))
    assert satisfies(EMPTY, phi, {}, replace(DEFAULT_CONFIG, max_steps=80)).unknown


def test_ctx_rejects_non_univalent_contexts():
    with pytest.raises(ValueError):
        satisfies(EMPTY, CtxAssert(Lam("x", Hole()), Equiv(NIL, NIL)), {})


def test_run_to_hole_reports_memory_and_env():
    u = Let("a", Mk(TRUE), Seq((SetCell(Var("a"), Nat(3)), Hole())))
    reached = run_to_hole(EMPTY, u, {"w": NIL}, 200)
    m2, s2 = reached
    assert m2.lookup("z0") == Nat(3)
    assert s2["a"] == Var("z0")
    assert s2["w"] == NIL


def test_eq_after_binding_always_true():
    # let{x:=e}[[eq(x,x) = t]] for converging e whose value eq can observe
    # (eq is blind to lambdas and pairs, so those are out of range)
    for e in (parse("(mk nil)"), parse("(add1 1)"), parse("(if t nil 3)"),
              parse("(get (mk 2))")):
        phi = CtxAssert(Let("x", e, Hole()), Equiv(Eq(Var("x"), Var("x")), TRUE))
        assert satisfies(EMPTY, phi, {}).holds, e


# ---------------------------------------------------------------------------
# The allocation axiom


def test_mk_axiom_across_small_models():
    axiom = mk_allocation_axiom()
    for m in enumerate_memories(2, [NIL, TRUE]):
        for v in (NIL, TRUE, Nat(1)):
            assert satisfies(m, axiom, {"v": v}).holds, (str(m), v)


def test_mk_axiom_explicit_and_implicit_quantifier_agree():
    explicit = mk_allocation_axiom()
    implicit = explicit.body  # free y, closed by the model enumeration
    cfg = replace(DEFAULT_CONFIG, max_values=6)
    mems = tuple(enumerate_memories(1, [NIL, TRUE]))
    v1 = check_valid(explicit, cfg, memories=mems)
    v2 = check_valid(implicit, cfg, memories=mems)
    assert v1.tag == v2.tag == "holds"


# ---------------------------------------------------------------------------
# Classes


def test_named_class_membership():
    m = mem(("z0", Nat(2)))
    assert class_member(Nat(1), NAT, m).holds
    assert class_member(NIL, NAT, m).fails
    assert class_member(NIL, NIL_CLASS, m).holds
    assert class_member(Var("z0"), CELL, m).holds
    assert class_member(Nat(1), CELL, m).fails
    assert class_member(Var("z0"), CellOf(NAT), m).holds
    assert class_member(Var("z0"), CellOf(NIL_CLASS), m).fails
    assert class_member(Lam("x", Var("x")), VAL, m).holds


def test_comprehension_membership():
    evens_like = Comprehension("x", Equiv(Var("x"), Nat(0)))
    assert class_member(Nat(0), evens_like, EMPTY).holds
    assert class_member(Nat(1), evens_like, EMPTY).fails


def test_reference_operation_types_from_the_theory():
    m = mem(("c", Nat(0)))
    mkfn = parse("(lambda (x) (mk x))")
    getfn = parse("(lambda (x) (get x))")
    setfn = parse("(lambda (x) (lambda (y) (set x y)))")
    assert class_member(mkfn, Arrow((NAT,), CellOf(NAT), "memory"), m).holds
    assert class_member(mkfn, Arrow((NAT,), CellOf(NAT), "total"), m).fails
    assert class_member(getfn, Arrow((CellOf(NAT),), NAT, "total"), m).holds
    assert class_member(
        setfn, Arrow((CELL,), Arrow((VAL,), NIL_CLASS, "memory"), "total"), m
    ).holds


def test_partial_arrow_tolerates_stuckness():
    f = parse("(lambda (x) (get x))")  # stuck on non-cells
    assert class_member(f, Arrow((NAT,), NAT, "partial"), EMPTY).holds
    assert class_member(f, Arrow((NAT,), NAT, "total"), EMPTY).fails


def test_subset_and_class_equality_abbreviations():
    m = mem(("z0", Nat(1)))
    assert satisfies(m, subset_formula(NAT, VAL), {}).holds
    assert satisfies(m, subset_formula(VAL, NAT), {}).fails
    both = class_equal_formula(NAT, NAT)
    assert satisfies(m, both, {}).holds
    # the abbreviation agrees with its expansion by construction; check the
    # conjunction really is both directions
    assert isinstance(both, AndF) and len(both.parts) == 2


def test_forall_class_over_the_pool():
    # every pool class contains all of its own members (sanity of the pool)
    phi = ForallClass(
        "X", Forall("x", Implies(Member(Var("x"), ClassVar_("X")),
                                 Member(Var("x"), ClassVar_("X"))))
    )
    assert satisfies(mem(("z0", NIL)), phi, {}).holds


def ClassVar_(name):
    from effects.logic import ClassVar

    return ClassVar(name)


def test_yv_fixed_point_in_nat_arrow():
    out = run(Description(EMPTY, zero_program()), 5000)
    cfg = replace(
        DEFAULT_CONFIG,
        atoms=tuple(Nat(i) for i in range(11)),
        max_values=11,
        max_steps=20_000,
    )
    v = class_member(out.value, Arrow((NAT,), NAT, "total"), out.memory, cfg)
    assert v.holds


def test_strictly_partial_class():
    partial = parse(
        "(lambda (n) (if (eq n 0) 0 ((lambda (x) (app x x)) (lambda (x) (app x x)))))"
    )
    cfg = replace(DEFAULT_CONFIG, max_steps=300)
    v = member_strictly_partial(partial, EMPTY, cfg)
    assert v.holds
    assert "non-terminating" in v.reason
    # a total function never produces a witness: unknown, not holds
    total = parse("(lambda (n) n)")
    assert member_strictly_partial(total, EMPTY, cfg).unknown
    # stuck counts as definitely undefined
    stuckf = parse("(lambda (n) (if (eq n 0) 0 (get nil)))")
    v2 = member_strictly_partial(stuckf, EMPTY, cfg)
    assert v2.holds and "undefined" in v2.reason


# ---------------------------------------------------------------------------
# Effect predicates (the expansiveness taxonomy)


TAXONOMY = [
    ("(lambda (x) (mk nil))", "holds", "holds"),
    ("(let ((z (mk nil))) (lambda (x) z))", "fails", "holds"),
    ("(seq (if (cell? y) (set y nil) nil) (lambda (x) (mk nil)))", "holds", "fails"),
    (
        "(seq (if (cell? y) (set y nil) nil) (let ((z (mk nil))) (lambda (x) z)))",
        "fails",
        "fails",
    ),
]


@pytest.mark.parametrize("src,expand,write", TAXONOMY)
def test_expansiveness_taxonomy(src, expand, write):
    m = mem(("c0", TRUE))
    report = effect_predicates(parse(src), m, {"y": Var("c0")})
    assert report.not_expand.tag == expand
    assert report.not_write.tag == write


def test_taxonomy_membership_in_t():
    t_class = Arrow((VAL,), CellOf(NIL_CLASS), "memory")
    m = mem(("c0", TRUE))
    for src, _, _ in TAXONOMY:
        phi = CtxAssert(Let("x", parse(src), Hole()), Member(Var("x"), t_class))
        assert satisfies(m, phi, {"y": Var("c0")}).holds, src


def test_effect_predicates_tolerate_unreachable_garbage():
    # allocates and drops: the fresh cell is garbage, not expansion
    e = parse("(seq (mk nil) 5)")
    report = effect_predicates(e, mem(("c0", NIL)), {})
    assert report.not_expand.holds and report.not_write.holds


def test_effect_predicates_unknown_on_divergence():
    report = effect_predicates(OMEGA, EMPTY, {}, replace(DEFAULT_CONFIG, max_steps=50))
    assert report.not_expand.unknown and report.not_write.unknown


# ---------------------------------------------------------------------------
# Principles and files


def test_contextual_assertion_principles():
    results = check_principles(instances=120)
    for name, v in results.items():
        assert not v.fails, (name, v.reason)
        assert v.cases >= 100 or name in ("necessitation", "propagation"), name


def test_formula_free_vars():
    phi = Forall("y", CtxAssert(Let("x", Mk(Var("v")), Hole()),
                                Equiv(Var("x"), Var("y"))))
    assert formula_free_vars(phi) == {"v"}


def test_read_assertions_and_check():
    text = """
    (defclass NatCell c (and (equiv (cell? c) t) (member (get c) Nat)))
    (forall y (ctx (let ((x (mk v))) _)
      (and (not (equiv x y)) (equiv (cell? x) t) (equiv (get x) v))))
    (member (mk 1) NatCell)
    """
    classes, formulas = read_assertions(text)
    assert "NatCell" in classes.named
    assert len(formulas) == 2
    cfg = replace(DEFAULT_CONFIG, max_values=4)
    mems = tuple(enumerate_memories(1, [NIL]))
    for phi in formulas:
        assert check_valid(phi, cfg, classes, memories=mems).holds


def test_read_assertions_reports_unknown_names():
    with pytest.raises(ValueError):
        read_assertions("(member nil Bogus)")
