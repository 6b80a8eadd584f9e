import random

import pytest

from effects.actors import (
    Busy,
    Configuration,
    Inert,
    Label,
    Message,
    Ready,
    RandomScheduler,
    RoundRobinFair,
    ScriptError,
    ScriptedScheduler,
    actor_step,
    audit_anonymous_privacy,
    audit_bounded_fairness,
    audit_interface_monotonicity,
    enabled,
    observe_event,
    parse_config,
    parse_script,
    replay,
    request_message,
    run,
    ticker_behavior,
    ticker_config,
    ticker_script,
)
from effects.equivalence import gen_expr
from effects.laws import LAWS
from effects.memory import EMPTY
from effects.reducer import Description
from effects.reducer import step as reduce_step
from effects.syntax import (
    App,
    Become,
    Event,
    Lam,
    Letactor,
    Nat,
    NIL,
    Pair,
    Send,
    Seq,
    TRUE,
    Var,
    alpha_equal,
    parse,
    to_text,
)


def config(actors, messages=(), rho=(), xi=()):
    c = Configuration(
        receptionists=frozenset(rho),
        actors=tuple(actors),
        messages=tuple(
            Message(r, v, i) for i, (r, v) in enumerate(messages)
        ),
        externals=frozenset(xi),
        counter=len(messages),
    )
    c.validate()
    return c


# ---------------------------------------------------------------------------
# Enabledness


def test_quiescent_configuration_has_no_choices():
    c = config([("a", Ready(Lam("m", NIL)))], rho=["a"])
    assert enabled(c) == []


def test_deliver_enabled_for_ready_receiver():
    c = config([("a", Ready(Lam("m", NIL)))], [("a", TRUE)], rho=["a"])
    kinds = [(ch.kind, ch.index) for ch in enabled(c)]
    assert ("deliver", 0) in kinds


def test_out_enabled_for_external_target():
    c = config([("a", Ready(Lam("m", NIL)))], [("k", TRUE)], rho=["a"], xi=["k"])
    assert [ch.kind for ch in enabled(c)] == ["out"]


def test_no_delivery_to_busy_or_inert():
    c = config([("a", Busy(Seq((NIL, NIL))))], [("a", TRUE)], rho=["a"])
    assert [ch.kind for ch in enabled(c)] == ["internal"]
    c2 = config([("a", Inert())], [("a", TRUE)], rho=["a"])
    assert enabled(c2) == []


# ---------------------------------------------------------------------------
# Transitions


def test_send_enqueues_and_returns_nil():
    c = config(
        [("a", Busy(Seq((Send(Var("b"), Nat(5)), NIL)))),
         ("b", Ready(Lam("m", NIL)))],
        rho=["a"],
    )
    c2, label = actor_step(c, Label("internal", actor="a"))
    assert label.kind == "internal"
    assert [(m.receiver, m.contents) for m in c2.messages] == [("b", Nat(5))]


def test_become_frees_actor_and_spawns_anonymous_continuation():
    behavior = Lam("m", NIL)
    c = config([("a", Busy(Seq((Become(behavior), Send(Var("a"), TRUE), NIL))))],
               rho=["a"])
    c2, _ = actor_step(c, Label("internal", actor="a"))
    assert isinstance(c2.state("a"), Ready)
    anon = [n for n, _ in c2.actors if n != "a"]
    assert len(anon) == 1
    assert c2.anonymous == frozenset(anon)
    assert isinstance(c2.state(anon[0]), Busy)
    # the continuation still runs: it sends from the anonymous actor
    c3, _ = actor_step(c2, Label("internal", actor=anon[0]))
    c4, _ = actor_step(c3, Label("internal", actor=anon[0]))
    assert any(m.receiver == "a" for m in c4.messages)


def test_letactor_binds_self_reference():
    # letactor{x := lambda m. send(x, m)} send(x, t): the new actor knows
    # its own name
    e = Letactor("x", Lam("m", Send(Var("x"), Var("m"))), Send(Var("x"), TRUE))
    c = config([("boot", Busy(e))], rho=["boot"])
    c2, _ = actor_step(c, Label("internal", actor="boot"))
    new = [n for n, _ in c2.actors if n != "boot"]
    assert len(new) == 1
    beh = c2.state(new[0]).behavior
    assert beh == Lam("m", Send(Var(new[0]), Var("m")))


def test_letactor_with_non_lambda_behavior_is_an_error():
    e = Letactor("x", Nat(3), NIL)
    c = config([("boot", Busy(e))], rho=["boot"])
    c2, label = actor_step(c, Label("internal", actor="boot"))
    assert label.error
    assert c2.state("boot") == Inert(error=True)


def test_memory_primitives_are_stuck_inside_actors():
    c = config([("a", Busy(parse("(seq (mk nil) nil)")))], rho=["a"])
    c2, label = actor_step(c, Label("internal", actor="a"))
    assert label.error and c2.state("a") == Inert(error=True)


def test_event_label_carries_tag():
    c = config([("a", Busy(Seq((Event("ping"), NIL))))], rho=["a"])
    c2, label = actor_step(c, Label("internal", actor="a"))
    assert label.kind == "event" and label.tag == "ping" and label.actor == "a"


def test_completing_without_become_goes_inert():
    c = config([("a", Busy(Seq((NIL, Nat(1)))))], rho=["a"])
    c2, _ = actor_step(c, Label("internal", actor="a"))
    c3, _ = actor_step(c2, Label("internal", actor="a"))
    assert c3.state("a") == Inert()


def test_out_reveals_internal_names():
    c = config(
        [("a", Ready(Lam("m", NIL))), ("b", Ready(Lam("m", NIL)))],
        [("k", Pair(NIL, Var("b")))],
        rho=["a"],
        xi=["k"],
    )
    c2, _ = actor_step(c, Label("out", index=0))
    assert "b" in c2.receptionists


def test_in_grows_externals():
    c = config([("a", Ready(Lam("m", NIL)))], rho=["a"])
    msg = Message("a", Pair(NIL, Var("stranger")))
    c2, _ = actor_step(c, Label("in", message=msg))
    assert "stranger" in c2.externals
    assert len(c2.messages) == 1


def test_in_requires_receptionist():
    c = config([("a", Ready(Lam("m", NIL))), ("hidden", Ready(Lam("m", NIL)))],
               rho=["a"])
    with pytest.raises(ValueError):
        actor_step(c, Label("in", message=Message("hidden", NIL)))


# ---------------------------------------------------------------------------
# The ticker


@pytest.mark.parametrize("n", [0, 1, 5, 20])
def test_ticker_scripted_reply_is_exact(n):
    c = ticker_config()
    trace, _ = run(c, ScriptedScheduler(ticker_script(n)), budget=3000)
    outs = [l for l in trace if l.kind == "out"]
    assert len(outs) == 1
    assert outs[0].message.contents == Nat(n)
    assert outs[0].message.receiver == "k"


def test_ticker_random_runs_reach_distinct_counts():
    c = ticker_config(customer="k")
    replies = set()
    for seed in range(64):
        trace, _ = run(c, RandomScheduler(seed), budget=250)
        replies.update(
            l.message.contents for l in trace if l.kind == "out"
        )
    assert len(replies) >= 3


def test_ticker_unbounded_nondeterminism_witnesses():
    for n in (3, 12, 20):
        c = ticker_config()
        trace, _ = run(c, ScriptedScheduler(ticker_script(n)), budget=3000)
        reply = [l for l in trace if l.kind == "out"][0].message.contents
        assert reply == Nat(n) and reply.value > n - 1


def test_ticker_audits():
    c = ticker_config()
    trace, final = run(c, ScriptedScheduler(ticker_script(6)), budget=3000)
    assert replay(c, trace) == final
    assert audit_interface_monotonicity(c, trace)
    assert audit_anonymous_privacy(c, trace)


def test_round_robin_fairness_bound():
    c = ticker_config(customer="k")
    window = 8
    trace, _ = run(c, RoundRobinFair(window=window), budget=400)
    assert audit_bounded_fairness(c, trace, window)
    assert any(l.kind == "out" for l in trace)  # the request is served


def test_random_runs_are_reproducible():
    c = ticker_config(customer="k")
    t1, f1 = run(c, RandomScheduler(42), budget=200)
    t2, f2 = run(c, RandomScheduler(42), budget=200)
    assert t1 == t2 and f1 == f2


def test_script_error_reports_position():
    c = ticker_config()
    bad = [Label("deliver", index=0), Label("out", index=7)]
    with pytest.raises(ScriptError) as exc:
        run(c, ScriptedScheduler(bad), budget=100)
    assert exc.value.position == 1


# ---------------------------------------------------------------------------
# Observation


def test_observe_unconditional_event():
    c = config([("a", Busy(Seq((Event("go"), NIL))))], rho=["a"])
    report = observe_event(c, samples=16, budget=50)
    assert report.classification == "all-sampled"
    assert report.tag_counts == {"go": 16}


def test_observe_no_event_anywhere():
    c = ticker_config()
    report = observe_event(c, samples=8, budget=60)
    assert report.classification == "none"


def test_observe_race_is_some():
    behavior = parse(
        "(lambda (m) (if (eq m t) (seq (event fired) (become (lambda (m2) nil))) nil))"
    )
    c = config(
        [("a", Ready(behavior))],
        [("a", NIL), ("a", TRUE)],
        rho=["a"],
    )
    report = observe_event(c, samples=64, budget=80)
    assert report.classification == "some"
    assert 0 < report.runs_with_event < 64


def exhaustive_two_message_outcomes():
    """Oracle for the race: both delivery orders, exhaustively."""
    behavior = parse(
        "(lambda (m) (if (eq m t) (seq (event fired) (become (lambda (m2) nil))) nil))"
    )
    outcomes = set()
    for first in (0, 1):
        c = config([("a", Ready(behavior))], [("a", NIL), ("a", TRUE)], rho=["a"])
        sched = ScriptedScheduler(
            [Label("deliver", index=first), Label("deliver", index=0)]
        )
        try:
            trace, _ = run(c, sched, budget=100)
        except ScriptError:
            trace, _ = run(
                config([("a", Ready(behavior))], [("a", NIL), ("a", TRUE)], rho=["a"]),
                ScriptedScheduler([Label("deliver", index=first)]),
                budget=100,
            )
        outcomes.add(any(l.kind == "event" for l in trace))
    return outcomes


def test_race_both_outcomes_exist():
    assert exhaustive_two_message_outcomes() == {True, False}


# ---------------------------------------------------------------------------
# Conservation of the functional core


def test_actor_internal_steps_match_reducer_on_pure_terms():
    rng = random.Random(5)
    for _ in range(30):
        e = gen_expr(rng, 3)
        # keep to the pure fragment: no cells were provided, so only mk-free
        # terms are comparable
        if "(mk " in to_text(e):
            continue
        c = config([("a", Busy(e))], rho=["a"])
        d = Description(EMPTY, e)
        while True:
            choices = enabled(c)
            nxt = reduce_step(d)
            if not choices:
                assert nxt is None or not isinstance(c.state("a"), Busy)
                break
            c, label = actor_step(c, choices[0])
            if label.error:
                # reducer must agree nothing was possible
                assert nxt is None
                break
            assert nxt is not None
            d = nxt
            st = c.state("a")
            if isinstance(st, Busy):
                assert alpha_equal(st.expr, d.expr)
            else:
                break


def test_moggi_instances_inside_behaviors_observably_agree():
    # embed both sides of a let-rule instance in a behavior that reports
    # the result to an external observer
    rng = random.Random(9)
    law = LAWS["moggi-i"]
    for _ in range(5):
        for lhs, rhs in law.gen(rng):
            traces = []
            for side in (lhs, rhs):
                body = Seq((Send(Var("out"), side), Event("done")))
                beh = Lam("m", body)
                closed = beh
                # close the instance's free variables with nil
                from effects.syntax import free_vars, substitute

                s = {x: NIL for x in free_vars(beh) - {"out"}}
                closed = substitute(beh, s)
                c = config(
                    [("a", Ready(closed))], [("a", NIL)], rho=["a"], xi=["out"]
                )
                trace, _ = run(c, RoundRobinFair(), budget=200)
                obs = [
                    (l.kind, to_text(l.message.contents) if l.message else l.tag)
                    for l in trace
                    if l.kind in ("out", "event")
                ]
                traces.append(obs)
            assert traces[0] == traces[1]


# ---------------------------------------------------------------------------
# Files


def test_config_file_round_trip(tmp_path):
    text = """
    (config
      (receptionists a)
      (externals k)
      (actors (a (ready (lambda (m) (seq (send k m) (become (lambda (m2) nil)))))))
      (messages (a 7)))
    """
    c = parse_config(text)
    assert c.receptionists == {"a"}
    assert c.externals == {"k"}
    trace, _ = run(c, RoundRobinFair(), budget=60)
    outs = [l for l in trace if l.kind == "out"]
    assert outs and outs[0].message.contents == Nat(7)


def test_parse_script_labels():
    labels = parse_script("(deliver 0) (internal a) (in a (pair nil k)) (out 1)")
    assert [l.kind for l in labels] == ["deliver", "internal", "in", "out"]
    assert labels[2].message.receiver == "a"


def test_config_validation_rejects_unknown_names():
    with pytest.raises(ValueError):
        parse_config("(config (receptionists a) (actors (a (ready (lambda (m) (send ghost m))))))")
