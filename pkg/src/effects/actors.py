"""Actor configurations: snapshots, transitions, schedulers, observation.

A configuration holds receptionists (internal names the outside may
message), the actors themselves, undelivered messages, and the external
names the configuration may message.  Behaviors are closed lambda values
over actor names; actor bodies are the functional language plus
send/become/letactor/event.  There are no cells here: actor state lives in
behaviors via become, so mk/get/set are stuck inside an actor.

Everything is deterministic given a scheduler and seed: names a0, a1, ...
come from a per-configuration counter, traces replay, and a fixed seed
reproduces a run exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .memory import EMPTY
from .reducer import apply_redex
from .syntax import (
    Add1,
    App,
    Become,
    Cellp,
    Eq,
    Event,
    Expr,
    Get,
    If,
    Lam,
    Letactor,
    Mk,
    Nat,
    NIL,
    Pair,
    SAtom,
    SList,
    Send,
    Seq,
    SetCell,
    Snd,
    TRUE,
    Var,
    build_expr,
    decompose,
    free_vars,
    is_value,
    plug,
    read_sexprs,
    substitute,
    to_text,
)


@dataclass(frozen=True, slots=True)
class Ready:
    behavior: Expr  # a lambda value


@dataclass(frozen=True, slots=True)
class Busy:
    expr: Expr


@dataclass(frozen=True, slots=True)
class Inert:
    error: bool = False


ActorState = Ready | Busy | Inert


@dataclass(frozen=True, slots=True)
class Message:
    receiver: str
    contents: Expr
    uid: int = -1  # enqueue order; plumbing for fairness bookkeeping

    def __str__(self) -> str:
        return f"{self.receiver} <- {to_text(self.contents)}"


@dataclass(frozen=True, slots=True)
class Label:
    kind: str  # "internal" | "deliver" | "in" | "out" | "event"
    actor: str | None = None
    index: int | None = None
    message: Message | None = None
    tag: str | None = None
    error: bool = False

    def __str__(self) -> str:
        match self.kind:
            case "internal":
                return f"internal {self.actor}" + (" (stuck)" if self.error else "")
            case "event":
                return f"event {self.actor} {self.tag or ''}".rstrip()
            case "deliver":
                return f"deliver {self.index} {self.message}"
            case "out":
                return f"out {self.index} {self.message}"
            case _:
                return f"in {self.message}"


@dataclass(frozen=True, slots=True)
class Configuration:
    receptionists: frozenset[str]
    actors: tuple[tuple[str, ActorState], ...]
    messages: tuple[Message, ...]
    externals: frozenset[str]
    anonymous: frozenset[str] = frozenset()  # audit bookkeeping
    counter: int = 0  # fresh names and message uids

    def names(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.actors)

    def state(self, name: str) -> ActorState:
        for n, st in self.actors:
            if n == name:
                return st
        raise KeyError(name)

    def value_names(self) -> frozenset[str]:
        return self.names() | self.externals

    def _with_state(self, name: str, st: ActorState) -> "Configuration":
        return replace(
            self,
            actors=tuple((n, st if n == name else old) for n, old in self.actors),
        )

    def validate(self) -> None:
        names = self.names()
        if len(names) != len(self.actors):
            raise ValueError("duplicate actor names")
        if not self.receptionists <= names:
            raise ValueError("receptionists must be internal actors")
        if self.externals & names:
            raise ValueError("externals must not be internal actors")
        known = names | self.externals
        for n, st in self.actors:
            e = st.behavior if isinstance(st, Ready) else (
                st.expr if isinstance(st, Busy) else None
            )
            if isinstance(st, Ready) and not isinstance(st.behavior, Lam):
                raise ValueError(f"actor {n}: ready behavior must be a lambda")
            if e is not None and not free_vars(e) <= known:
                raise ValueError(f"actor {n} mentions unknown names "
                                 f"{sorted(free_vars(e) - known)}")
        for msg in self.messages:
            if msg.receiver not in known:
                raise ValueError(f"message to unknown name {msg.receiver}")
            if not free_vars(msg.contents) <= known:
                raise ValueError("message contents mention unknown names")

    def __str__(self) -> str:
        rho = " ".join(sorted(self.receptionists))
        xi = " ".join(sorted(self.externals))
        acts = "; ".join(f"{n}:{type(st).__name__.lower()}" for n, st in self.actors)
        msgs = "; ".join(str(m) for m in self.messages)
        return f"<rho=[{rho}] actors=[{acts}] mu=[{msgs}] xi=[{xi}]>"


class ScriptError(Exception):
    def __init__(self, position: int, msg: str):
        super().__init__(f"script step {position}: {msg}")
        self.position = position


def _fresh_actor_name(c: Configuration) -> tuple[str, int]:
    k = c.counter
    taken = c.names() | c.externals
    while f"a{k}" in taken:
        k += 1
    return f"a{k}", k + 1


def enabled(c: Configuration) -> list[Label]:
    """Transition choices: one internal step per working actor, a delivery
    per message whose receiver is ready, an out per message addressed
    outside.  Inputs are never spontaneous; a script supplies them."""
    choices: list[Label] = []
    for name, st in c.actors:
        if isinstance(st, Busy):
            choices.append(Label("internal", actor=name))
    for i, msg in enumerate(c.messages):
        if msg.receiver in c.externals:
            choices.append(Label("out", index=i, message=msg))
        elif msg.receiver in c.names() and isinstance(c.state(msg.receiver), Ready):
            choices.append(Label("deliver", index=i, message=msg))
    return choices


def actor_step(c: Configuration, choice: Label) -> tuple[Configuration, Label]:
    """Apply one transition; returns the new configuration and the trace
    label (which refines "internal" to "event" when one fires)."""
    match choice.kind:
        case "internal":
            return _internal_step(c, choice.actor)
        case "deliver":
            msg = c.messages[choice.index]
            st = c.state(msg.receiver)
            if not isinstance(st, Ready):
                raise ValueError(f"deliver to non-ready actor {msg.receiver}")
            c2 = c._with_state(msg.receiver, Busy(App(st.behavior, msg.contents)))
            c2 = replace(c2, messages=_drop(c.messages, choice.index))
            return c2, Label("deliver", actor=msg.receiver, index=choice.index,
                             message=msg)
        case "out":
            msg = c.messages[choice.index]
            if msg.receiver not in c.externals:
                raise ValueError("out transition needs an external receiver")
            revealed = free_vars(msg.contents) & c.names()
            c2 = replace(
                c,
                messages=_drop(c.messages, choice.index),
                receptionists=c.receptionists | revealed,
            )
            return c2, Label("out", index=choice.index, message=msg)
        case "in":
            msg = choice.message
            if msg.receiver not in c.receptionists:
                raise ValueError(f"in-message to non-receptionist {msg.receiver}")
            newcomers = free_vars(msg.contents) - c.names()
            stamped = Message(msg.receiver, msg.contents, c.counter)
            c2 = replace(
                c,
                messages=c.messages + (stamped,),
                externals=c.externals | newcomers,
                counter=c.counter + 1,
            )
            return c2, Label("in", actor=msg.receiver, message=stamped)
        case _:
            raise ValueError(f"not a transition choice: {choice}")


def _drop(msgs: tuple, i: int) -> tuple:
    return msgs[:i] + msgs[i + 1 :]


def _internal_step(c: Configuration, name: str) -> tuple[Configuration, Label]:
    st = c.state(name)
    if not isinstance(st, Busy):
        raise ValueError(f"actor {name} is not busy")
    names = c.value_names()
    tag, ctx, redex = _focus(st.expr, names)
    if tag != "redex":
        return c._with_state(name, Inert(error=True)), Label(
            "internal", actor=name, error=True
        )
    label = Label("internal", actor=name)
    match redex:
        case Send(Var(a), v) if a in names:
            msg = Message(a, v, c.counter)
            c = replace(c, messages=c.messages + (msg,), counter=c.counter + 1)
            result = NIL
        case Become(Lam() as b):
            anon, k = _fresh_actor_name(c)
            cont = plug(ctx, NIL)
            cont_state = Inert() if is_value(cont, names | {anon}) else Busy(cont)
            c = replace(
                c,
                actors=c.actors + ((anon, cont_state),),
                anonymous=c.anonymous | {anon},
                counter=k,
            )
            return c._with_state(name, Ready(b)), label
        case Letactor(x, b, body):
            new, k = _fresh_actor_name(c)
            beh = substitute(b, {x: Var(new)})
            if not isinstance(beh, Lam):
                return c._with_state(name, Inert(error=True)), replace(
                    label, error=True
                )
            c = replace(c, actors=c.actors + ((new, Ready(beh)),), counter=k)
            result = substitute(body, {x: Var(new)})
        case Event(tag_):
            label = Label("event", actor=name, tag=tag_)
            result = NIL
        case Cellp(_):
            result = NIL  # no cells exist in the actor world
        case Mk(_) | Get(_) | SetCell(_, _) | Send(_, _) | Become(_):
            return c._with_state(name, Inert(error=True)), replace(label, error=True)
        case _:
            fired = apply_redex(redex, EMPTY)
            if fired is None:
                return c._with_state(name, Inert(error=True)), replace(
                    label, error=True
                )
            result = fired[0]
    e2 = plug(ctx, result)
    if is_value(e2, names):
        return c._with_state(name, Inert()), label
    return c._with_state(name, Busy(e2)), label


def _focus(e: Expr, names: frozenset[str]):
    res = decompose(e, names)
    if res[0] == "value":
        return "value", None, None
    return res


# ---------------------------------------------------------------------------
# Schedulers


class RoundRobinFair:
    """Deterministic scheduler with a bounded fairness window.

    Rotates through the enabled choices, but any message that has stayed
    deliverable for window consecutive picks is delivered first, oldest
    first, so no deliverable message waits more than `window` rounds.
    """

    def __init__(self, window: int = 8):
        self.window = window
        self._rotation = 0
        self._waits: dict[int, int] = {}

    def pick(self, choices: list[Label], c: Configuration) -> Label | None:
        if not choices:
            return None
        delivers = [ch for ch in choices if ch.kind == "deliver"]
        live = set()
        for ch in delivers:
            uid = ch.message.uid
            live.add(uid)
            self._waits[uid] = self._waits.get(uid, 0) + 1
        for uid in list(self._waits):
            if uid not in live:
                del self._waits[uid]  # not continuously enabled: clock resets
        overdue = [ch for ch in delivers if self._waits[ch.message.uid] >= self.window]
        if overdue:
            chosen = min(overdue, key=lambda ch: ch.message.uid)
        else:
            chosen = choices[self._rotation % len(choices)]
            self._rotation += 1
        if chosen.kind == "deliver":
            del self._waits[chosen.message.uid]
        return chosen


class RandomScheduler:
    """Uniform choice among enabled transitions; reproducible by seed."""

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def pick(self, choices: list[Label], c: Configuration) -> Label | None:
        if not choices:
            return None
        return choices[self.rng.randrange(len(choices))]


class ScriptedScheduler:
    """Drives deliver/in/out from a label list.

    By default internal steps are drained (deterministically, first busy
    actor first) before each scripted label, so scripts only mention the
    interesting transitions; a script that lists explicit (internal a)
    labels turns the draining off.
    """

    def __init__(self, labels, auto_internal: bool | None = None):
        self.labels = list(labels)
        self.position = 0
        if auto_internal is None:
            auto_internal = not any(l.kind == "internal" for l in self.labels)
        self.auto_internal = auto_internal

    def pick(self, choices: list[Label], c: Configuration) -> Label | None:
        internals = [ch for ch in choices if ch.kind == "internal"]
        if self.auto_internal and internals:
            return internals[0]
        if self.position >= len(self.labels):
            return None
        want = self.labels[self.position]
        self.position += 1
        if want.kind == "in":
            return want  # validity checked by actor_step
        for ch in choices:
            if ch.kind != want.kind:
                continue
            if want.kind == "internal" and ch.actor == want.actor:
                return ch
            if want.kind in ("deliver", "out") and ch.index == want.index:
                return ch
        raise ScriptError(self.position - 1, f"label not enabled: {want}")


def run(c: Configuration, scheduler, budget: int) -> tuple[list[Label], Configuration]:
    """Drive the configuration until quiescence, script end, or budget."""
    trace: list[Label] = []
    for _ in range(budget):
        choice = scheduler.pick(enabled(c), c)
        if choice is None:
            break
        c, label = actor_step(c, choice)
        trace.append(label)
    return trace, c


def replay(c: Configuration, trace) -> Configuration:
    """Re-apply a trace's labels; the result must match the original run."""
    for label in trace:
        if label.kind in ("internal", "event"):
            c, _ = actor_step(c, Label("internal", actor=label.actor))
        elif label.kind == "in":
            c, _ = actor_step(c, Label("in", message=label.message))
        else:
            c, _ = actor_step(c, Label(label.kind, index=label.index))
    return c


@dataclass(frozen=True)
class ObserveReport:
    classification: str  # "none" | "some" | "all-sampled"
    samples: int
    runs_with_event: int
    tag_counts: dict[str, int]


def observe_event(
    c: Configuration, samples: int, budget: int, seeds=None
) -> ObserveReport:
    """Sampled may/must observation: did event fire in none, some, or every
    randomized bounded run?"""
    if seeds is None:
        seeds = range(samples)
    tag_counts: dict[str, int] = {}
    hits = 0
    total = 0
    for seed in seeds:
        total += 1
        trace, _ = run(c, RandomScheduler(seed), budget)
        events = [l for l in trace if l.kind == "event"]
        if events:
            hits += 1
        for l in events:
            key = l.tag or ""
            tag_counts[key] = tag_counts.get(key, 0) + 1
    if hits == 0:
        cls = "none"
    elif hits == total:
        cls = "all-sampled"
    else:
        cls = "some"
    return ObserveReport(cls, total, hits, tag_counts)


# ---------------------------------------------------------------------------
# Trace audits


def audit_interface_monotonicity(c: Configuration, trace) -> bool:
    rho, xi = c.receptionists, c.externals
    for label in trace:
        if label.kind in ("internal", "event"):
            c, _ = actor_step(c, Label("internal", actor=label.actor))
        elif label.kind == "in":
            c, _ = actor_step(c, Label("in", message=label.message))
        else:
            c, _ = actor_step(c, Label(label.kind, index=label.index))
        if not (rho <= c.receptionists and xi <= c.externals):
            return False
        rho, xi = c.receptionists, c.externals
    return True


def audit_anonymous_privacy(c: Configuration, trace) -> bool:
    """No name minted for a become-continuation ever receives a message."""
    for label in trace:
        if label.kind in ("internal", "event"):
            c, _ = actor_step(c, Label("internal", actor=label.actor))
        elif label.kind == "in":
            c, _ = actor_step(c, Label("in", message=label.message))
        else:
            c, _ = actor_step(c, Label(label.kind, index=label.index))
        for msg in c.messages:
            if msg.receiver in c.anonymous:
                return False
        if c.receptionists & c.anonymous:
            return False
    return True


def audit_bounded_fairness(c: Configuration, trace, window: int) -> bool:
    """No message stays continuously deliverable longer than the window."""
    waits: dict[int, int] = {}
    for label in trace:
        deliverable = {
            m.uid
            for m in c.messages
            if m.receiver in c.names() and isinstance(c.state(m.receiver), Ready)
        }
        for uid in deliverable:
            waits[uid] = waits.get(uid, 0) + 1
            if waits[uid] > window:
                return False
        for uid in list(waits):
            if uid not in deliverable:
                del waits[uid]
        if label.kind in ("internal", "event"):
            c, _ = actor_step(c, Label("internal", actor=label.actor))
        elif label.kind == "in":
            c, _ = actor_step(c, Label("in", message=label.message))
        else:
            c, _ = actor_step(c, Label(label.kind, index=label.index))
        if label.kind == "deliver":
            waits.pop(label.message.uid, None)
    return True


# ---------------------------------------------------------------------------
# The Ticker


TICK = TRUE  # a request is pair(nil, customer), a tick is the bare atom


def ticker_behavior(counter: int, self_name: str = "ticker") -> Lam:
    """The counting behavior, recursion by self-application.

    On a tick: re-send tick to itself and become the counter+1 behavior.
    On a request pair(nil, k): send the current counter to k and keep
    counting.  Both arms end in become, so the ticker serves forever.
    """
    tau = Var(self_name)
    b, cv, msg = Var("b"), Var("c"), Var("m")
    again = lambda cnt: Become(App(App(b, b), cnt))
    core = Lam(
        "b",
        Lam(
            "c",
            Lam(
                "m",
                If(
                    Eq(msg, TICK),
                    Seq((Send(tau, TICK), again(Add1(cv)))),
                    Seq((Send(Snd(msg), cv), again(cv))),
                ),
            ),
        ),
    )
    beh = substitute(Lam("m", core.body.body.body), {"b": core, "c": Nat(counter)})
    assert isinstance(beh, Lam)
    return beh


def ticker_config(
    initial: int = 0,
    customer: str | None = None,
    self_name: str = "ticker",
) -> Configuration:
    """A ticker with its first tick pending; optionally an external
    customer with a request already in flight (for randomized runs)."""
    messages = [Message(self_name, TICK, 0)]
    externals = frozenset()
    counter = 1
    if customer is not None:
        externals = frozenset((customer,))
        messages.append(Message(self_name, Pair(NIL, Var(customer)), 1))
        counter = 2
    c = Configuration(
        receptionists=frozenset((self_name,)),
        actors=((self_name, Ready(ticker_behavior(initial, self_name))),),
        messages=tuple(messages),
        externals=externals,
        counter=counter,
    )
    c.validate()
    return c


def request_message(customer: str, receiver: str = "ticker") -> Message:
    return Message(receiver, Pair(NIL, Var(customer)))


def ticker_script(ticks: int, customer: str = "k") -> list[Label]:
    """Deliver `ticks` ticks, then a request; the reply carries `ticks`."""
    labels = [Label("deliver", index=0) for _ in range(ticks)]
    labels.append(Label("in", message=request_message(customer)))
    labels.append(Label("deliver", index=1))
    labels.append(Label("out", index=1))
    return labels


# ---------------------------------------------------------------------------
# Configuration and script files


def parse_config(text: str) -> Configuration:
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise ValueError("expected a single (config ...) form")
    sx = forms[0]
    if not isinstance(sx, SList) or not sx.items or sx.items[0].text != "config":
        raise ValueError("configuration file must contain (config ...)")
    rho: frozenset[str] = frozenset()
    xi: frozenset[str] = frozenset()
    actors: list[tuple[str, ActorState]] = []
    messages: list[Message] = []
    uid = 0
    for section in sx.items[1:]:
        if not isinstance(section, SList) or not section.items:
            raise ValueError("bad config section")
        head = section.items[0].text
        rest = section.items[1:]
        if head == "receptionists":
            rho = frozenset(a.text for a in rest)
        elif head == "externals":
            xi = frozenset(a.text for a in rest)
        elif head == "actors":
            for entry in rest:
                name = entry.items[0].text
                state_sx = entry.items[1]
                kind = state_sx.items[0].text
                e = build_expr(state_sx.items[1])
                if kind == "ready":
                    actors.append((name, Ready(e)))
                elif kind == "busy":
                    actors.append((name, Busy(e)))
                else:
                    raise ValueError(f"unknown actor state {kind!r}")
        elif head == "messages":
            for entry in rest:
                messages.append(
                    Message(entry.items[0].text, build_expr(entry.items[1]), uid)
                )
                uid += 1
        else:
            raise ValueError(f"unknown config section {head!r}")
    c = Configuration(rho, tuple(actors), tuple(messages), xi, counter=uid)
    c.validate()
    return c


def parse_script(text: str) -> list[Label]:
    labels = []
    for sx in read_sexprs(text):
        head = sx.items[0].text
        if head == "deliver":
            labels.append(Label("deliver", index=int(sx.items[1].text)))
        elif head == "out":
            labels.append(Label("out", index=int(sx.items[1].text)))
        elif head == "internal":
            labels.append(Label("internal", actor=sx.items[1].text))
        elif head == "in":
            labels.append(
                Label("in", message=Message(sx.items[1].text, build_expr(sx.items[2])))
            )
        else:
            raise ValueError(f"unknown script label {head!r}")
    return labels
