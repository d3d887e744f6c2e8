"""Bounded-session exploration of a protocol against a Dolev-Yao intruder.

Each session runs the narration once, with the roles in
``SearchConfig.intruder_roles`` played by the intruder ``i`` and the others
by honest agents.  One transition executes one action of one session: the
sender produces a message (honest roles evaluate the template, the intruder
builds anything the receiver would accept), and the receiver consumes it.
What the intruder may do on a step depends on the channel:

======================  ========  =============================================
channel                 reads it  may deliver instead of the honest message
======================  ========  =============================================
insecure ``->``         yes       anything it can build
authentic ``*->``       yes       a replay of the same sender's earlier message
confidential ``->*``    no        anything it can build
secure ``*->*``         no        a replay of the same sender's earlier message
======================  ========  =============================================

Where the intruder itself plays the sender it composes freely; where it plays
the receiver it learns the message.

Authentication goals are instrumented with witness/request events.  A peer
is identified the way the authenticator can identify it: by the fresh
public key whose signature covers the payload, if there is one, otherwise by
its agent name.  Secrecy has two halves: when every member of the secrecy
set is honest the intruder must not derive the payload, and members that
finish must agree on every payload value that an honest role minted.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .deduction import analyze, composable_levels, derives, instantiate
from .model import (
    ActionStep, Goal, ProtocolSpec, Secrecy, SourceSpan, StrongAuth, WeakAuth,
    bind_atoms, expand, goal_text, initial_atoms, message_signers, validate,
)
from .term import (
    AgentName, Constant, Fresh, PrivKeyOf, Term, Variable, apply, atoms, match,
    render,
)

log = logging.getLogger(__name__)

__all__ = [
    "SearchConfig", "SearchState", "WitnessEvent", "RequestEvent", "TraceStep",
    "AttackTrace", "Safe", "Attack", "Inconclusive", "Verdict", "ReplayError",
    "check", "check_goals", "replay", "format_trace", "parse_trace", "INTRUDER",
]

INTRUDER = AgentName("i")
INTRUDER_NONCE = Constant("ni")
INTRUDER_KEY = Constant("ki")


@dataclass(frozen=True)
class SearchConfig:
    sessions: int = 1
    intruder_depth: int = 2
    max_states: int = 500_000
    intruder_roles: frozenset[str] | None = None
    typing: str = "label"
    workers: int = 1

    def __post_init__(self):
        if self.sessions not in (1, 2):
            raise ValueError("only one or two sessions are supported")
        if self.max_states <= 0:
            raise ValueError("max_states must be positive")
        if self.intruder_depth < 0:
            raise ValueError("intruder_depth must be non-negative")
        if self.typing not in ("label", "type", "untyped"):
            raise ValueError(f"unknown typing mode {self.typing!r}")
        if self.intruder_roles is not None:
            object.__setattr__(self, "intruder_roles", frozenset(self.intruder_roles))


def default_intruder_roles(spec: ProtocolSpec) -> frozenset[str]:
    """The pseudonymous client side of the narration, else the first role."""
    for act in spec.actions:
        if act.sender_pseudonym:
            return frozenset({act.sender})
    return frozenset(spec.roles[:1])


@dataclass(frozen=True)
class WitnessEvent:
    goal: int
    session: int
    role: str
    actor: Term
    peer: Term
    payload: Term


@dataclass(frozen=True)
class RequestEvent:
    goal: int
    session: int
    role: str
    actor: Term
    peer: Term
    payload: Term


Bindings = tuple[tuple[str, Term], ...]


@dataclass(frozen=True)
class SearchState:
    pcs: tuple[int, ...]
    bindings: tuple[tuple[Bindings, ...], ...]
    knowledge: frozenset[Term]
    events: tuple[WitnessEvent | RequestEvent, ...]
    honest_values: frozenset[Term]
    pseudonyms: tuple[tuple[str, Term], ...]
    sent: tuple[tuple[int, int, Term], ...]
    # per session: index of an action whose delivery the intruder blocked, or -1
    halted: tuple[int, ...] = ()

    def binding(self, session: int, role_index: int) -> dict[str, Term]:
        return dict(self.bindings[session][role_index])


@dataclass(frozen=True)
class TraceStep:
    actor: str
    session: int
    action: int
    channel: str
    kind: str
    message: Term
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class AttackTrace:
    steps: tuple[TraceStep, ...]
    goal: Goal | None = None
    sessions: int = 1
    intruder_roles: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Safe:
    bound: SearchConfig
    states_explored: int = field(compare=False)


@dataclass(frozen=True)
class Attack:
    goal: Goal
    trace: AttackTrace
    states_explored: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Inconclusive:
    bound: SearchConfig
    states_explored: int = field(compare=False)
    reason: str = "state budget exhausted"


Verdict = Safe | Attack | Inconclusive


class ReplayError(Exception):
    def __init__(self, index: int | None, reason: str):
        self.index = index
        self.reason = reason
        where = f"step {index}: " if index is not None else ""
        super().__init__(where + reason)


class _Budget(Exception):
    pass


class _Model:
    """Static data derived from an expanded spec and a configuration."""

    def __init__(self, spec: ProtocolSpec, cfg: SearchConfig):
        self.spec = spec = expand(spec)
        self.cfg = cfg
        self.roles = spec.roles
        self.ri = {r: k for k, r in enumerate(self.roles)}
        self.actions: tuple[ActionStep, ...] = spec.actions
        self.n = len(self.actions)
        self.dishonest = cfg.intruder_roles if cfg.intruder_roles is not None else default_intruder_roles(spec)
        self.fresh = set(spec.fresh_labels())
        self.minters = spec.minters()
        self.last_step = {r: max((k for k, a in enumerate(self.actions) if r in (a.sender, a.receiver)), default=-1)
                          for r in self.roles}
        self.goals = spec.goals
        self.identity_key: dict[int, str | None] = {}
        self._signer_cache: dict[tuple[str, str], str | None] = {}
        self.witness_at: dict[int, int | None] = {}
        for gi, g in enumerate(self.goals):
            if isinstance(g, (WeakAuth, StrongAuth)):
                self.identity_key[gi] = message_signers(spec, g.authenticator, g.payload)
                self.witness_at[gi] = self._witness_step(g)

    def _witness_step(self, g) -> int | None:
        need = {a.label for a in atoms(g.payload)}
        bound = {a.label for a in initial_atoms(self.spec, g.peer)}
        for k, act in enumerate(self.actions):
            if g.peer in (act.sender, act.receiver):
                bound |= {a.label for a in atoms(act.message)}
                if act.sender == g.peer and need <= bound:
                    return k
        return None

    def agent(self, role: str) -> AgentName:
        return INTRUDER if role in self.dishonest else AgentName(role)

    def honest(self, role: str) -> bool:
        return role not in self.dishonest

    def finished(self, state: SearchState, s: int, role: str) -> bool:
        if state.pcs[s] <= self.last_step[role]:
            return False
        h = state.halted[s] if state.halted else -1
        return h < 0 or self.actions[h].receiver != role

    def halted(self, state: SearchState, s: int) -> bool:
        return bool(state.halted) and state.halted[s] >= 0

    # initial state
    def initial(self) -> SearchState:
        know: set[Term] = {INTRUDER, INTRUDER_NONCE, INTRUDER_KEY, PrivKeyOf(INTRUDER_KEY)}
        know |= {self.agent(r) for r in self.roles}
        sessions = []
        for s in range(self.cfg.sessions):
            rows = []
            for r in self.roles:
                b: dict[str, Term] = {}
                for a in initial_atoms(self.spec, r):
                    b[a.label] = self.agent(a.label) if isinstance(a, AgentName) else a
                if not self.honest(r):
                    for lab, who in self.minters.items():
                        if who == r:
                            v = Fresh(lab, s + 1)
                            b[lab] = v
                            know.add(v)
                            if self.spec.kind_of(lab) == "PublicKey":
                                know.add(PrivKeyOf(v))
                    for t in self.spec.knowledge.get(r, ()):
                        know.add(bind_atoms(b, t))
                rows.append(tuple(sorted(b.items())))
            sessions.append(tuple(rows))
        st = SearchState(
            pcs=(0,) * self.cfg.sessions, bindings=tuple(sessions),
            knowledge=analyze(know).facts, events=(), honest_values=frozenset(),
            pseudonyms=(), sent=(), halted=(-1,) * self.cfg.sessions)
        return self._advance(st)

    def _advance(self, st: SearchState) -> SearchState:
        pcs = list(st.pcs)
        for s in range(len(pcs)):
            while pcs[s] < self.n and not self.halted(st, s):
                a = self.actions[pcs[s]]
                if self.honest(a.sender) or self.honest(a.receiver):
                    break
                pcs[s] += 1
        return replace(st, pcs=tuple(pcs)) if tuple(pcs) != st.pcs else st

    # messages
    def honest_message(self, st: SearchState, s: int) -> tuple[Term, dict[str, Term], list[Term]]:
        act = self.actions[st.pcs[s]]
        b = st.binding(s, self.ri[act.sender])
        minted = []
        for a in sorted(atoms(act.message), key=render):
            if isinstance(a, (AgentName, Constant)) and a.label not in b:
                if a.label in self.fresh and self.minters.get(a.label) == act.sender:
                    v = Fresh(a.label, s + 1)
                    b[a.label] = v
                    minted.append(v)
                else:
                    raise ValueError(f"{act.sender} cannot produce {a.label} (spec not validated?)")
        return bind_atoms(b, act.message), b, minted

    def receiver_pattern(self, st: SearchState, s: int) -> Term:
        act = self.actions[st.pcs[s]]
        return bind_atoms(st.binding(s, self.ri[act.receiver]), act.message)

    def candidates(self, st: SearchState):
        facts = sorted(st.knowledge, key=render)
        if self.cfg.typing == "untyped":
            levels = composable_levels(facts, self.spec.functions, self.cfg.intruder_depth)
            return lambda v, budget: levels[min(budget, len(levels) - 1)] if budget is not None else levels[-1]
        atoms_known = [f for f in facts if isinstance(f, (AgentName, Constant, Fresh))]
        honest = st.honest_values
        spec = self.spec

        def kind(t: Term) -> str | None:
            if isinstance(t, AgentName):
                return "Agent"
            if t == INTRUDER_NONCE:
                return "Number"
            if t == INTRUDER_KEY:
                return "PublicKey"
            return spec.kind_of(t.label)

        def cands(v: Variable, budget) -> list[Term]:
            k = spec.kind_of(v.label)
            if k == "Agent":
                return [a for a in atoms_known if isinstance(a, AgentName)]
            if self.cfg.typing == "type":
                return [a for a in atoms_known if kind(a) == k]
            same = [a for a in atoms_known
                    if isinstance(a, (Constant, Fresh)) and a.label == v.label]
            if not any(a not in honest for a in same if isinstance(a, Fresh)):
                own = INTRUDER_KEY if k == "PublicKey" else INTRUDER_NONCE
                same.append(own)
            return same

        return cands

    def options(self, st: SearchState, s: int) -> Iterator[tuple[str, Term]]:
        """(kind, message) deliveries available for the next action of session ``s``."""
        act = self.actions[st.pcs[s]]
        sender_h, recv_h = self.honest(act.sender), self.honest(act.receiver)
        if sender_h:
            msg, _, _ = self.honest_message(st, s)
            yield "honest", msg
            if not recv_h:
                return
            if self._may_block(st, s, msg):
                yield "block", msg
            if act.channel.authentic:
                sa, ra = self.agent(act.sender), self.agent(act.receiver)
                seen = []
                for (s2, k, m) in st.sent:
                    if s2 != s and k == st.pcs[s] and m != msg and m not in seen:
                        if self.agent(self.actions[k].sender) == sa and self.agent(self.actions[k].receiver) == ra:
                            seen.append(m)
                            yield "replay", m
                return
            know = st.knowledge
            if not act.channel.confidential:
                know = analyze(know | {msg}).facts
            _, _, minted = self.honest_message(st, s)
            yield from self._injections(st, s, know, frozenset(minted))
        elif recv_h:
            yield from self._injections(st, s, st.knowledge)

    def _may_block(self, st: SearchState, s: int, msg: Term) -> bool:
        """Blocking only matters when the sender finishes an authenticating
        role with this send and the receiver would refuse the message."""
        k = st.pcs[s]
        act = self.actions[k]
        if not any(isinstance(g, (WeakAuth, StrongAuth)) and g.authenticator == act.sender
                   for g in self.goals) or self.last_step[act.sender] != k:
            return False
        return match(self.receiver_pattern(st, s), msg) is None

    def _injections(self, st, s, know, minted=frozenset()) -> Iterator[tuple[str, Term]]:
        pat = self.receiver_pattern(st, s)
        depth = self.cfg.intruder_depth if self.cfg.typing == "untyped" else None
        st2 = replace(st, knowledge=know, honest_values=st.honest_values | minted)
        for sub in instantiate(know, pat, depth, candidates=self.candidates(st2),
                               functions=self.spec.functions, analyzed=True):
            yield "inject", apply(sub, pat)

    def step(self, st: SearchState, s: int, kind: str, msg: Term) -> SearchState | None:
        """Execute one delivery; ``None`` if the receiver rejects it."""
        k = st.pcs[s]
        act = self.actions[k]
        sender_h, recv_h = self.honest(act.sender), self.honest(act.receiver)
        bindings = [list(row) for row in st.bindings]
        know = st.knowledge
        honest_values = st.honest_values
        events = list(st.events)
        sent = st.sent
        if sender_h:
            hmsg, sb, minted = self.honest_message(st, s)
            bindings[s][self.ri[act.sender]] = tuple(sorted(sb.items()))
            honest_values = honest_values | frozenset(minted)
            for v in minted:
                if self.spec.kind_of(v.label) == "PublicKey":
                    honest_values = honest_values | {PrivKeyOf(v)}
            if not recv_h or not act.channel.confidential:
                know = analyze(know | {hmsg}).facts
            sent = sent + ((s, k, hmsg),)
            for gi, at in self.witness_at.items():
                g = self.goals[gi]
                if at == k and g.peer == act.sender:
                    events.append(self._witness(gi, g, s, sb))
            if kind in ("honest", "block") and msg != hmsg:
                return None
        elif kind == "block":
            return None
        if kind == "inject" and not derives(know, msg, analyzed=True):
            return None
        if kind == "replay" and not any(m == msg and k2 == k and s2 != s for s2, k2, m in st.sent):
            return None
        if kind == "block":
            if not recv_h:
                return None
        elif recv_h:
            rb = dict(bindings[s][self.ri[act.receiver]])
            pat = bind_atoms(rb, act.message)
            sub = match(pat, msg)
            if sub is None:
                return None
            rb.update(sub)
            bindings[s][self.ri[act.receiver]] = tuple(sorted(rb.items()))
        else:
            know = analyze(know | {msg}).facts
        pseud = dict(st.pseudonyms)
        if act.sender_pseudonym:
            origin = self.agent(act.sender) if kind != "inject" or not sender_h else INTRUDER
            key = f"{act.sender_pseudonym}@{s + 1}"
            owner = pseud.setdefault(key, origin)
            if owner != origin:
                return None
        new = SearchState(
            pcs=st.pcs[:s] + (k + 1,) + st.pcs[s + 1:],
            bindings=tuple(tuple(row) for row in bindings),
            knowledge=know, events=tuple(events), honest_values=honest_values,
            pseudonyms=tuple(sorted(pseud.items())), sent=sent,
            halted=(st.halted[:s] + (k,) + st.halted[s + 1:]) if kind == "block" else st.halted)
        for gi, g in enumerate(self.goals):
            if isinstance(g, (WeakAuth, StrongAuth)) and self.honest(g.authenticator) \
                    and self.last_step[g.authenticator] == k:
                ab = new.binding(s, self.ri[g.authenticator])
                key_label = self.identity_key[gi]
                peer = ab.get(key_label) if key_label else None
                if peer is None:
                    peer = ab.get(g.peer, self.agent(g.peer))
                events.append(RequestEvent(gi, s, g.authenticator, self.agent(g.authenticator),
                                           peer, bind_atoms(ab, g.payload)))
        new = replace(new, events=tuple(events))
        return self._advance(new)

    def _witness(self, gi, g, s, b) -> WitnessEvent:
        key_label = self.identity_key[gi]
        me = b.get(key_label) if key_label else None
        if me is None:
            me = self.agent(g.peer)
        intended = b.get(g.authenticator, self.agent(g.authenticator))
        return WitnessEvent(gi, s, g.peer, me, intended, bind_atoms(b, g.payload))

    def successors(self, st: SearchState) -> Iterator[tuple[TraceStep, SearchState]]:
        for s in range(len(st.pcs)):
            k = st.pcs[s]
            if k >= self.n or self.halted(st, s):
                continue
            act = self.actions[k]
            for kind, msg in self.options(st, s):
                nxt = self.step(st, s, kind, msg)
                if nxt is None:
                    continue
                actor = f"{act.sender}@{s + 1}" if kind in ("honest", "block") else "INTRUDER"
                yield TraceStep(actor, s + 1, k + 1, act.channel.token, kind, msg, act.span), nxt

    # goals
    def peer_honest(self, st: SearchState, peer: Term) -> bool:
        if isinstance(peer, AgentName):
            return peer != INTRUDER
        return peer in st.honest_values

    def violated(self, st: SearchState, goals: Iterable[int]) -> int | None:
        for gi in goals:
            g = self.goals[gi]
            if isinstance(g, Secrecy):
                if self._secrecy_violated(st, g):
                    return gi
                continue
            reqs = [e for e in st.events if isinstance(e, RequestEvent) and e.goal == gi]
            if not reqs:
                continue
            wits = [e for e in st.events if isinstance(e, WitnessEvent) and e.goal == gi]
            for r in reqs:
                if not self.peer_honest(st, r.peer):
                    continue
                matching = [w for w in wits if w.actor == r.peer and w.peer == r.actor and w.payload == r.payload]
                if not matching:
                    return gi
                if isinstance(g, StrongAuth):
                    same = [q for q in reqs if (q.actor, q.peer, q.payload) == (r.actor, r.peer, r.payload)]
                    if len(same) > len(matching):
                        return gi
        return None

    def _secrecy_violated(self, st: SearchState, g: Secrecy) -> bool:
        labels = sorted({a.label for a in atoms(g.payload)})
        for s in range(len(st.pcs)):
            honest = [r for r in g.among if self.honest(r)]
            if len(honest) == len(g.among):
                for r in honest:
                    b = st.binding(s, self.ri[r])
                    if all(lab in b for lab in labels):
                        val = bind_atoms(b, g.payload)
                        # a value the intruder made up itself is no secret
                        if atoms(val) & st.honest_values and derives(st.knowledge, val, analyzed=True):
                            return True
            for lab in labels:
                owner = self.minters.get(lab)
                if owner is None or not self.honest(owner) or not self.finished(st, s, owner):
                    continue
                ob = st.binding(s, self.ri[owner])
                for r in honest:
                    if r == owner or not self.finished(st, s, r):
                        continue
                    rb = st.binding(s, self.ri[r])
                    if lab not in rb or rb[lab] == ob[lab]:
                        continue
                    # only a disagreement if r believes it is dealing with this owner
                    key = self._value_signer(r, lab)
                    if key is not None:
                        if rb.get(key) == ob.get(key):
                            return True
                    elif rb.get(owner, self.agent(owner)) == self.agent(owner):
                        return True
        return False

    def _value_signer(self, role: str, label: str) -> str | None:
        k = (role, label)
        if k not in self._signer_cache:
            self._signer_cache[k] = message_signers(self.spec, role, Constant(label))
        return self._signer_cache[k]


def _goal_indices(model: _Model, goals) -> list[int]:
    if goals is None:
        return list(range(len(model.goals)))
    want = [g if isinstance(g, int) else model.goals.index(g) for g in goals]
    return want


def _dfs(model: _Model, st: SearchState, remaining: int, goals: list[int], visited: dict,
         counter: list[int], path: list[TraceStep], limit_states: int):
    """Depth-limited DFS.  Returns (attack path, goal) or (None, cutoff flag)."""
    cutoff = False
    for step, nxt in model.successors(st):
        counter[0] += 1
        if counter[0] > limit_states:
            raise _Budget()
        gi = model.violated(nxt, goals)
        if gi is not None:
            return path + [step], gi
        if all(pc >= model.n for pc in nxt.pcs):
            continue
        if remaining <= 1:
            cutoff = True
            continue
        if visited.get(nxt, 0) >= remaining - 1:
            continue
        visited[nxt] = remaining - 1
        res, flag = _dfs(model, nxt, remaining - 1, goals, visited, counter, path + [step], limit_states)
        if res is not None:
            return res, flag
        cutoff = cutoff or flag
    return None, cutoff


def _subtree(args):
    spec, cfg, goals, child_path, limit = args
    model = _Model(spec, cfg)
    st = model.initial()
    for step in child_path:
        st = _apply(model, st, step)
    counter = [0]
    try:
        res, flag = _dfs(model, st, limit, goals, {}, counter, list(child_path), cfg.max_states)
    except _Budget:
        return None, None, counter[0], True
    return res, flag, counter[0], False


def _apply(model: _Model, st: SearchState, step: TraceStep) -> SearchState:
    nxt = model.step(st, step.session - 1, step.kind, step.message)
    assert nxt is not None
    return nxt


def _search(spec: ProtocolSpec, cfg: SearchConfig, goals=None) -> Verdict:
    model = _Model(spec, cfg)
    gis = _goal_indices(model, goals)
    root = model.initial()
    max_depth = model.n * cfg.sessions
    counter = [0]
    trace_cfg = dict(sessions=cfg.sessions, intruder_roles=frozenset(model.dishonest))
    try:
        for limit in range(1, max_depth + 1):
            if cfg.workers > 1:
                res, cutoff = _parallel_level(spec, cfg, model, root, gis, limit, counter)
            else:
                res, cutoff = _dfs(model, root, limit, gis, {}, counter, [], cfg.max_states)
            if res is not None:
                path, gi = res, cutoff
                trace = AttackTrace(tuple(path), model.goals[gi], **trace_cfg)
                return Attack(model.goals[gi], trace, counter[0])
            if not cutoff:
                break
    except _Budget:
        return Inconclusive(cfg, counter[0])
    return Safe(cfg, counter[0])


def _parallel_level(spec, cfg, model, root, gis, limit, counter):
    first = []
    for step, nxt in model.successors(root):
        counter[0] += 1
        gi = model.violated(nxt, gis)
        if gi is not None:
            return [step], gi
        first.append(step)
    if limit <= 1:
        return None, bool(first)
    jobs = [(spec, cfg, gis, [step], limit - 1) for step in first]
    cutoff = False
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        for res, flag, n, over in pool.map(_subtree, jobs):
            counter[0] += n
            if over or counter[0] > cfg.max_states:
                raise _Budget()
            if res is not None:
                return res, flag
            cutoff = cutoff or flag
    return None, cutoff


def _prepare(spec: ProtocolSpec) -> ProtocolSpec:
    problems = validate(spec)
    if problems:
        raise ValueError("spec is not executable: " + "; ".join(map(str, problems)))
    return expand(spec)


def check(spec: ProtocolSpec, cfg: SearchConfig | None = None) -> Verdict:
    """Search for a violation of any goal; the first one in exploration order wins."""
    cfg = cfg or SearchConfig()
    return _search(_prepare(spec), cfg)


def check_goals(spec: ProtocolSpec, cfg: SearchConfig | None = None) -> list[tuple[Goal, Verdict]]:
    """Check each goal on its own, so every violated goal gets its own trace."""
    cfg = cfg or SearchConfig()
    spec = _prepare(spec)
    return [(g, _search(spec, cfg, [gi])) for gi, g in enumerate(spec.goals)]


def replay(spec: ProtocolSpec, trace: AttackTrace) -> Attack:
    """Re-execute ``trace`` step by step and confirm it ends in a violation."""
    spec = _prepare(spec)
    cfg = SearchConfig(sessions=trace.sessions, intruder_roles=trace.intruder_roles or None)
    model = _Model(spec, cfg)
    st = model.initial()
    for idx, step in enumerate(trace.steps, 1):
        s = step.session - 1
        if not 0 <= s < cfg.sessions or st.pcs[s] >= model.n or model.halted(st, s):
            raise ReplayError(idx, "session has no pending action")
        if st.pcs[s] != step.action - 1:
            raise ReplayError(idx, f"session {step.session} is at action {st.pcs[s] + 1}, not {step.action}")
        act = model.actions[st.pcs[s]]
        if step.kind in ("honest", "block") and not model.honest(act.sender):
            raise ReplayError(idx, f"{act.sender} is played by the intruder")
        if step.kind in ("inject", "replay") and model.honest(act.sender) and not model.honest(act.receiver):
            raise ReplayError(idx, "intruder cannot redirect a message addressed to itself")
        if step.kind == "inject" and model.honest(act.sender) and act.channel.authentic:
            raise ReplayError(idx, "cannot forge on an authentic channel")
        if step.kind == "inject":
            know = st.knowledge
            if model.honest(act.sender) and not act.channel.confidential:
                hmsg, _, _ = model.honest_message(st, s)
                know = analyze(know | {hmsg}).facts
            if not derives(know, step.message, analyzed=True):
                raise ReplayError(idx, f"intruder cannot derive {render(step.message)}")
        nxt = model.step(st, s, step.kind, step.message)
        if nxt is None:
            raise ReplayError(idx, f"step not applicable: {render(step.message)}")
        st = nxt
    goals = list(range(len(model.goals)))
    if trace.goal is not None:
        goals = [model.goals.index(trace.goal)] if trace.goal in model.goals else []
    gi = model.violated(st, goals)
    if gi is None:
        raise ReplayError(None, "no violation reached")
    return Attack(model.goals[gi], trace, 0)


def format_trace(trace: AttackTrace, spec: ProtocolSpec | None = None) -> str:
    """Line-oriented rendering: one tab-separated step per line after ``#`` headers."""
    lines = ["# bip70dy attack trace"]
    if spec is not None:
        lines.append(f"# protocol: {spec.name}")
    if trace.goal is not None:
        lines.append(f"# goal: {goal_text(trace.goal)}")
    lines.append(f"# sessions: {trace.sessions}")
    lines.append(f"# intruder: {','.join(sorted(trace.intruder_roles))}")
    for i, st in enumerate(trace.steps, 1):
        span = f"@{st.span}" if st.span else "@-"
        lines.append("\t".join([str(i), st.actor, str(st.session), str(st.action), st.channel,
                                st.kind, render(st.message), span]))
    return "\n".join(lines) + "\n"


def parse_trace(text: str, spec: ProtocolSpec) -> AttackTrace:
    """Inverse of :func:`format_trace`."""
    from .dsl import parse_term
    spec = expand(spec)
    goal = None
    sessions = 1
    roles: frozenset[str] = frozenset()
    steps = []
    spans = {k + 1: a.span for k, a in enumerate(spec.actions)}
    for ln, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            key, val = key.strip(), val.strip()
            if key == "goal":
                found = [g for g in spec.goals if goal_text(g) == val]
                if not found:
                    raise ValueError(f"line {ln}: unknown goal {val!r}")
                goal = found[0]
            elif key == "sessions":
                sessions = int(val)
            elif key == "intruder":
                roles = frozenset(r for r in val.split(",") if r)
            continue
        parts = line.split("\t")
        if len(parts) < 7:
            raise ValueError(f"line {ln}: expected 7 or 8 tab-separated fields")
        _, actor, sess, action, channel, kind, term = parts[:7]
        if kind not in ("honest", "inject", "replay", "block"):
            raise ValueError(f"line {ln}: unknown step kind {kind!r}")
        steps.append(TraceStep(actor, int(sess), int(action), channel, kind,
                               parse_term(term, spec), spans.get(int(action))))
    return AttackTrace(tuple(steps), goal, sessions, roles)


def explore(spec: ProtocolSpec, cfg: SearchConfig | None = None) -> Iterator[SearchState]:
    """Every reachable state (breadth-first, duplicates removed); for invariant checks."""
    cfg = cfg or SearchConfig()
    model = _Model(_prepare(spec), cfg)
    seen = {model.initial()}
    frontier = [model.initial()]
    yield frontier[0]
    while frontier:
        nxt = []
        for st in frontier:
            for _, child in model.successors(st):
                if child not in seen:
                    if len(seen) >= cfg.max_states:
                        return
                    seen.add(child)
                    nxt.append(child)
                    yield child
        frontier = nxt

