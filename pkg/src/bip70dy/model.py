"""Protocol descriptions in Alice-and-Bob style, plus static executability checks."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .deduction import analyze, derives
from .term import (
    AgentName, Constant, FunctionSymbol, PrivKeyOf, Signed, Term, Variable,
    _rebuild, atoms, flatten, iter_subterms, render,
)

__all__ = [
    "SourceSpan", "ChannelKind", "ActionStep", "WeakAuth", "StrongAuth",
    "Secrecy", "Goal", "ProtocolSpec", "Violation", "DefinitionCycleError",
    "validate", "expand", "KINDS", "INSECURE", "AUTHENTIC", "CONFIDENTIAL",
    "SECURE", "goal_text",
]

KINDS = ("Agent", "Number", "Function", "PublicKey")


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"bad span {self}")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class ChannelKind:
    confidential: bool
    authentic: bool
    sender_pseudonymous: bool = False

    @property
    def token(self) -> str:
        return {
            (False, False): "->",
            (False, True): "*->",
            (True, False): "->*",
            (True, True): "*->*",
        }[(self.confidential, self.authentic)]

    @classmethod
    def from_token(cls, token: str, sender_pseudonymous: bool = False) -> "ChannelKind":
        table = {"->": (False, False), "*->": (False, True), "->*": (True, False), "*->*": (True, True)}
        if token not in table:
            raise ValueError(f"unknown channel token {token!r}")
        conf, auth = table[token]
        return cls(conf, auth, sender_pseudonymous and auth)


INSECURE = ChannelKind(False, False)
AUTHENTIC = ChannelKind(False, True)
CONFIDENTIAL = ChannelKind(True, False)
SECURE = ChannelKind(True, True)


@dataclass(frozen=True)
class ActionStep:
    sender: str
    channel: ChannelKind
    receiver: str
    message: Term
    sender_pseudonym: str | None = None
    receiver_pseudonym: str | None = None
    span: SourceSpan | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError(f"action sends from {self.sender} to itself")


@dataclass(frozen=True)
class WeakAuth:
    authenticator: str
    peer: str
    payload: Term


@dataclass(frozen=True)
class StrongAuth:
    authenticator: str
    peer: str
    payload: Term


@dataclass(frozen=True)
class Secrecy:
    payload: Term
    among: tuple[str, ...]


Goal = WeakAuth | StrongAuth | Secrecy


def goal_text(g: Goal) -> str:
    if isinstance(g, WeakAuth):
        return f"{g.authenticator} weakly authenticates {g.peer} on {render(g.payload)}"
    if isinstance(g, StrongAuth):
        return f"{g.authenticator} authenticates {g.peer} on {render(g.payload)}"
    return f"{render(g.payload)} secret between {', '.join(g.among)}"


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    types: Mapping[str, str]
    functions: tuple[FunctionSymbol, ...]
    definitions: Mapping[str, Term]
    knowledge: Mapping[str, tuple[Term, ...]]
    actions: tuple[ActionStep, ...]
    goals: tuple[Goal, ...]

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.types.items() if k == "Agent")

    def kind_of(self, label: str) -> str | None:
        return self.types.get(label)

    def function(self, label: str) -> FunctionSymbol | None:
        for f in self.functions:
            if f.label == label:
                return f
        return None

    def fresh_labels(self) -> tuple[str, ...]:
        """Number/PublicKey names held by nobody initially: minted at first use."""
        known = set()
        for terms in self.knowledge.values():
            for t in terms:
                known |= {a.label for a in atoms(t)}
        return tuple(n for n, k in self.types.items()
                     if k in ("Number", "PublicKey") and n not in known and n not in self.definitions)

    def minters(self) -> dict[str, str]:
        """Fresh label -> role that first sends it (after macro expansion)."""
        spec = expand(self) if self.definitions else self
        fresh = set(spec.fresh_labels())
        out: dict[str, str] = {}
        for act in spec.actions:
            for a in sorted(atoms(act.message), key=render):
                if isinstance(a, Constant) and a.label in fresh and a.label not in out:
                    out[a.label] = act.sender
        return out

    def atom(self, label: str) -> Term:
        return AgentName(label) if self.types.get(label) == "Agent" else Constant(label)


@dataclass(frozen=True)
class Violation:
    action: int | None
    kind: str
    role: str | None
    term: Term | None
    detail: str
    span: SourceSpan | None = field(default=None, compare=False)

    def __str__(self) -> str:
        where = f"action {self.action + 1}" if self.action is not None else "spec"
        at = f" at {self.span}" if self.span else ""
        what = f" {render(self.term)}" if self.term is not None else ""
        return f"{where}{at}: {self.kind}:{what} ({self.detail})"


class DefinitionCycleError(ValueError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("cyclic definitions: " + " -> ".join(self.cycle))


def _expander(defs: Mapping[str, Term]):
    done: dict[str, Term] = {}

    def visit(label: str, path: list[str]) -> Term:
        if label in done:
            return done[label]
        if label in path:
            raise DefinitionCycleError(path[path.index(label):] + [label])
        body = defs[label]
        sub = {}
        for a in atoms(body):
            if isinstance(a, Constant) and a.label in defs:
                sub[a.label] = visit(a.label, path + [label])
        out = _replace_consts(body, sub)
        done[label] = out
        return out

    def expand_term(t: Term) -> Term:
        sub = {a.label: visit(a.label, []) for a in atoms(t)
               if isinstance(a, Constant) and a.label in defs}
        return _replace_consts(t, sub)

    for label in defs:
        visit(label, [])
    return expand_term


def _replace_consts(t: Term, sub: Mapping[str, Term]) -> Term:
    if not sub:
        return t
    if isinstance(t, Constant):
        return sub.get(t.label, t)
    kids = t.children()
    if not kids:
        return t
    return _rebuild(t, tuple(_replace_consts(k, sub) for k in kids))


def expand(spec: ProtocolSpec) -> ProtocolSpec:
    """Substitute every macro away.  Raises ``DefinitionCycleError``."""
    if not spec.definitions:
        return spec
    ex = _expander(spec.definitions)

    return replace(
        spec,
        definitions={},
        knowledge={r: tuple(ex(t) for t in ts) for r, ts in spec.knowledge.items()},
        actions=tuple(replace(a, message=ex(a.message)) for a in spec.actions),
        goals=tuple(replace(g, payload=ex(g.payload)) for g in spec.goals),
    )


def _signatures(facts) -> list[Signed]:
    return sorted((f for f in facts if isinstance(f, Signed)), key=render)


def validate(spec: ProtocolSpec) -> list[Violation]:
    """Check that every action can be executed as written.

    The sender must be able to compose each top-level component of its
    message from what it knows so far (minting fresh values on first use);
    the receiver must hold the verification key of every signature it can
    open.  Problems come back as data; an empty list means valid.
    """
    out: list[Violation] = []
    try:
        ex = _expander(spec.definitions)
    except DefinitionCycleError as e:
        return [Violation(None, "definitions", None, None, str(e))]
    roles = set(spec.roles)
    fresh = set(spec.fresh_labels())
    minted: dict[str, str] = {}
    know: dict[str, set[Term]] = {r: {ex(t) for t in spec.knowledge.get(r, ())} for r in spec.roles}
    pseudo: dict[str, str] = {}

    for idx, act in enumerate(spec.actions):
        for r in (act.sender, act.receiver):
            if r not in roles:
                out.append(Violation(idx, "role", r, None, "undeclared role", act.span))
        if act.sender not in roles or act.receiver not in roles:
            continue
        for p, who in ((act.sender_pseudonym, act.sender), (act.receiver_pseudonym, act.receiver)):
            if p is not None and pseudo.setdefault(p, who) != who:
                out.append(Violation(idx, "pseudonym", who, None,
                                     f"pseudonym [{p}] already bound to {pseudo[p]}", act.span))
        mine = know[act.sender]
        for comp in flatten(act.message):
            e = ex(comp)
            for a in sorted(atoms(e), key=render):
                if isinstance(a, Constant) and a.label in fresh and a.label not in minted:
                    minted[a.label] = act.sender
                    mine.add(a)
                    if spec.kind_of(a.label) == "PublicKey":
                        mine.add(PrivKeyOf(a))
            if not derives(mine, e):
                out.append(Violation(idx, "compose", act.sender, comp,
                                     f"{act.sender} cannot compose {render(comp)}", act.span))
        theirs = know[act.receiver]
        theirs.add(ex(act.message))
        facts = analyze(theirs).facts
        for sig in _signatures(facts):
            key = sig.key.key if isinstance(sig.key, PrivKeyOf) else sig.key
            if sig in facts and not derives(facts, key, analyzed=True):
                out.append(Violation(idx, "verify", act.receiver, sig,
                                     f"{act.receiver} lacks verification key {render(key)}", act.span))

    used = set()
    for act in spec.actions:
        used |= atoms(ex(act.message))
    for g in spec.goals:
        for a in atoms(ex(g.payload)):
            if a not in used:
                out.append(Violation(None, "goal", None, a, "goal payload names a term no action carries"))
        names = (g.among if isinstance(g, Secrecy) else (g.authenticator, g.peer))
        for r in names:
            if r not in roles:
                out.append(Violation(None, "goal", r, None, "undeclared role in goal"))
    return out


def message_signers(spec: ProtocolSpec, receiver: str, payload: Term) -> str | None:
    """Label of the key whose signature (as seen by ``receiver``) covers ``payload``.

    Scans, in action order, the messages ``receiver`` gets for a signature
    ``sign(inv(K), body)`` whose body mentions every atom of ``payload`` and
    whose key ``K`` is a fresh public key.  Used to decide how an
    authenticator identifies a peer it only knows pseudonymously.
    """
    spec = expand(spec)
    want = atoms(payload)
    fresh = set(spec.fresh_labels())
    for act in spec.actions:
        if act.receiver != receiver:
            continue
        for sub in iter_subterms(act.message):
            if (isinstance(sub, Signed) and isinstance(sub.key, PrivKeyOf)
                    and isinstance(sub.key.key, Constant) and sub.key.key.label in fresh
                    and spec.kind_of(sub.key.key.label) == "PublicKey"
                    and want <= atoms(sub.payload)):
                return sub.key.key.label
    return None


def initial_atoms(spec: ProtocolSpec, role: str) -> list[Term]:
    seen: dict[Term, None] = {}
    for t in spec.knowledge.get(role, ()):
        for a in sorted(atoms(t), key=render):
            seen.setdefault(a)
    return list(seen)


def bind_atoms(bindings: Mapping[str, Term], t: Term) -> Term:
    """Replace role-level atoms by their bound values (others become variables)."""
    sub = {}
    for a in atoms(t):
        if isinstance(a, (AgentName, Constant)):
            sub[a.label] = bindings.get(a.label, Variable(a.label))
    return _replace_atoms(t, sub)


def _replace_atoms(t: Term, sub: Mapping[str, Term]) -> Term:
    if isinstance(t, (AgentName, Constant)):
        return sub.get(t.label, t)
    kids = t.children()
    if not kids:
        return t
    return _rebuild(t, tuple(_replace_atoms(k, sub) for k in kids))

