"""Reader and writer for ``.anbp`` protocol files.

The format is a small Alice-and-Bob dialect::

    Protocol: Toy
    Types:
      Agent A, B;
      Number N;
    Knowledge:
      A: A, B;
      B: B;
    Actions:
      [A] *->* B: (A, N)
    Goals:
      B weakly authenticates A on N
      N secret between A, B

``#`` starts a comment that runs to the end of the line.  Errors carry a
:class:`SourceSpan`; syntax errors also list the tokens that would have been
accepted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    KINDS, ActionStep, ChannelKind, ProtocolSpec, Secrecy, SourceSpan,
    StrongAuth, WeakAuth, goal_text,
)
from .term import (
    HASH, AgentName, Apply, Constant, Fresh, FunctionSymbol, PrivKeyOf, Signed,
    Term, Variable, render, tuple_of,
)

__all__ = ["ParseError", "SemanticError", "SourceSpan", "parse", "print_spec", "parse_term", "tokenize"]

SECTIONS = ("Protocol", "Types", "Definitions", "Knowledge", "Actions", "Goals")
ARROWS = ("*->*", "*->", "->*", "->")
RESERVED = {"inv", "sign", "hash", "weakly", "authenticates", "on", "secret", "between"}


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan, expected: frozenset[str] = frozenset()):
        self.message = message
        self.span = span
        self.expected = expected
        exp = f" (expected {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{span.line}:{span.column}: {message}{exp}")


class SemanticError(ParseError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # NAME HEADER ARROW PUNCT INT FRESH VAR EOF
    text: str
    span: SourceSpan


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<header>(?:Protocol|Types|Definitions|Knowledge|Actions|Goals):(?!=))
  | (?P<fresh>[A-Za-z_][A-Za-z0-9_']*\#[0-9]+)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_']*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<int>[0-9]+)
  | (?P<arrow>\*->\*|\*->|->\*|->)
  | (?P<punct>:=|[(),;:\[\]])
""", re.VERBOSE)


def tokenize(text: str, runtime: bool = False) -> list[Token]:
    """Split ``text`` into tokens.  ``runtime`` enables ``x#1`` and ``?X``."""
    out: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or (not runtime and m.lastgroup in ("fresh", "var")):
            if m is not None and m.lastgroup == "fresh":
                # outside runtime mode '#' opens a comment
                name = re.match(r"[A-Za-z_][A-Za-z0-9_']*", text[pos:]).group(0)
                out.append(Token("NAME", name, SourceSpan(line, col, len(name))))
                pos += len(name)
                col += len(name)
                continue
            raise ParseError(f"unexpected character {text[pos]!r}", SourceSpan(line, col, 1))
        kind, val = m.lastgroup, m.group(0)
        if kind == "nl":
            line, col = line + 1, 1
        elif kind not in ("ws", "comment"):
            tk = {"header": "HEADER", "fresh": "FRESH", "var": "VAR", "name": "NAME",
                  "int": "INT", "arrow": "ARROW", "punct": "PUNCT"}[kind]
            out.append(Token(tk, val, SourceSpan(line, col, len(val))))
            col += len(val)
        else:
            col += len(val)
        pos = m.end()
    out.append(Token("EOF", "", SourceSpan(line, col, 0)))
    return out


# raw term nodes, resolved once every declaration is known
@dataclass
class _Raw:
    op: str  # name call tuple inv sign hash fresh var
    label: str = ""
    args: list["_Raw"] = field(default_factory=list)
    span: SourceSpan | None = None
    session: int = 0


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected: set[str], what: str | None = None):
        t = self.cur
        got = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(what or f"unexpected {got}", t.span, frozenset(expected))

    def at(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind != "EOF"

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail({repr(text)})
        t = self.cur
        self.i += 1
        return t

    def name(self, what: str = "NAME") -> Token:
        t = self.cur
        if t.kind != "NAME" or t.text in RESERVED:
            self.fail({what})
        self.i += 1
        return t

    # terms
    def term(self) -> _Raw:
        t = self.cur
        if t.kind == "PUNCT" and t.text == "(":
            self.i += 1
            items = [self.term()]
            while self.at(","):
                self.i += 1
                items.append(self.term())
            self.expect(")")
            return items[0] if len(items) == 1 else _Raw("tuple", args=items, span=t.span)
        if t.kind == "FRESH":
            self.i += 1
            label, _, sess = t.text.partition("#")
            return _Raw("fresh", label, span=t.span, session=int(sess))
        if t.kind == "VAR":
            self.i += 1
            return _Raw("var", t.text[1:], span=t.span)
        if t.kind != "NAME" or t.text in RESERVED - {"inv", "sign", "hash"}:
            self.fail({"NAME", "'('", "'inv'", "'sign'", "'hash'"})
        self.i += 1
        if t.text in ("inv", "hash"):
            self.expect("(")
            arg = self.term()
            self.expect(")")
            return _Raw(t.text, args=[arg], span=t.span)
        if t.text == "sign":
            self.expect("(")
            k = self.term()
            self.expect(",")
            m = self.term()
            self.expect(")")
            return _Raw("sign", args=[k, m], span=t.span)
        nxt = self.cur
        if self.at("(") and nxt.span.line == t.span.line and nxt.span.column == t.span.column + len(t.text):
            # a call needs its "(" right after the name; "n (x, y)" is two terms
            self.i += 1
            args = [self.term()]
            while self.at(","):
                self.i += 1
                args.append(self.term())
            self.expect(")")
            return _Raw("call", t.text, args, span=t.span)
        return _Raw("name", t.text, span=t.span)

    def term_list(self) -> _Raw:
        """Comma-separated terms read as one tuple (for messages and payloads)."""
        first = self.term()
        items = [first]
        while self.at(","):
            self.i += 1
            items.append(self.term())
        return first if len(items) == 1 else _Raw("tuple", args=items, span=first.span)


class _Resolver:
    def __init__(self, types: dict[str, str], definitions: set[str], runtime: bool = False,
                 functions: dict[str, FunctionSymbol] | None = None):
        self.types = types
        self.definitions = definitions
        self.runtime = runtime
        self.arity: dict[str, int] = {}
        self.functions = dict(functions or {})

    def __call__(self, r: _Raw) -> Term:
        if r.op == "tuple":
            return tuple_of(*[self(a) for a in r.args])
        if r.op == "inv":
            return PrivKeyOf(self(r.args[0]))
        if r.op == "hash":
            return Apply(HASH, (self(r.args[0]),))
        if r.op == "sign":
            return Signed(self(r.args[0]), self(r.args[1]))
        if r.op == "fresh":
            return Fresh(r.label, r.session)
        if r.op == "var":
            return Variable(r.label)
        if r.op == "call":
            args = tuple(self(a) for a in r.args)
            if r.label in self.functions:
                f = self.functions[r.label]
                if f.arity != len(args):
                    raise SemanticError(f"{r.label} expects {f.arity} argument(s)", r.span)
                return Apply(f, args)
            if self.types.get(r.label) != "Function":
                if self.runtime:
                    f = FunctionSymbol(r.label, len(args))
                    self.functions[r.label] = f
                    return Apply(f, args)
                raise SemanticError(f"unknown function {r.label!r}", r.span)
            n = self.arity.setdefault(r.label, len(args))
            if n != len(args):
                raise SemanticError(f"{r.label} used with {len(args)} argument(s), earlier with {n}", r.span)
            return Apply(FunctionSymbol(r.label, n), args)
        kind = self.types.get(r.label)
        if kind == "Agent":
            return AgentName(r.label)
        if kind in ("Number", "PublicKey") or r.label in self.definitions:
            return Constant(r.label)
        if kind == "Function":
            raise SemanticError(f"function {r.label!r} used as a value", r.span)
        if self.runtime:
            return AgentName(r.label) if r.label == "i" else Constant(r.label)
        raise SemanticError(f"unknown identifier {r.label!r}", r.span)


def parse(text: str) -> ProtocolSpec:
    """Parse an ``.anbp`` document."""
    p = _Parser(tokenize(text))
    if not (p.cur.kind == "HEADER" and p.cur.text == "Protocol:"):
        p.fail({"'Protocol:'"})
    p.i += 1
    name = p.name().text
    types: dict[str, str] = {}
    type_spans: dict[str, SourceSpan] = {}
    raw_defs: list[tuple[str, _Raw, SourceSpan]] = []
    raw_know: list[tuple[str, list[_Raw], SourceSpan]] = []
    raw_acts: list[tuple] = []
    raw_goals: list[tuple] = []
    seen: set[str] = set()
    heads = {"'Types:'", "'Definitions:'", "'Knowledge:'", "'Actions:'", "'Goals:'"}

    while p.cur.kind != "EOF":
        if p.cur.kind != "HEADER" or p.cur.text == "Protocol:":
            p.fail(heads | {"end of input"})
        sect = p.cur.text[:-1]
        if sect in seen:
            raise ParseError(f"duplicate section {sect}", p.cur.span)
        seen.add(sect)
        p.i += 1
        if sect == "Types":
            if p.cur.kind != "NAME":
                p.fail({"Agent", "Number", "Function", "PublicKey"})
            while p.cur.kind == "NAME":
                kt = p.cur
                if kt.text not in KINDS:
                    p.fail({"Agent", "Number", "Function", "PublicKey"})
                p.i += 1
                while True:
                    n = p.name()
                    if n.text in types or n.text in SECTIONS or n.text == "i":
                        raise SemanticError(f"{n.text!r} declared twice or reserved", n.span)
                    types[n.text] = kt.text
                    type_spans[n.text] = n.span
                    if p.at(","):
                        p.i += 1
                        continue
                    break
                p.expect(";")
        elif sect == "Definitions":
            while p.cur.kind == "NAME":
                n = p.name()
                p.expect(":=")
                body = p.term()
                p.expect(";")
                raw_defs.append((n.text, body, n.span))
        elif sect == "Knowledge":
            if p.cur.kind != "NAME":
                p.fail({"NAME"})
            while p.cur.kind == "NAME":
                n = p.name()
                p.expect(":")
                terms = [p.term()]
                while p.at(","):
                    p.i += 1
                    terms.append(p.term())
                p.expect(";")
                raw_know.append((n.text, terms, n.span))
        elif sect == "Actions":
            if not (p.cur.kind == "NAME" or p.at("[")):
                p.fail({"NAME", "'['"})
            while p.cur.kind == "NAME" or p.at("["):
                start = p.cur.span
                s, sp = _endpoint(p)
                if p.cur.kind != "ARROW":
                    p.fail({repr(a) for a in ARROWS})
                arrow = p.cur.text
                p.i += 1
                r, rp = _endpoint(p)
                p.expect(":")
                msg = p.term_list()
                end = p.toks[p.i - 1].span
                length = end.column + end.length - start.column if end.line == start.line else 0
                raw_acts.append((s, sp, arrow, r, rp, msg, SourceSpan(start.line, start.column, max(length, 0))))
        elif sect == "Goals":
            if not (p.cur.kind == "NAME" or p.at("(")):
                p.fail({"NAME", "'('"})
            while p.cur.kind in ("NAME",) or p.at("("):
                raw_goals.append(_goal(p))
    # resolution
    def_names = {d[0] for d in raw_defs}
    for d, _, sp in raw_defs:
        if d in types or d in RESERVED:
            raise SemanticError(f"definition {d!r} clashes with a declaration", sp)
    res = _Resolver(types, def_names)
    definitions = {d: res(body) for d, body, _ in raw_defs}
    knowledge: dict[str, tuple[Term, ...]] = {}
    for role, terms, sp in raw_know:
        if types.get(role) != "Agent":
            raise SemanticError(f"unknown role {role!r}", sp)
        if role in knowledge:
            raise SemanticError(f"knowledge of {role!r} given twice", sp)
        knowledge[role] = tuple(res(t) for t in terms)
    actions = []
    for s, sp, arrow, r, rp, msg, span in raw_acts:
        for who in (s, r):
            if types.get(who.text) != "Agent":
                raise SemanticError(f"unknown role {who.text!r}", who.span)
        if s.text == r.text:
            raise SemanticError(f"{s.text} sends to itself", span)
        actions.append(ActionStep(
            sender=s.text, channel=ChannelKind.from_token(arrow, sp),
            receiver=r.text, message=res(msg),
            sender_pseudonym=s.text if sp else None,
            receiver_pseudonym=r.text if rp else None, span=span))
    goals = []
    for g in raw_goals:
        if g[0] == "secret":
            _, payload, among = g
            for a in among:
                if types.get(a.text) != "Agent":
                    raise SemanticError(f"unknown role {a.text!r}", a.span)
            goals.append(Secrecy(res(payload), tuple(a.text for a in among)))
        else:
            kind, a, b, payload = g
            for who in (a, b):
                if types.get(who.text) != "Agent":
                    raise SemanticError(f"unknown role {who.text!r}", who.span)
            cls = WeakAuth if kind == "weak" else StrongAuth
            goals.append(cls(a.text, b.text, res(payload)))
    functions = tuple(FunctionSymbol(n, res.arity.get(n, 0)) for n, k in types.items() if k == "Function")
    return ProtocolSpec(name, types, functions, definitions, knowledge, tuple(actions), tuple(goals))


def _endpoint(p: _Parser) -> tuple[Token, bool]:
    if p.at("["):
        p.i += 1
        n = p.name()
        p.expect("]")
        return n, True
    return p.name(), False


def _goal(p: _Parser):
    if p.cur.kind == "NAME" and p.peek().text in ("weakly", "authenticates"):
        a = p.name()
        kind = "strong"
        if p.at("weakly"):
            p.i += 1
            kind = "weak"
        p.expect("authenticates")
        b = p.name()
        p.expect("on")
        return (kind, a, b, p.term_list())
    payload = p.term_list()
    if not p.at("secret"):
        p.fail({"'secret'", "','"})
    p.i += 1
    p.expect("between")
    among = [p.name()]
    while p.at(","):
        p.i += 1
        among.append(p.name())
    return ("secret", payload, among)


def parse_term(text: str, spec: ProtocolSpec | None = None) -> Term:
    """Parse one term in canonical rendering (``x#1`` and ``?X`` allowed).

    With ``spec``, names resolve against its declarations; ``i`` is always
    the intruder's agent name.
    """
    p = _Parser(tokenize(text, runtime=True))
    raw = p.term()
    if p.cur.kind != "EOF":
        p.fail({"end of input"})
    if spec is None:
        res = _Resolver({}, set(), runtime=True)
    else:
        res = _Resolver(dict(spec.types), set(spec.definitions), runtime=True,
                        functions={f.label: f for f in spec.functions})
    return res(raw)


def print_spec(spec: ProtocolSpec) -> str:
    """Canonical rendering; ``parse(print_spec(s)) == s``."""
    lines = [f"Protocol: {spec.name}", ""]
    if spec.types:
        lines.append("Types:")
        run: list[str] = []
        kind = None
        for n, k in spec.types.items():
            if k != kind and run:
                lines.append(f"  {kind} {', '.join(run)};")
                run = []
            kind = k
            run.append(n)
        lines.append(f"  {kind} {', '.join(run)};")
        lines.append("")
    if spec.definitions:
        lines.append("Definitions:")
        for d, body in spec.definitions.items():
            lines.append(f"  {d} := {render(body)};")
        lines.append("")
    if spec.knowledge:
        lines.append("Knowledge:")
        for r, ts in spec.knowledge.items():
            lines.append(f"  {r}: {', '.join(render(t) for t in ts)};")
        lines.append("")
    if spec.actions:
        lines.append("Actions:")
        for a in spec.actions:
            s = f"[{a.sender}]" if a.sender_pseudonym else a.sender
            r = f"[{a.receiver}]" if a.receiver_pseudonym else a.receiver
            lines.append(f"  {s} {a.channel.token} {r}: {render(a.message)}")
        lines.append("")
    if spec.goals:
        lines.append("Goals:")
        for g in spec.goals:
            lines.append(f"  {goal_text(g)}")
        lines.append("")
    return "\n".join(lines)
