"""Symbolic message algebra.

Terms are immutable, hashable values.  The algebra is free: two terms are
equal only when they are syntactically identical.  Signatures are transparent
(the payload can be read off a signed blob) and ``PrivKeyOf`` has no
destructor, so a private key can never be recovered from anything.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

__all__ = [
    "Term", "AgentName", "Constant", "Fresh", "Variable", "Pair", "Apply",
    "Signed", "PrivKeyOf", "FunctionSymbol", "Substitution", "UnificationError",
    "HASH", "apply", "compose", "unify", "match", "subterms", "variables",
    "atoms", "is_ground", "tuple_of", "flatten", "render", "depth", "size",
]


class Term:
    """Base class of all symbolic messages."""

    __slots__ = ()

    def children(self) -> tuple["Term", ...]:
        return ()

    def __str__(self) -> str:
        return render(self)


class _Compound(Term):
    """Caches hash and groundness; deep terms are hashed very often."""

    __slots__ = ()

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((type(self).__name__,) + self.children())
            object.__setattr__(self, "_h", h)
        return h

    def __getstate__(self):
        # cached hashes are per-process (string hashing is randomised)
        return {k: v for k, v in self.__dict__.items() if k not in ("_h", "_g")}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)


@dataclass(frozen=True, repr=False)
class AgentName(Term):
    label: str

    def __repr__(self) -> str:
        return f"AgentName({self.label!r})"


@dataclass(frozen=True, repr=False)
class Constant(Term):
    label: str

    def __repr__(self) -> str:
        return f"Constant({self.label!r})"


@dataclass(frozen=True, repr=False)
class Fresh(Term):
    label: str
    session: int

    def __repr__(self) -> str:
        return f"Fresh({self.label!r}, {self.session})"


@dataclass(frozen=True, repr=False)
class Variable(Term):
    label: str

    def __repr__(self) -> str:
        return f"Variable({self.label!r})"


@dataclass(frozen=True, repr=False)
class Pair(_Compound):
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)

    def __repr__(self) -> str:
        return f"Pair({self.left!r}, {self.right!r})"


@dataclass(frozen=True)
class FunctionSymbol:
    label: str
    arity: int
    public: bool = True

    def __call__(self, *args: Term) -> "Apply":
        if len(args) != self.arity:
            raise TypeError(f"{self.label} expects {self.arity} argument(s), got {len(args)}")
        return Apply(self, tuple(args))


@dataclass(frozen=True, repr=False)
class Apply(_Compound):
    function: FunctionSymbol
    args: tuple[Term, ...]

    def children(self):
        return self.args

    def __repr__(self) -> str:
        return f"Apply({self.function.label!r}, {list(self.args)!r})"


@dataclass(frozen=True, repr=False)
class Signed(_Compound):
    key: Term
    payload: Term

    def children(self):
        return (self.key, self.payload)

    def __repr__(self) -> str:
        return f"Signed({self.key!r}, {self.payload!r})"


@dataclass(frozen=True, repr=False)
class PrivKeyOf(_Compound):
    key: Term

    def children(self):
        return (self.key,)

    def __repr__(self) -> str:
        return f"PrivKeyOf({self.key!r})"


HASH = FunctionSymbol("hash", 1, True)

ATOMS = (AgentName, Constant, Fresh)

Substitution = Mapping[str, Term]
"""Variable label -> term.  Plain dicts are used throughout."""


class UnificationError(Exception):
    def __init__(self, reason: str, left: "Term", right: "Term"):
        super().__init__(reason, left, right)
        self.reason, self.left, self.right = reason, left, right

    def __str__(self) -> str:
        return f"{self.reason}: {render(self.left)} vs {render(self.right)}"


def _rebuild(t: Term, kids: tuple[Term, ...]) -> Term:
    if isinstance(t, Pair):
        return Pair(kids[0], kids[1])
    if isinstance(t, Apply):
        return Apply(t.function, kids)
    if isinstance(t, Signed):
        return Signed(kids[0], kids[1])
    if isinstance(t, PrivKeyOf):
        return PrivKeyOf(kids[0])
    return t


def apply(subst: Substitution, t: Term) -> Term:
    """Replace every bound variable of ``t``; unbound variables stay put."""
    if not subst:
        return t
    if isinstance(t, Variable):
        return subst.get(t.label, t)
    kids = t.children()
    if not kids:
        return t
    new = tuple(apply(subst, k) for k in kids)
    if all(a is b for a, b in zip(new, kids)):
        return t
    return _rebuild(t, new)


def compose(first: Substitution, second: Substitution) -> dict[str, Term]:
    """Substitution equivalent to applying ``first`` then ``second``."""
    out = {k: apply(second, v) for k, v in first.items()}
    for k, v in second.items():
        out.setdefault(k, v)
    return {k: v for k, v in out.items() if v != Variable(k)}


def _occurs(label: str, t: Term) -> bool:
    if isinstance(t, Variable):
        return t.label == label
    return any(_occurs(label, k) for k in t.children())


def _walk(t: Term, s: dict[str, Term]) -> Term:
    while isinstance(t, Variable) and t.label in s:
        t = s[t.label]
    return t


def _resolve(t: Term, s: dict[str, Term]) -> Term:
    t = _walk(t, s)
    kids = t.children()
    if not kids:
        return t
    return _rebuild(t, tuple(_resolve(k, s) for k in kids))


def unify(t1: Term, t2: Term, subst: Substitution | None = None) -> dict[str, Term]:
    """Most general unifier of ``t1`` and ``t2`` (extending ``subst``).

    Raises ``UnificationError`` on a symbol clash or an occurs-check failure.
    The result is idempotent.
    """
    s: dict[str, Term] = dict(subst or {})
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a, b = _walk(a, s), _walk(b, s)
        if a == b:
            continue
        if isinstance(a, Variable):
            if _occurs(a.label, _resolve(b, s)):
                raise UnificationError("occurs check", a, b)
            s[a.label] = b
            continue
        if isinstance(b, Variable):
            stack.append((b, a))
            continue
        if type(a) is not type(b):
            raise UnificationError("clash", a, b)
        if isinstance(a, Apply):
            if a.function != b.function or len(a.args) != len(b.args):
                raise UnificationError("clash", a, b)
        elif not a.children():
            raise UnificationError("clash", a, b)
        stack.extend(zip(a.children(), b.children()))
    return {k: _resolve(v, s) for k, v in s.items()}


def match(pattern: Term, ground: Term, subst: Substitution | None = None) -> dict[str, Term] | None:
    """One-sided unification against a ground term; ``None`` when it fails."""
    if not is_ground(ground):
        try:
            return unify(pattern, ground, subst)
        except UnificationError:
            return None
    s = dict(subst or {})
    if _match(pattern, ground, s):
        return {k: _resolve(v, s) for k, v in s.items()}
    return None


def _match(p: Term, g: Term, s: dict[str, Term]) -> bool:
    if isinstance(p, Variable):
        bound = s.get(p.label)
        if bound is None:
            s[p.label] = g
            return True
        if isinstance(bound, Variable) or not is_ground(bound):
            try:
                s.update(unify(bound, g, s))
            except UnificationError:
                return False
            return True
        return bound == g
    if p is g:
        return True
    tp = type(p)
    if tp is not type(g):
        return False
    if tp is Pair:
        return _match(p.left, g.left, s) and _match(p.right, g.right, s)
    if tp is Signed:
        return _match(p.key, g.key, s) and _match(p.payload, g.payload, s)
    if tp is PrivKeyOf:
        return _match(p.key, g.key, s)
    if tp is Apply:
        if p.function != g.function or len(p.args) != len(g.args):
            return False
        return all(_match(a, b, s) for a, b in zip(p.args, g.args))
    return p == g


def iter_subterms(t: Term) -> Iterator[Term]:
    yield t
    for k in t.children():
        yield from iter_subterms(k)


def subterms(t: Term) -> frozenset[Term]:
    return frozenset(iter_subterms(t))


def variables(t: Term) -> frozenset[str]:
    return frozenset(s.label for s in iter_subterms(t) if isinstance(s, Variable))


def atoms(t: Term) -> frozenset[Term]:
    return frozenset(s for s in iter_subterms(t) if isinstance(s, ATOMS))


def is_ground(t: Term) -> bool:
    if isinstance(t, Variable):
        return False
    if not isinstance(t, _Compound):
        return True
    g = t.__dict__.get("_g")
    if g is None:
        g = all(is_ground(k) for k in t.children())
        object.__setattr__(t, "_g", g)
    return g


def depth(t: Term) -> int:
    kids = t.children()
    return 0 if not kids else 1 + max(depth(k) for k in kids)


def size(t: Term) -> int:
    return 1 + sum(size(k) for k in t.children())


def tuple_of(*items: Term) -> Term:
    """Right-nested pairing: ``(a, b, c)`` is ``Pair(a, Pair(b, c))``."""
    if not items:
        raise ValueError("empty tuple")
    out = items[-1]
    for it in reversed(items[:-1]):
        out = Pair(it, out)
    return out


def flatten(t: Term) -> list[Term]:
    out = []
    while isinstance(t, Pair):
        out.append(t.left)
        t = t.right
    out.append(t)
    return out


def render(t: Term) -> str:
    """Canonical text form; parseable by :func:`bip70dy.dsl.parse_term`."""
    if isinstance(t, (AgentName, Constant)):
        return t.label
    if isinstance(t, Fresh):
        return f"{t.label}#{t.session}"
    if isinstance(t, Variable):
        return f"?{t.label}"
    if isinstance(t, Pair):
        return "(" + ", ".join(render(x) for x in flatten(t)) + ")"
    if isinstance(t, Apply):
        return f"{t.function.label}(" + ", ".join(render(a) for a in t.args) + ")"
    if isinstance(t, Signed):
        return f"sign({render(t.key)}, {render(t.payload)})"
    if isinstance(t, PrivKeyOf):
        return f"inv({render(t.key)})"
    raise TypeError(f"not a term: {t!r}")
