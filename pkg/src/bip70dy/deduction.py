"""Dolev-Yao intruder knowledge.

``analyze`` closes a set of ground facts under decomposition (unpairing and
reading signature payloads).  ``derives`` decides whether a ground term can be
composed from the analysed facts.  ``instantiate`` grounds a message template
with values the intruder can produce, either by composing it or by matching
it against something it already holds (which is how signed blobs it cannot
forge still get replayed).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Iterator, Sequence

from .term import (
    Apply, FunctionSymbol, Pair, PrivKeyOf, Signed, Term, Variable, apply,
    is_ground, match, render,
)

__all__ = [
    "Knowledge", "analyze", "derives", "instantiate", "composable_terms",
    "composable_levels", "composition_depth",
]


@dataclass(frozen=True)
class Knowledge:
    facts: frozenset[Term]

    @classmethod
    def of(cls, *facts: Term | Iterable[Term]) -> "Knowledge":
        out: set[Term] = set()
        for f in facts:
            if isinstance(f, Term):
                out.add(f)
            else:
                out.update(f)
        return cls(frozenset(out))

    def __contains__(self, t: Term) -> bool:
        return t in self.facts

    def __iter__(self):
        return iter(sorted(self.facts, key=render))

    def __len__(self) -> int:
        return len(self.facts)

    def add(self, *terms: Term) -> "Knowledge":
        return analyze(Knowledge(self.facts | frozenset(terms)))


def _facts(k: Knowledge | Iterable[Term]) -> frozenset[Term]:
    return k.facts if isinstance(k, Knowledge) else frozenset(k)


def analyze(k: Knowledge | Iterable[Term]) -> Knowledge:
    """Least fixpoint under unpairing and signature-payload extraction."""
    facts = set(_facts(k))
    todo = list(facts)
    while todo:
        t = todo.pop()
        if isinstance(t, Pair):
            new = (t.left, t.right)
        elif isinstance(t, Signed):
            new = (t.payload,)
        else:
            continue
        for n in new:
            if n not in facts:
                facts.add(n)
                todo.append(n)
    return Knowledge(frozenset(facts))


def _derives(facts: frozenset[Term], t: Term) -> bool:
    if t in facts:
        return True
    if isinstance(t, Pair):
        return _derives(facts, t.left) and _derives(facts, t.right)
    if isinstance(t, Apply):
        return t.function.public and all(_derives(facts, a) for a in t.args)
    if isinstance(t, Signed):
        return _derives(facts, t.key) and _derives(facts, t.payload)
    return False


def derives(k: Knowledge | Iterable[Term], goal: Term, *, analyzed: bool = False) -> bool:
    """Can ``goal`` be composed from the analysed facts of ``k``?

    Pass ``analyzed=True`` when ``k`` is already closed under ``analyze``.
    """
    if not is_ground(goal):
        raise ValueError(f"goal is not ground: {render(goal)}")
    facts = _facts(k) if analyzed else analyze(k).facts
    return _derives(facts, goal)


def composable_levels(facts: Sequence[Term], functions: Sequence[FunctionSymbol], depth: int) -> list[list[Term]]:
    """``levels[d]`` lists every term composable with at most ``d`` new layers.

    Ordering is deterministic: by composition level, then construction order.
    """
    seen = dict.fromkeys(facts)
    levels = [list(seen)]
    privs = [f for f in facts if isinstance(f, PrivKeyOf)]
    for _ in range(depth):
        pool = list(seen)
        nxt: list[Term] = []
        for a, b in product(pool, repeat=2):
            nxt.append(Pair(a, b))
        for f in functions:
            if f.public:
                for args in product(pool, repeat=f.arity):
                    nxt.append(Apply(f, args))
        for key in privs:
            for m in pool:
                nxt.append(Signed(key, m))
        seen.update(dict.fromkeys(t for t in nxt if t not in seen))
        levels.append(list(seen))
    return levels


def composable_terms(facts: Sequence[Term], functions: Sequence[FunctionSymbol], depth: int) -> list[Term]:
    return composable_levels(facts, functions, depth)[-1]


def composition_depth(facts: frozenset[Term], t: Term) -> int | None:
    """Fewest new constructor layers needed to build ``t``; ``None`` if underivable."""
    if t in facts:
        return 0
    if isinstance(t, Pair):
        kids = (t.left, t.right)
    elif isinstance(t, Apply) and t.function.public:
        kids = t.args
    elif isinstance(t, Signed):
        kids = (t.key, t.payload)
    else:
        return None
    best = 0
    for k in kids:
        d = composition_depth(facts, k)
        if d is None:
            return None
        best = max(best, d)
    return best + 1


Candidates = Callable[[Variable, "int | None"], Sequence[Term]]


class _Gen:
    def __init__(self, facts, ordered, cands):
        self.facts = facts
        self.ordered = ordered
        self.cands = cands

    def run(self, t: Term, s: dict, budget: int | None) -> Iterator[dict]:
        t = apply(s, t)
        if is_ground(t):
            if budget is None:
                if _derives(self.facts, t):
                    yield s
            else:
                d = composition_depth(self.facts, t)
                if d is not None and d <= budget:
                    yield s
            return
        if isinstance(t, Variable):
            for c in self.cands(t, budget):
                yield {**s, t.label: c}
            return
        # replay: match a structured template against something already held
        for f in self.ordered:
            r = match(t, f, s)
            if r is not None:
                yield r
        if budget is not None and budget <= 0:
            return
        sub = None if budget is None else budget - 1
        if isinstance(t, Pair):
            for s1 in self.run(t.left, s, sub):
                yield from self.run(t.right, s1, sub)
        elif isinstance(t, Apply) and t.function.public:
            yield from self.args(t.args, s, sub)
        elif isinstance(t, Signed):
            for s1 in self.run(t.key, s, sub):
                yield from self.run(t.payload, s1, sub)

    def args(self, args, s, budget):
        if not args:
            yield s
            return
        for s1 in self.run(args[0], s, budget):
            yield from self.args(args[1:], s1, budget)


def instantiate(k: Knowledge | Iterable[Term], template: Term, depth: int | None = 2, *,
                functions: Sequence[FunctionSymbol] = (), candidates: Candidates | None = None,
                analyzed: bool = False) -> list[dict[str, Term]]:
    """Ground ``template`` with intruder-producible values.

    A variable is bound either by matching a (sub)template against a held
    fact, or by composing a value.  ``depth`` caps how many new constructor
    layers the finished message may nest on top of held facts; ``None``
    lifts the cap (only sensible together with ``candidates``, which then
    supplies the value pool for each variable).  The result is
    duplicate-free and deterministically ordered.
    """
    facts = _facts(k) if analyzed else analyze(k).facts
    ordered = sorted(facts, key=render)
    if candidates is None:
        if depth is None:
            raise ValueError("an unbounded search needs explicit candidates")
        fns = list(functions)
        for t in facts:
            for sub in _iter_apply(t):
                if sub.function not in fns:
                    fns.append(sub.function)
        for sub in _iter_apply(template):
            if sub.function not in fns:
                fns.append(sub.function)
        fns.sort(key=lambda f: f.label)
        levels = composable_levels(ordered, fns, depth)
        candidates = lambda v, b: levels[b]  # noqa: E731
    wanted = sorted({v.label for v in _vars(template)})
    out: dict[tuple, dict[str, Term]] = {}
    for s in _Gen(facts, ordered, candidates).run(template, {}, depth):
        key = tuple(s.get(v) for v in wanted)
        if key not in out and all(x is not None for x in key):
            out[key] = {v: s[v] for v in wanted}
    return list(out.values())


def _vars(t: Term) -> Iterator[Variable]:
    if isinstance(t, Variable):
        yield t
    for c in t.children():
        yield from _vars(c)


def _iter_apply(t: Term) -> Iterator[Apply]:
    if isinstance(t, Apply):
        yield t
    for c in t.children():
        yield from _iter_apply(c)
