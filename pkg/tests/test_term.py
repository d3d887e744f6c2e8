import pickle

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bip70dy.term import (
    HASH, AgentName, Apply, Constant, Fresh, FunctionSymbol, Pair, PrivKeyOf, Signed,
    UnificationError, Variable, apply, atoms, compose, depth, flatten, is_ground, match, render,
    size, subterms, tuple_of, unify, variables,
)

from strategies import ground_terms, open_substitutions, open_terms, substitutions

a, b, c = Constant("a"), Constant("b"), Constant("c")
A, B = AgentName("A"), AgentName("B")
X, Y, Z = Variable("X"), Variable("Y"), Variable("Z")
f = FunctionSymbol("f", 2)
g = FunctionSymbol("g", 1)


def test_apply_replaces_bound_variables():
    assert apply({"X": a}, Pair(X, b)) == Pair(a, b)


def test_apply_leaves_unbound_variables():
    assert apply({"Y": a}, Pair(X, b)) == Pair(X, b)


def test_apply_under_signature():
    assert apply({"X": a}, Signed(PrivKeyOf(X), X)) == Signed(PrivKeyOf(a), a)


def test_subterms_of_pair():
    assert subterms(Pair(a, b)) == {Pair(a, b), a, b}


def test_subterms_of_signature():
    t = Signed(PrivKeyOf(b), a)
    assert subterms(t) == {t, PrivKeyOf(b), b, a}


def test_variables_and_atoms():
    t = Pair(X, Apply(HASH, (Pair(a, Fresh("n", 1)),)))
    assert variables(t) == {"X"}
    assert atoms(t) == {a, Fresh("n", 1)}
    assert not is_ground(t)
    assert is_ground(apply({"X": A}, t))


def test_depth_and_size():
    assert depth(a) == 0 and size(a) == 1
    assert depth(Pair(a, Pair(b, c))) == 2
    assert size(Pair(a, Pair(b, c))) == 5


def test_tuple_of_is_right_nested():
    assert tuple_of(a, b, c) == Pair(a, Pair(b, c))
    assert flatten(tuple_of(a, b, c)) == [a, b, c]
    assert tuple_of(a) == a
    with pytest.raises(ValueError):
        tuple_of()


def test_function_symbol_checks_arity():
    with pytest.raises(TypeError):
        f(a)
    assert f(a, b) == Apply(f, (a, b))


def test_render():
    assert render(Signed(PrivKeyOf(Apply(g, (A,))), tuple_of(a, Fresh("n", 2), X))) == "sign(inv(g(A)), (a, n#2, ?X))"


def test_terms_survive_pickling_with_consistent_hash():
    t = Pair(Signed(PrivKeyOf(a), b), Apply(HASH, (c,)))
    hash(t)
    u = pickle.loads(pickle.dumps(t))
    assert u == t and hash(u) == hash(t)
    assert {u: 1}[t] == 1


# unification catalogue: (left, right, expected mgu or None for failure)
CATALOGUE = [
    (X, a, {"X": a}),
    (a, X, {"X": a}),
    (a, a, {}),
    (a, b, None),
    (A, a, None),  # agent names and constants never coincide
    (X, X, {}),
    (X, Y, "unifier"),
    (Pair(X, b), Pair(a, Y), {"X": a, "Y": b}),
    (Pair(X, X), Pair(a, b), None),
    (Pair(X, Y), Pair(Y, a), {"X": a, "Y": a}),
    (X, Pair(X, a), None),  # occurs check
    (Pair(X, Y), Pair(Y, Pair(X, a)), None),  # indirect occurs check
    (Apply(f, (X, b)), Apply(f, (a, Y)), {"X": a, "Y": b}),
    (Apply(f, (X, b)), Apply(g, (a,)), None),
    (Apply(HASH, (X,)), Apply(HASH, (Pair(a, b),)), {"X": Pair(a, b)}),
    (Signed(PrivKeyOf(X), Y), Signed(PrivKeyOf(a), Pair(a, b)), {"X": a, "Y": Pair(a, b)}),
    (Signed(X, a), Pair(X, a), None),
    (PrivKeyOf(X), PrivKeyOf(PrivKeyOf(a)), {"X": PrivKeyOf(a)}),
    (Fresh("n", 1), Fresh("n", 2), None),
    (Pair(X, Pair(Y, Z)), Pair(Y, Pair(Z, a)), {"X": a, "Y": a, "Z": a}),
    (tuple_of(X, Y, a), tuple_of(a, b), None),
    (Pair(Apply(HASH, (X,)), X), Pair(Apply(HASH, (Y,)), a), {"X": a, "Y": a}),
]


@pytest.mark.parametrize("left,right,expected", CATALOGUE)
def test_unify_catalogue(left, right, expected):
    if expected is None:
        with pytest.raises(UnificationError):
            unify(left, right)
        return
    s = unify(left, right)
    assert apply(s, left) == apply(s, right)
    if expected != "unifier":
        assert s == expected


def test_unify_variable_pair_is_most_general():
    s = unify(X, Y)
    assert len(s) == 1 and apply(s, X) == apply(s, Y)
    assert apply(s, X) in (X, Y)


def test_unify_extends_given_substitution():
    s = unify(Pair(X, Y), Pair(a, b), {"Z": c})
    assert s == {"X": a, "Y": b, "Z": c}
    with pytest.raises(UnificationError):
        unify(X, b, {"X": a})


def test_unification_error_message_is_lazy_but_readable():
    with pytest.raises(UnificationError) as e:
        unify(Pair(a, b), Pair(a, c))
    assert "b" in str(e.value) and "c" in str(e.value)


def test_match_against_ground():
    assert match(Pair(X, b), Pair(a, b)) == {"X": a}
    assert match(Pair(X, X), Pair(a, b)) is None
    assert match(Pair(X, Y), Pair(a, b), {"X": a}) == {"X": a, "Y": b}
    assert match(Pair(X, Y), Pair(a, b), {"X": b}) is None


@given(open_terms, substitutions)
@settings(max_examples=300)
def test_unify_finds_mgu_of_instances(t, theta):
    """If u is an instance of t, unify succeeds and the mgu is at least as general as theta."""
    u = apply(theta, t)
    s = unify(t, u)
    assert apply(s, t) == apply(s, u)
    # theta is a unifier too, so it must factor through the mgu
    assert apply(theta, apply(s, t)) == apply(theta, u)


@given(open_terms, open_terms)
@settings(max_examples=300)
def test_unify_sound_and_idempotent(t1, t2):
    try:
        s = unify(t1, t2)
    except UnificationError:
        return
    assert apply(s, t1) == apply(s, t2)
    for v in s.values():
        assert not (variables(v) & set(s))


@given(open_terms, open_terms, open_substitutions)
@settings(max_examples=200)
def test_unify_most_general(t1, t2, theta):
    """Any unifier theta is an instance of the mgu."""
    if apply(theta, t1) != apply(theta, t2):
        return
    s = unify(t1, t2)
    for side in (t1, t2):
        assert apply(theta, apply(s, side)) == apply(theta, side)


@given(open_terms, open_substitutions, open_substitutions)
@settings(max_examples=300)
def test_compose_matches_sequential_application(t, s1, s2):
    assert apply(compose(s1, s2), t) == apply(s2, apply(s1, t))


@given(open_terms, open_substitutions, open_substitutions, open_substitutions)
@settings(max_examples=200)
def test_compose_associative(t, s1, s2, s3):
    left = compose(compose(s1, s2), s3)
    right = compose(s1, compose(s2, s3))
    assert apply(left, t) == apply(right, t)


@given(ground_terms)
def test_ground_terms_unify_only_with_themselves(t):
    assert unify(t, t) == {}
    assert match(t, t) == {}


@given(st.lists(ground_terms, min_size=1, max_size=5))
def test_flatten_inverts_tuple_of(items):
    t = tuple_of(*items)
    flat = flatten(t)
    # flattening is maximal: a trailing pair also splits
    assert tuple_of(*flat) == t
