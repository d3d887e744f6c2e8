from importlib import resources

import pytest

from bip70dy.deduction import derives
from bip70dy.dsl import parse
from bip70dy.model import Secrecy, StrongAuth, WeakAuth
from bip70dy.search import (
    Attack, AttackTrace, Inconclusive, ReplayError, RequestEvent, Safe, SearchConfig,
    WitnessEvent, check, check_goals, default_intruder_roles, explore, format_trace, parse_trace,
    replay,
)
from bip70dy.term import Fresh, is_ground


def load(name):
    return parse(resources.files("bip70dy.fixtures").joinpath(name + ".anbp").read_text())


def toy(channel, goal, sender="A"):
    """A sends a fresh nonce to B; B answers with its hash on a secure channel."""
    return parse(f"""\
Protocol: Toy
Types:
  Agent A, B;
  Number n;
Knowledge:
  A: A, B;
  B: A, B;
Actions:
  {sender} {channel} B: n
  B *->* {sender}: hash(n)
Goals:
  {goal}
""")


HONEST = SearchConfig(intruder_roles=frozenset())


def test_config_bounds():
    with pytest.raises(ValueError):
        SearchConfig(sessions=3)
    with pytest.raises(ValueError):
        SearchConfig(max_states=0)
    with pytest.raises(ValueError):
        SearchConfig(intruder_depth=-1)
    assert SearchConfig(intruder_roles={"C1"}).intruder_roles == frozenset({"C1"})


def test_default_intruder_is_pseudonymous_customer():
    assert default_intruder_roles(load("bip70_baseline")) == frozenset({"C1"})


@pytest.mark.parametrize("channel,verdict", [("->", Attack), ("->*", Attack), ("*->", Safe), ("*->*", Safe)])
def test_weak_auth_depends_on_authenticity(channel, verdict):
    assert isinstance(check(toy(channel, "B weakly authenticates A on n"), HONEST), verdict)


@pytest.mark.parametrize("channel,verdict", [("->", Attack), ("*->", Attack), ("->*", Safe), ("*->*", Safe)])
def test_secrecy_depends_on_confidentiality(channel, verdict):
    assert isinstance(check(toy(channel, "n secret between A, B"), HONEST), verdict)


def test_strong_auth_catches_replay_across_sessions():
    # authentic but not confidential: the first message can be replayed to a
    # second run of B, which then accepts A's nonce twice
    spec = parse("""\
Protocol: Replay
Types:
  Agent A, B;
  Number n;
Knowledge:
  A: A, B;
  B: A, B;
Actions:
  A *-> B: n
Goals:
  B authenticates A on n
""")
    assert isinstance(check(spec, SearchConfig(sessions=1, intruder_roles=frozenset())), Safe)
    v = check(spec, SearchConfig(sessions=2, intruder_roles=frozenset()))
    assert isinstance(v, Attack) and isinstance(v.goal, StrongAuth)
    assert any(s.kind == "replay" for s in v.trace.steps)
    weak = parse(spec_text := format_weak())
    assert isinstance(check(weak, SearchConfig(sessions=2, intruder_roles=frozenset())), Safe), spec_text


def format_weak():
    return """\
Protocol: ReplayWeak
Types:
  Agent A, B;
  Number n;
Knowledge:
  A: A, B;
  B: A, B;
Actions:
  A *-> B: n
Goals:
  B weakly authenticates A on n
"""


def test_budget_exhaustion_is_inconclusive():
    v = check(load("bip70_endorsed"), SearchConfig(max_states=50))
    assert isinstance(v, Inconclusive) and v.states_explored >= 50


def test_baseline_attack_shape():
    results = check_goals(load("bip70_baseline"), SearchConfig(sessions=1))
    by_kind = {}
    for g, v in results:
        by_kind.setdefault(type(g), []).append(v)
    weak = [v for v in by_kind[WeakAuth] if isinstance(v, Attack)]
    assert len(weak) == 1 and weak[0].goal.peer == "C2"
    assert all(isinstance(v, Attack) for v in by_kind[Secrecy])
    trace = weak[0].trace
    assert trace.intruder_roles == frozenset({"C1"})
    final = trace.steps[-1]
    assert final.actor == "M@1"
    # the Payment was sent by the intruder playing C1 and carries a refund
    # address for C2 that C2 never minted
    pay = [s for s in trace.steps if s.action == 5][0]
    assert pay.kind == "inject" and pay.actor == "INTRUDER"
    assert Fresh("RC2", 1) not in _atoms(pay.message)


def _atoms(t):
    from bip70dy.term import atoms
    return atoms(t)


def test_attack_traces_replay_and_round_trip():
    spec = load("bip70_baseline")
    for g, v in check_goals(spec):
        if not isinstance(v, Attack):
            continue
        assert replay(spec, v.trace).goal == g
        text = format_trace(v.trace, spec)
        back = parse_trace(text, spec)
        assert back == v.trace
        assert [s.span for s in back.steps] == [s.span for s in v.trace.steps]
        assert replay(spec, back).goal == g


def test_replay_errors():
    spec = load("bip70_baseline")
    with pytest.raises(ReplayError, match="no violation reached"):
        replay(spec, AttackTrace(()))
    v = check(spec)
    assert isinstance(v, Attack)
    steps = list(v.trace.steps)
    idx = next(i for i, s in enumerate(steps) if s.kind == "inject")
    from dataclasses import replace
    from bip70dy.term import Constant
    steps[idx] = replace(steps[idx], message=Constant("zz"))
    with pytest.raises(ReplayError) as e:
        replay(spec, replace(v.trace, steps=tuple(steps)))
    assert e.value.index == idx + 1


def test_check_is_deterministic():
    spec = load("bip70_baseline")
    a, b = check(spec), check(spec)
    assert a == b and format_trace(a.trace) == format_trace(b.trace)


def test_parallel_workers_give_the_same_trace():
    spec = load("bip70_baseline")
    assert check(spec, SearchConfig(workers=2)) == check(spec)


@pytest.mark.parametrize("name", ["bip70_endorsed", "bip70_merchant_bound"])
def test_fixes_are_safe_at_one_session(name):
    results = check_goals(load(name), SearchConfig(sessions=1))
    kinds = {type(g) for g, _ in results}
    assert {WeakAuth, StrongAuth, Secrecy} <= kinds
    assert all(isinstance(v, Safe) for _, v in results), results


def test_mutant_is_not_safe():
    results = check_goals(load("bip70_endorsed_mutant"))
    assert any(isinstance(v, Attack) and isinstance(g, WeakAuth) for g, v in results)


def test_refund_addresses_stay_secret_between_honest_agents():
    spec = load("bip70_endorsed")
    states = list(explore(spec, SearchConfig(intruder_roles=frozenset())))
    assert states[-1].pcs == (len(spec.actions),)
    for st in states:
        assert not any(derives(st.knowledge, Fresh(r, 1), analyzed=True) for r in ("RC1", "RC2"))


@pytest.mark.parametrize("name", ["bip70_baseline", "bip70_endorsed"])
def test_state_invariants(name):
    seen = 0
    for st in explore(load(name), SearchConfig(max_states=20_000)):
        seen += 1
        # one owner per pseudonym (sender invariance)
        labels = [p for p, _ in st.pseudonyms]
        assert len(labels) == len(set(labels))
        for ev in st.events:
            assert isinstance(ev, (WitnessEvent, RequestEvent)) and is_ground(ev.payload)
        for sess in st.bindings:
            for b in sess:
                assert all(is_ground(t) for _, t in b)
    assert seen > 50


def test_events_grow_monotonically_along_traces():
    spec = load("bip70_baseline")
    v = check(spec)
    from bip70dy.search import _Model, _apply, _prepare
    model = _Model(_prepare(spec), SearchConfig(intruder_roles=v.trace.intruder_roles))
    st = model.initial()
    for step in v.trace.steps:
        nxt = _apply(model, st, step)
        assert nxt.events[:len(st.events)] == st.events
        st = nxt
