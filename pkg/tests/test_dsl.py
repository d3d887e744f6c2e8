from importlib import resources

import pytest

from bip70dy.dsl import ParseError, SemanticError, parse, parse_term, print_spec, tokenize
from bip70dy.model import AUTHENTIC, SECURE, Secrecy, StrongAuth, WeakAuth
from bip70dy.term import (
    HASH, AgentName, Apply, Constant, Fresh, PrivKeyOf, Signed, Variable, render, tuple_of,
)

from specgen import random_specs

FIXTURES = ["bip70_baseline", "bip70_endorsed", "bip70_merchant_bound", "bip70_endorsed_mutant"]


def fixture(name):
    return resources.files("bip70dy.fixtures").joinpath(name + ".anbp").read_text()


MINI = """\
Protocol: Mini
Types:
  Agent A, B;
  Number n;
  PublicKey K;
  Function f;
Definitions:
  m := sign(inv(K), (n, f(A)));
Knowledge:
  A: A, B, inv(K), K;
  B: A, B, K;
Actions:
  [A] *-> B: m, A
  B ->* A: hash(n)
Goals:
  B weakly authenticates A on n
  B authenticates A on n
  n secret between A, B
"""


def test_parse_mini():
    s = parse(MINI)
    assert s.name == "Mini"
    assert s.roles == ("A", "B")
    assert s.types["K"] == "PublicKey"
    assert s.function("f").arity == 1
    a1, a2 = s.actions
    assert a1.channel.authentic and not a1.channel.confidential and a1.channel.sender_pseudonymous
    assert a1.channel.token == AUTHENTIC.token
    assert a1.sender_pseudonym == "A" and a1.receiver_pseudonym is None
    assert a1.message == tuple_of(Constant("m"), AgentName("A"))
    assert a2.channel.token == "->*"
    assert a2.message == Apply(HASH, (Constant("n"),))
    assert s.goals == (
        WeakAuth("B", "A", Constant("n")),
        StrongAuth("B", "A", Constant("n")),
        Secrecy(Constant("n"), ("A", "B")),
    )
    assert s.definitions["m"] == Signed(PrivKeyOf(Constant("K")), tuple_of(Constant("n"), Apply(s.function("f"), (AgentName("A"),))))


def test_action_span_covers_the_line():
    s = parse(MINI)
    sp = s.actions[0].span
    assert (sp.line, sp.column) == (13, 3)
    assert sp.length == len("[A] *-> B: m, A")


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_round_trip(name):
    s = parse(fixture(name))
    assert parse(print_spec(s)) == s
    assert print_spec(parse(print_spec(s))) == print_spec(s)


def test_baseline_fixture_shape():
    s = parse(fixture("bip70_baseline"))
    assert len(s.actions) == 6 and len(s.goals) == 3
    assert all(a.channel.confidential and a.channel.authentic for a in s.actions)
    assert s.actions[0].channel.token == SECURE.token
    assert s.actions[0].sender_pseudonym == "C1" and s.actions[1].receiver_pseudonym == "C1"


def test_generated_specs_round_trip():
    specs = random_specs(1000)
    for s in specs:
        text = print_spec(s)
        assert parse(text) == s, text


def test_parse_term_runtime_forms():
    assert parse_term("(a#1, ?X, i)") == tuple_of(Fresh("a", 1), Variable("X"), AgentName("i"))
    s = parse(MINI)
    t = parse_term("sign(inv(K), (n#2, f(A)))", s)
    assert t == Signed(PrivKeyOf(Constant("K")), tuple_of(Fresh("n", 2), Apply(s.function("f"), (AgentName("A"),))))
    assert parse_term(render(t), s) == t


def test_comments_and_blank_lines_are_ignored():
    text = "# header\n\n" + MINI.replace("Types:", "Types:  # declarations")
    assert parse(text) == parse(MINI)


def test_sections_in_any_order():
    head, rest = MINI.split("Knowledge:")
    know, tail = rest.split("Actions:")
    assert parse(head + "Actions:" + tail + "Knowledge:" + know) == parse(MINI)


def test_tokenizer_longest_arrow():
    kinds = [(t.kind, t.text) for t in tokenize("A *->* B")]
    assert ("ARROW", "*->*") in kinds


# invalid inputs: (text, fragment of the message)
BAD = [
    ("", "Protocol"),
    ("Types:\n  Agent A;\n", "Protocol"),
    ("Protocol: P\nTypes:\n  Agent A, A;\n", "declared twice"),
    ("Protocol: P\nTypes:\n  Agent A;\n  Colour c;\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A => B: A\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B A\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> C: A\n", "unknown role"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> A: A\n", "itself"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: x\n", "unknown identifier"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: g(A)\n", "unknown function"),
    ("Protocol: P\nTypes:\n  Agent A, B;\n  Function f;\nActions:\n  A -> B: f(A)\n  B -> A: f(A, B)\n", "argument"),
    ("Protocol: P\nTypes:\n  Agent A, B;\n  Function f;\nActions:\n  A -> B: f\n", "used as a value"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: (A, B\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: sign(A)\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: A $ B\n", "unexpected character"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nKnowledge:\n  C: A;\n", "unknown role"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nKnowledge:\n  A: A;\n  A: B;\n", "twice"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nTypes:\n  Number n;\n", "duplicate section"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nDefinitions:\n  A := B;\n", "clashes"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nGoals:\n  A weakly authenticates C on A\n", "unknown role"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nGoals:\n  A secret among A, B\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nGoals:\n  A authenticates B A\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B, sign;\n", "unexpected"),
    ("Protocol: P\nTypes:\n  Agent A, B, i;\n", "reserved"),
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: ?X\n", "unexpected character"),
    # outside traces "#" starts a comment, leaving an undeclared name
    ("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: n#1\n", "unknown identifier"),
]


def test_call_needs_adjacent_parenthesis():
    text = MINI.replace("B authenticates A on n\n", "B authenticates A on n\n  (n, A) secret between A, B\n")
    s = parse(text)
    assert s.goals[1] == StrongAuth("B", "A", Constant("n"))
    assert s.goals[2] == Secrecy(tuple_of(Constant("n"), AgentName("A")), ("A", "B"))


def _inside(text, span):
    lines = text.split("\n")
    if not 1 <= span.line <= max(len(lines), 1):
        return False
    return 1 <= span.column <= len(lines[span.line - 1]) + 1


@pytest.mark.parametrize("text,fragment", BAD)
def test_invalid_inputs_report_span_inside_input(text, fragment):
    with pytest.raises(ParseError) as e:
        parse(text)
    assert fragment in str(e.value)
    assert _inside(text, e.value.span), (e.value.span, text)


def test_semantic_errors_are_parse_errors():
    with pytest.raises(SemanticError):
        parse("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: x\n")


def test_parse_error_lists_expected_tokens():
    with pytest.raises(ParseError) as e:
        parse("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A B: A\n")
    assert "'->'" in e.value.expected


def test_error_span_points_at_offending_token():
    text = "Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: (A, zz)\n"
    with pytest.raises(ParseError) as e:
        parse(text)
    assert (e.value.span.line, e.value.span.column) == (5, 15)
