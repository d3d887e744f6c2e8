"""Symbolic and concrete analysis of BIP70 payment protocols."""
from .term import (
    AgentName, Apply, Constant, Fresh, FunctionSymbol, Pair, PrivKeyOf, Signed,
    Term, Variable, unify, render,
)
from .deduction import Knowledge, analyze, derives, instantiate
from .model import ProtocolSpec, validate, expand
from .dsl import parse, parse_term, print_spec, ParseError
from .search import SearchConfig, Safe, Attack, Inconclusive, check, check_goals, replay

__all__ = [
    "AgentName",
    "Apply",
    "Constant",
    "Fresh",
    "FunctionSymbol",
    "Pair",
    "PrivKeyOf",
    "Signed",
    "Term",
    "Variable",
    "unify",
    "render",
    "Knowledge",
    "analyze",
    "derives",
    "instantiate",
    "ProtocolSpec",
    "validate",
    "expand",
    "parse",
    "parse_term",
    "print_spec",
    "ParseError",
    "SearchConfig",
    "Safe",
    "Attack",
    "Inconclusive",
    "check",
    "check_goals",
    "replay",
]

__version__ = "0.1.0"
