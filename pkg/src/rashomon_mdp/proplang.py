"""Reachability property language over feature predicates.

Supported queries ask for the probability of eventually reaching a set
of states described by a boolean predicate over integer features:

    P=? [ F jobs_done=5 & done=1 ]
    P>=0.9 [ F (x=3 | y=0) & !on_board=1 ]

Predicates combine atoms `feature cmp integer` (cmp one of = != < <= >
>=) with `&`, `|`, `!` and parentheses; `!` binds tightest, then `&`,
then `|`.  Whitespace is insignificant.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from rashomon_mdp.mdp import FeatureSchema, StateVector


class PropertySyntaxError(ValueError):
    """Raised on malformed property or predicate text; carries `position`."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PredicateBindError(KeyError):
    """Raised when a predicate names a feature the schema does not have."""


@dataclass(frozen=True)
class Atom:
    feature: str
    op: str
    value: int

    def __post_init__(self) -> None:
        if self.op not in _CMP_FUNCS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


Predicate = Union[Atom, Not, And, Or]

_CMP_FUNCS: dict[str, Callable] = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

THRESHOLD_OPS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class PropertyQuery:
    """Parsed `P=? [ F pred ]` (mode "quantitative") or `P cmp p [ F pred ]`
    (mode "threshold" with `op` and `bound` set)."""

    mode: str
    predicate: Predicate
    op: str = ""
    bound: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("quantitative", "threshold"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "threshold":
            if self.op not in THRESHOLD_OPS:
                raise ValueError(f"bad threshold comparison {self.op!r}")
            if not (0.0 <= self.bound <= 1.0):
                raise ValueError(f"threshold {self.bound!r} outside [0, 1]")


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\.\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|!=|=\?|[=<>()\[\]&|!-]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise PropertySyntaxError(f"unexpected character {text[at]!r}", at)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return ("eof", "", len(self.text))

    def advance(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != "eof":
            self.pos += 1
        return tok

    def expect(self, value: str, what: str) -> None:
        kind, val, at = self.advance()
        if val != value:
            got = repr(val) if kind != "eof" else "end of input"
            raise PropertySyntaxError(f"expected {what}, got {got}", at)

    def fail(self, message: str) -> None:
        _, _, at = self.peek()
        raise PropertySyntaxError(message, at)

    def parse_predicate(self) -> Predicate:
        node = self.parse_and()
        while self.peek()[1] == "|":
            self.advance()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Predicate:
        node = self.parse_unary()
        while self.peek()[1] == "&":
            self.advance()
            node = And(node, self.parse_unary())
        return node

    def parse_unary(self) -> Predicate:
        kind, val, at = self.peek()
        if val == "!":
            self.advance()
            return Not(self.parse_unary())
        if val == "(":
            self.advance()
            node = self.parse_predicate()
            self.expect(")", "')'")
            return node
        if kind == "name":
            return self.parse_atom()
        got = repr(val) if kind != "eof" else "end of input"
        raise PropertySyntaxError(f"expected a predicate, got {got}", at)

    def parse_atom(self) -> Atom:
        _, name, _ = self.advance()
        kind, op, at = self.advance()
        if op not in _CMP_FUNCS:
            got = repr(op) if kind != "eof" else "end of input"
            raise PropertySyntaxError(f"expected a comparison after {name!r}, got {got}", at)
        sign = 1
        if self.peek()[1] == "-":
            self.advance()
            sign = -1
        kind, num, at = self.advance()
        if kind != "num" or "." in num:
            got = repr(num) if kind != "eof" else "end of input"
            raise PropertySyntaxError(f"expected an integer, got {got}", at)
        return Atom(name, op, sign * int(num))

    def parse_property(self) -> PropertyQuery:
        kind, val, at = self.advance()
        if val != "P":
            got = repr(val) if kind != "eof" else "end of input"
            raise PropertySyntaxError(f"expected 'P', got {got}", at)
        kind, val, at = self.advance()
        if val == "=?":
            mode, op, bound = "quantitative", "", 0.0
        elif val in THRESHOLD_OPS:
            op = val
            kind, num, nat = self.advance()
            if kind != "num":
                got = repr(num) if kind != "eof" else "end of input"
                raise PropertySyntaxError(f"expected a probability bound, got {got}", nat)
            bound = float(num)
            if not (0.0 <= bound <= 1.0):
                raise PropertySyntaxError(f"bound {num} outside [0, 1]", nat)
            mode = "threshold"
        else:
            got = repr(val) if kind != "eof" else "end of input"
            raise PropertySyntaxError(f"expected '=?' or a threshold, got {got}", at)
        self.expect("[", "'['")
        kind, val, at = self.advance()
        if val != "F":
            got = repr(val) if kind != "eof" else "end of input"
            raise PropertySyntaxError(f"expected the eventually operator 'F', got {got}", at)
        pred = self.parse_predicate()
        self.expect("]", "']'")
        return PropertyQuery(mode=mode, predicate=pred, op=op, bound=bound)

    def check_done(self) -> None:
        kind, val, at = self.peek()
        if kind != "eof":
            raise PropertySyntaxError(f"trailing input {val!r}", at)


def parse_predicate(text: str) -> Predicate:
    parser = _Parser(text)
    node = parser.parse_predicate()
    parser.check_done()
    return node


def parse_property(text: str) -> PropertyQuery:
    parser = _Parser(text)
    query = parser.parse_property()
    parser.check_done()
    return query


def _prec(node: Predicate) -> int:
    if isinstance(node, Or):
        return 1
    if isinstance(node, And):
        return 2
    if isinstance(node, Not):
        return 3
    return 4


def format_predicate(node: Predicate) -> str:
    """Canonical text; `parse_predicate(format_predicate(p)) == p`."""

    def fmt(n: Predicate, min_prec: int) -> str:
        if isinstance(n, Atom):
            return f"{n.feature}{n.op}{n.value}"
        if isinstance(n, Not):
            return "!" + fmt(n.operand, 4)
        op, prec = ("&", 2) if isinstance(n, And) else ("|", 1)
        text = f"{fmt(n.left, prec)} {op} {fmt(n.right, prec + 1)}"
        if prec < min_prec:
            return f"({text})"
        return text

    return fmt(node, 0)


def format_property(query: PropertyQuery) -> str:
    """Canonical text; `parse_property(format_property(q)) == q`."""
    pred = format_predicate(query.predicate)
    if query.mode == "quantitative":
        return f"P=? [ F {pred} ]"
    return f"P{query.op}{query.bound!r} [ F {pred} ]"


@dataclass(frozen=True)
class BoundPredicate:
    """A predicate with feature names resolved to schema indices."""

    predicate: Predicate
    schema: FeatureSchema

    def evaluate(self, state: StateVector) -> bool:
        if len(state) != self.schema.dim:
            raise ValueError(
                f"state has {len(state)} features, schema has {self.schema.dim}"
            )
        return bool(self._fn(np.asarray(state, dtype=np.int64)))

    def mask(self, states: np.ndarray) -> np.ndarray:
        """Boolean mask over a (n, dim) matrix of states."""
        states = np.asarray(states, dtype=np.int64)
        if states.ndim != 2 or states.shape[1] != self.schema.dim:
            raise ValueError(f"expected an (n, {self.schema.dim}) state matrix")
        return self._fn(states.T)

    @property
    def _fn(self) -> Callable:
        return object.__getattribute__(self, "_compiled")


def bind_predicate(predicate: Predicate, schema: FeatureSchema) -> BoundPredicate:
    """Resolve feature names; unknown names raise :class:`PredicateBindError`."""

    def compile_node(node: Predicate) -> Callable:
        if isinstance(node, Atom):
            try:
                idx = schema.index_of(node.feature)
            except KeyError:
                raise PredicateBindError(
                    f"predicate references unknown feature {node.feature!r}"
                ) from None
            fn = _CMP_FUNCS[node.op]
            value = node.value
            return lambda cols: fn(cols[idx], value)
        if isinstance(node, Not):
            inner = compile_node(node.operand)
            return lambda cols: np.logical_not(inner(cols))
        if isinstance(node, And):
            left, right = compile_node(node.left), compile_node(node.right)
            return lambda cols: left(cols) & right(cols)
        left, right = compile_node(node.left), compile_node(node.right)
        return lambda cols: left(cols) | right(cols)

    bound = BoundPredicate(predicate=predicate, schema=schema)
    object.__setattr__(bound, "_compiled", compile_node(predicate))
    return bound
