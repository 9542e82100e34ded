from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rashomon_mdp.mdp import FeatureSchema
from rashomon_mdp.proplang import (
    And,
    Atom,
    Not,
    Or,
    PredicateBindError,
    PropertySyntaxError,
    bind_predicate,
    format_predicate,
    format_property,
    parse_predicate,
    parse_property,
)

SCHEMA = FeatureSchema(names=("x", "y", "fuel"), bounds=((0, 3), (0, 3), (0, 9)))


def _eval_naive(node, env):
    """Reference evaluator over a dict, independent of the compiled path."""
    if isinstance(node, Atom):
        v = env[node.feature]
        return {
            "=": v == node.value,
            "!=": v != node.value,
            "<": v < node.value,
            "<=": v <= node.value,
            ">": v > node.value,
            ">=": v >= node.value,
        }[node.op]
    if isinstance(node, Not):
        return not _eval_naive(node.operand, env)
    if isinstance(node, And):
        return _eval_naive(node.left, env) and _eval_naive(node.right, env)
    return _eval_naive(node.left, env) or _eval_naive(node.right, env)


class TestParsing:
    def test_single_atom(self):
        assert parse_predicate("fuel >= 3") == Atom("fuel", ">=", 3)
        assert parse_predicate("x=0") == Atom("x", "=", 0)

    def test_every_comparison(self):
        for op in ("=", "!=", "<", "<=", ">", ">="):
            assert parse_predicate(f"x {op} 2") == Atom("x", op, 2)

    def test_precedence_not_before_and_before_or(self):
        got = parse_predicate("x=1 | y=2 & !fuel<3")
        expect = Or(Atom("x", "=", 1), And(Atom("y", "=", 2), Not(Atom("fuel", "<", 3))))
        assert got == expect

    def test_parentheses_override(self):
        got = parse_predicate("(x=1 | y=2) & fuel<3")
        expect = And(Or(Atom("x", "=", 1), Atom("y", "=", 2)), Atom("fuel", "<", 3))
        assert got == expect

    def test_negative_literals(self):
        assert parse_predicate("x = -2") == Atom("x", "=", -2)

    def test_quantitative_property(self):
        q = parse_property("P=? [ F jobs_done=5 & done=1 ]")
        assert q.mode == "quantitative"
        assert q.predicate == And(Atom("jobs_done", "=", 5), Atom("done", "=", 1))

    def test_threshold_property(self):
        q = parse_property("P>=0.75 [ F done=1 ]")
        assert q.mode == "threshold"
        assert q.op == ">="
        assert q.bound == 0.75


class TestSyntaxErrors:
    @pytest.mark.parametrize(
        "text",
        [
            "",
            "x =",
            "x = y",
            "x ~ 1",
            "(x=1",
            "x=1 &",
            "x=1 y=2",
            "! ",
        ],
    )
    def test_bad_predicates_raise_with_position(self, text):
        with pytest.raises(PropertySyntaxError) as info:
            parse_predicate(text)
        assert info.value.position >= 0

    @pytest.mark.parametrize(
        "text",
        [
            "P=? [ G done=1 ]",
            "P=? [ F done=1",
            "P=0.5 [ F done=1 ]",
            "P>> [ F done=1 ]",
            "Q=? [ F done=1 ]",
            "P=? [ F done=1 ] trailing",
        ],
    )
    def test_bad_properties(self, text):
        with pytest.raises(PropertySyntaxError):
            parse_property(text)


class TestFormatting:
    @pytest.mark.parametrize(
        "text",
        [
            "x=1",
            "x!=2 & y<3",
            "x=1 | y=2 & fuel<3",
            "(x=1 | y=2) & fuel<3",
            "!(x=1 & y=2) | fuel>=4",
            "!!x=1",
        ],
    )
    def test_parse_format_fixed_point(self, text):
        canonical = format_predicate(parse_predicate(text))
        assert format_predicate(parse_predicate(canonical)) == canonical
        assert parse_predicate(canonical) == parse_predicate(text)

    def test_property_fixed_point(self):
        for text in ("P=? [ F x=1 ]", "P<0.2 [ F x=1 | y=2 ]"):
            q = parse_property(text)
            assert parse_property(format_property(q)) == q


def _atoms():
    return st.builds(
        Atom,
        st.sampled_from(SCHEMA.names),
        st.sampled_from(("=", "!=", "<", "<=", ">", ">=")),
        st.integers(min_value=-5, max_value=12),
    )


def _predicates():
    return st.recursive(
        _atoms(),
        lambda kids: st.one_of(
            st.builds(Not, kids),
            st.builds(And, kids, kids),
            st.builds(Or, kids, kids),
        ),
        max_leaves=12,
    )


@given(_predicates())
@settings(max_examples=200, deadline=None)
def test_format_parse_identity_on_random_asts(pred):
    assert parse_predicate(format_predicate(pred)) == pred


@given(
    _predicates(),
    st.tuples(
        st.integers(min_value=0, max_value=3),
        st.integers(min_value=0, max_value=3),
        st.integers(min_value=0, max_value=9),
    ),
)
@settings(max_examples=200, deadline=None)
def test_bound_predicate_matches_naive_eval(pred, fv):
    bound = bind_predicate(pred, SCHEMA)
    env = dict(zip(SCHEMA.names, fv))
    assert bound.evaluate(fv) == _eval_naive(pred, env)


class TestBinding:
    def test_unknown_feature(self):
        with pytest.raises(PredicateBindError, match="nope"):
            bind_predicate(Atom("nope", "=", 1), SCHEMA)

    def test_mask_agrees_with_scalar_eval(self):
        pred = parse_predicate("x=1 | y>2 & !fuel<5")
        bound = bind_predicate(pred, SCHEMA)
        rng = np.random.default_rng(0)
        feats = np.column_stack(
            [
                rng.integers(0, 4, size=64),
                rng.integers(0, 4, size=64),
                rng.integers(0, 10, size=64),
            ]
        ).astype(np.int64)
        mask = bound.mask(feats)
        assert mask.dtype == bool and mask.shape == (64,)
        for row, bit in zip(feats, mask):
            assert bound.evaluate(tuple(int(v) for v in row)) == bool(bit)
