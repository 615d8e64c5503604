from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdae.errors import ExpressionError
from tsdae.expressions import (
    BinOp,
    Literal,
    Neg,
    Pow,
    Var,
    parse_expression,
    render,
)


def test_reciprocal_entry():
    assert parse_expression("1/(2*t)").evaluate(4.0) == 0.125


def test_square_entry():
    assert parse_expression("t^2").evaluate(3.0) == 9


def test_negated_parenthesized_literal():
    assert parse_expression("-(1)").evaluate(17.0) == -1


def test_power_binds_tighter_than_unary_minus():
    assert parse_expression("-t^2") == Neg(Pow(Var(), 2))
    assert parse_expression("-t^2").evaluate(3.0) == -9


def test_left_associativity():
    assert parse_expression("8-3-2").evaluate(0.0) == 3
    assert parse_expression("8/4/2").evaluate(0.0) == 1


def test_precedence():
    assert parse_expression("1+2*3").evaluate(0.0) == 7
    assert parse_expression("2*t^2").evaluate(3.0) == 18


def test_decimal_literals():
    assert parse_expression("0.25*t").evaluate(8.0) == 2.0


def test_rational_evaluation_is_exact():
    node = parse_expression("1/(2*t) + t^2")
    value = node.evaluate(Fraction(8))
    assert value == Fraction(1, 16) + 64
    assert isinstance(value, Fraction)


def test_division_by_zero():
    with pytest.raises(ExpressionError):
        parse_expression("1/t").evaluate(0.0)


def test_syntax_error_carries_position():
    with pytest.raises(ExpressionError) as err:
        parse_expression("1 + ")
    assert err.value.position is not None


@pytest.mark.parametrize("bad", ["t^t", "t^(2)", "t^-2", "t^2.5"])
def test_non_integer_exponent_rejected(bad):
    with pytest.raises(ExpressionError):
        parse_expression(bad)


@pytest.mark.parametrize("bad", ["", "()", "1+*2", "x", "(1", "1)"])
def test_malformed_inputs_rejected(bad):
    with pytest.raises(ExpressionError):
        parse_expression(bad)


def literal_strategy():
    ints = st.integers(0, 999).map(lambda v: Literal(Fraction(v)))
    decimals = st.tuples(st.integers(0, 99), st.integers(1, 99)).map(
        lambda p: Literal(Fraction(p[0] * 100 + p[1], 100)))
    return st.one_of(ints, decimals)


def node_strategy():
    return st.recursive(
        st.one_of(literal_strategy(), st.just(Var())),
        lambda children: st.one_of(
            st.tuples(st.sampled_from("+-*/"), children, children)
            .map(lambda p: BinOp(*p)),
            children.map(Neg),
            st.tuples(children, st.integers(0, 3)).map(lambda p: Pow(*p)),
        ),
        max_leaves=12,
    )


@settings(max_examples=150, deadline=None)
@given(node_strategy())
def test_render_parse_round_trip(node):
    assert parse_expression(render(node)) == node


def reference_eval(text, t):
    """Independent evaluation: hand the rendered text to Python itself."""
    return eval(text.replace("^", "**"), {"__builtins__": {}}, {"t": t})


@settings(max_examples=100, deadline=None)
@given(node_strategy(), st.floats(0.5, 9.5))
def test_matches_reference_evaluation(node, t):
    text = render(node)
    try:
        expected = reference_eval(text, t)
    except ZeroDivisionError:
        with pytest.raises(ExpressionError):
            parse_expression(text).evaluate(t)
        return
    got = parse_expression(text).evaluate(t)
    assert got == pytest.approx(expected, rel=1e-14, abs=1e-14)
