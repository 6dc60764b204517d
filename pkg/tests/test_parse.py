"""Parser behaviour: shapes, prefixes, precedence, and error offsets."""

from fractions import Fraction

import pytest

from propel.smcq import (
    And,
    Atom,
    BinOp,
    Call,
    Cmp,
    Ident,
    IdentifierPath,
    Imply,
    Neg,
    Not,
    NumLit,
    Or,
    ParseError,
    PathOp,
    Query,
    Segment,
    TimeBound,
    parse_query,
)


def atom(name: str) -> Atom:
    return Atom(IdentifierPath.parse(name))


def ident(name: str) -> Ident:
    return Ident(IdentifierPath.parse(name))


def num(text: str) -> NumLit:
    return NumLit(Fraction(text))


def test_parses_conjunction_with_comparison():
    q = parse_query("P[<=300](<> robot.at_charger && battery >= 20)")
    assert q.bound.upper == 300
    assert q.path_op is PathOp.EVENTUALLY
    assert q.prop == And((atom("robot.at_charger"), Cmp(">=", ident("battery"), num("20"))))


def test_accepts_pr_prefix_and_globally():
    q = parse_query("Pr[<=100]([] !(door.open))")
    assert q.path_op is PathOp.GLOBALLY
    assert q.bound.upper == 100
    assert q.prop == Not(atom("door.open"))


def test_empty_property_error_points_at_closing_paren():
    text = "P[<=10](<>)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.rindex(")")


def test_decimal_bound_is_exact_rational():
    q = parse_query("P[<=0.5](<> a)")
    assert q.bound.upper == Fraction(1, 2)


def test_bound_must_be_unsigned_number():
    with pytest.raises(ParseError) as exc:
        parse_query("P[<=-5](<> a)")
    assert exc.value.position == 4


def test_identifier_paths_with_indices():
    q = parse_query("P[<=5](<> arr[2].x.y[0] > 1)")
    expected = IdentifierPath((Segment("arr", 2), Segment("x"), Segment("y", 0)))
    assert q.prop == Cmp(">", Ident(expected), num("1"))


def test_fractional_index_rejected():
    text = "P[<=5](<> arr[1.5] > 1)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.index("1.5")


def test_imply_is_right_associative_and_loosest():
    q = parse_query("P[<=5](<> a && b imply c imply d)")
    assert q.prop == Imply(And((atom("a"), atom("b"))), Imply(atom("c"), atom("d")))


def test_parenthesized_imply_on_left():
    q = parse_query("P[<=5](<> (a imply b) imply c)")
    assert q.prop == Imply(Imply(atom("a"), atom("b")), atom("c"))


def test_and_binds_tighter_than_or():
    q = parse_query("P[<=5](<> a || b && c)")
    assert q.prop == Or((atom("a"), And((atom("b"), atom("c")))))


def test_chained_same_operator_is_flat():
    q = parse_query("P[<=5](<> a && b && c)")
    assert q.prop == And((atom("a"), atom("b"), atom("c")))


def test_explicit_grouping_preserves_nesting():
    q = parse_query("P[<=5](<> (a && b) && c)")
    assert q.prop == And((And((atom("a"), atom("b"))), atom("c")))


def test_not_applies_to_following_comparison():
    q = parse_query("P[<=5](<> !x < 3)")
    assert q.prop == Not(Cmp("<", ident("x"), num("3")))


def test_parenthesized_arithmetic_left_of_comparison():
    q = parse_query("P[<=5](<> (a + b) < 3)")
    assert q.prop == Cmp("<", BinOp("+", ident("a"), ident("b")), num("3"))


def test_parenthesized_identifier_left_of_comparison():
    q = parse_query("P[<=5](<> (a) < 3)")
    assert q.prop == Cmp("<", ident("a"), num("3"))


def test_arithmetic_precedence():
    q = parse_query("P[<=5](<> a + b * c - d / e < 3)")
    lhs = BinOp(
        "-",
        BinOp("+", ident("a"), BinOp("*", ident("b"), ident("c"))),
        BinOp("/", ident("d"), ident("e")),
    )
    assert q.prop == Cmp("<", lhs, num("3"))


def test_unary_minus_in_factor():
    q = parse_query("P[<=5](<> a - -2 < 3)")
    assert q.prop == Cmp("<", BinOp("-", ident("a"), Neg(num("2"))), num("3"))


def test_known_functions_and_arity():
    q = parse_query("P[<=5](<> sqrt(pow(a, 2)) + abs(b) + fabs(c) < 3)")
    lhs = BinOp(
        "+",
        BinOp("+", Call("sqrt", (Call("pow", (ident("a"), num("2"))),)), Call("abs", (ident("b"),))),
        Call("fabs", (ident("c"),)),
    )
    assert q.prop == Cmp("<", lhs, num("3"))


def test_unknown_function_rejected():
    text = "P[<=5](<> foo(1) < 2)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.index("foo")
    assert "unknown function" in exc.value.message


def test_sqrt_arity_enforced():
    text = "P[<=5](<> sqrt(1, 2) < 3)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.index(",")


def test_pow_arity_enforced():
    with pytest.raises(ParseError):
        parse_query("P[<=5](<> pow(2) < 3)")


def test_chained_comparison_rejected():
    text = "P[<=5](<> a < b < c)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.rindex("<")


def test_boolean_operand_in_arithmetic_rejected():
    with pytest.raises(ParseError):
        parse_query("P[<=5](<> (a && b) < 3)")


def test_trailing_input_rejected():
    text = "P[<=5](<> a) junk"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.index("junk")


def test_unexpected_character_position():
    text = "P[<=5](<> a ; b)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.index(";")


def test_imply_is_reserved():
    with pytest.raises(ParseError):
        parse_query("P[<=5](<> imply)")


def test_query_requires_p_or_pr():
    with pytest.raises(ParseError) as exc:
        parse_query("Q[<=5](<> a)")
    assert exc.value.position == 0


def test_missing_path_operator():
    text = "P[<=5](a)"
    with pytest.raises(ParseError) as exc:
        parse_query(text)
    assert exc.value.position == text.index("a")


def test_query_equality_is_structural():
    a = parse_query("P[<=50](<> x && y)")
    b = Query(
        TimeBound(Fraction(50)),
        PathOp.EVENTUALLY,
        And((atom("x"), atom("y"))),
    )
    assert a == b
