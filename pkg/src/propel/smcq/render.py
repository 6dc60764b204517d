"""Rendering of query ASTs back to surface syntax.

Emits the "P" prefix, single spaces around binary operators, and only the
parentheses required by precedence, so ``parse_query(render_query(q))``
reproduces ``q`` for any parser-produced AST. Canonical-only forms map to
equivalent surface syntax: ``SqDiff(a, b)`` renders as ``pow(a - b, 2)``,
negative literals as a unary minus, and a literal with no finite decimal
expansion as a division of integers.
"""

from __future__ import annotations

from fractions import Fraction

from .nodes import (
    And,
    ArithExpr,
    Atom,
    BinOp,
    BoolExpr,
    Call,
    Cmp,
    Ident,
    Imply,
    Neg,
    Not,
    NumLit,
    Or,
    Query,
    SqDiff,
)

_P_IMPLY, _P_OR, _P_AND, _P_NOT, _P_CMP, _P_BATOM = 1, 2, 3, 4, 5, 6
_P_ADD, _P_MUL, _P_NEG, _P_PRIMARY = 1, 2, 3, 4


def format_number(value: Fraction) -> str:
    """Shortest exact decimal form; falls back to ``num/den`` when the
    denominator has prime factors other than 2 and 5."""
    if value < 0:
        return "-" + format_number(-value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    scale = max(twos, fives)
    if scale == 0:
        return str(value.numerator)
    digits = str(value.numerator * 10**scale // value.denominator).rjust(scale + 1, "0")
    whole, frac = digits[:-scale], digits[-scale:].rstrip("0")
    return f"{whole}.{frac}" if frac else whole


def _arith(e: ArithExpr) -> tuple[str, int]:
    if isinstance(e, NumLit):
        text = format_number(e.value)
        return text, _P_NEG if text.startswith("-") else _P_PRIMARY
    if isinstance(e, Ident):
        return str(e.path), _P_PRIMARY
    if isinstance(e, Neg):
        child, prec = _arith(e.child)
        if prec < _P_NEG:
            child = f"({child})"
        return f"-{child}", _P_NEG
    if isinstance(e, BinOp):
        own = _P_ADD if e.op in ("+", "-") else _P_MUL
        lhs, lp = _arith(e.lhs)
        rhs, rp = _arith(e.rhs)
        if lp < own:
            lhs = f"({lhs})"
        if rp <= own:
            rhs = f"({rhs})"
        return f"{lhs} {e.op} {rhs}", own
    if isinstance(e, Call):
        args = ", ".join(_arith(a)[0] for a in e.args)
        return f"{e.fn}({args})", _P_PRIMARY
    if isinstance(e, SqDiff):
        return _arith(Call("pow", (BinOp("-", e.a, e.b), NumLit(Fraction(2)))))
    raise TypeError(f"not an arithmetic node: {e!r}")


def _bool(e: BoolExpr) -> tuple[str, int]:
    if isinstance(e, Atom):
        return str(e.path), _P_BATOM
    if isinstance(e, Cmp):
        return f"{_arith(e.lhs)[0]} {e.op} {_arith(e.rhs)[0]}", _P_CMP
    if isinstance(e, Not):
        child, prec = _bool(e.child)
        if prec < _P_NOT:
            child = f"({child})"
        return f"!{child}", _P_NOT
    if isinstance(e, And):
        parts = []
        for c in e.children:
            text, prec = _bool(c)
            parts.append(f"({text})" if prec <= _P_AND else text)
        return " && ".join(parts), _P_AND
    if isinstance(e, Or):
        parts = []
        for c in e.children:
            text, prec = _bool(c)
            parts.append(f"({text})" if prec <= _P_OR else text)
        return " || ".join(parts), _P_OR
    if isinstance(e, Imply):
        lhs, lp = _bool(e.lhs)
        if lp <= _P_IMPLY:
            lhs = f"({lhs})"
        rhs, _ = _bool(e.rhs)
        return f"{lhs} imply {rhs}", _P_IMPLY
    raise TypeError(f"not a boolean node: {e!r}")


def render_property(e: BoolExpr) -> str:
    return _bool(e)[0]


def render_query(q: Query) -> str:
    bound = format_number(q.bound.upper)
    return f"P[<={bound}]({q.path_op.value} {render_property(q.prop)})"
