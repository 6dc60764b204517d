"""Order- and syntax-insensitive canonical form for query properties.

The canonicalizer applies, to a fixpoint:

1. implication elimination: ``a imply b`` becomes ``!a || b``
2. double-negation elimination
3. flattening of nested conjunctions and disjunctions
4. sorting of and/or children by the deterministic total order
5. comparison normalization: ``a > b`` becomes ``b < a``, ``a >= b``
   becomes ``b <= a``; equality and inequality operands are ordered
6. squared-difference folding: ``pow(a - b, 2)`` and
   ``(a - b) * (a - b)`` become an ordered ``SqDiff``
7. constant folding of pure-numeric subterms where the result stays an
   exact rational

Nothing else is rewritten; in particular there is no rewriting across
square roots or comparisons, and no arithmetic reassociation. Rewrites
that would need side conditions on signs are deliberately out of scope:
two properties whose canonical forms differ are not known to be distinct.
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
    sort_key,
)

_MAX_PASSES = 50


def canonicalize(q: Query) -> Query:
    """Canonical form of a query; the bound and path operator are kept."""
    return Query(q.bound, q.path_op, canonicalize_property(q.prop))


def canonicalize_property(prop: BoolExpr) -> BoolExpr:
    for _ in range(_MAX_PASSES):
        step = _bool(prop)
        if step == prop:
            return prop
        prop = step
    raise RuntimeError("canonicalization did not reach a fixpoint")


def _mk_not(child: BoolExpr) -> BoolExpr:
    if isinstance(child, Not):
        return child.child
    return Not(child)


def _flatten(cls, children) -> tuple[BoolExpr, ...]:
    flat: list[BoolExpr] = []
    for child in children:
        if isinstance(child, cls):
            flat.extend(child.children)
        else:
            flat.append(child)
    flat.sort(key=sort_key)
    return tuple(flat)


def _bool(e: BoolExpr) -> BoolExpr:
    if isinstance(e, Atom):
        return e
    if isinstance(e, Not):
        return _mk_not(_bool(e.child))
    if isinstance(e, Imply):
        return Or(_flatten(Or, (_mk_not(_bool(e.lhs)), _bool(e.rhs))))
    if isinstance(e, And):
        return And(_flatten(And, (_bool(c) for c in e.children)))
    if isinstance(e, Or):
        return Or(_flatten(Or, (_bool(c) for c in e.children)))
    if isinstance(e, Cmp):
        lhs = _arith(e.lhs)
        rhs = _arith(e.rhs)
        if e.op == ">":
            return Cmp("<", rhs, lhs)
        if e.op == ">=":
            return Cmp("<=", rhs, lhs)
        if e.op in ("==", "!=") and sort_key(rhs) < sort_key(lhs):
            return Cmp(e.op, rhs, lhs)
        return Cmp(e.op, lhs, rhs)
    raise TypeError(f"not a boolean node: {e!r}")


def _ordered_sqdiff(a: ArithExpr, b: ArithExpr) -> SqDiff:
    if sort_key(b) < sort_key(a):
        a, b = b, a
    return SqDiff(a, b)


def _fold_binop(op: str, a: Fraction, b: Fraction) -> Fraction | None:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        return None
    return a / b


def _sqrt_exact(value: Fraction) -> Fraction | None:
    from math import isqrt

    if value < 0:
        return None
    num, den = isqrt(value.numerator), isqrt(value.denominator)
    root = Fraction(num, den)
    return root if root * root == value else None


def _fold_call(fn: str, args: tuple[ArithExpr, ...]) -> ArithExpr | None:
    if not all(isinstance(a, NumLit) for a in args):
        return None
    values = [a.value for a in args]  # type: ignore[union-attr]
    if fn in ("abs", "fabs"):
        return NumLit(abs(values[0]))
    if fn == "sqrt":
        root = _sqrt_exact(values[0])
        return NumLit(root) if root is not None else None
    base, exp = values
    # Only fold exact small integer powers; huge exponents would blow the
    # literal up to absurd size for no analytical gain.
    if exp.denominator != 1 or abs(exp) > 64 or (base == 0 and exp < 0):
        return None
    return NumLit(base ** int(exp))


def _arith(e: ArithExpr) -> ArithExpr:
    if isinstance(e, (NumLit, Ident)):
        return e
    if isinstance(e, Neg):
        child = _arith(e.child)
        if isinstance(child, NumLit):
            return NumLit(-child.value)
        return Neg(child)
    if isinstance(e, BinOp):
        lhs = _arith(e.lhs)
        rhs = _arith(e.rhs)
        if isinstance(lhs, NumLit) and isinstance(rhs, NumLit):
            folded = _fold_binop(e.op, lhs.value, rhs.value)
            if folded is not None:
                return NumLit(folded)
        if e.op == "*" and lhs == rhs and isinstance(lhs, BinOp) and lhs.op == "-":
            return _ordered_sqdiff(lhs.lhs, lhs.rhs)
        return BinOp(e.op, lhs, rhs)
    if isinstance(e, Call):
        args = tuple(_arith(a) for a in e.args)
        if (
            e.fn == "pow"
            and isinstance(args[0], BinOp)
            and args[0].op == "-"
            and args[1] == NumLit(Fraction(2))
        ):
            return _ordered_sqdiff(args[0].lhs, args[0].rhs)
        folded = _fold_call(e.fn, args)
        return folded if folded is not None else Call(e.fn, args)
    if isinstance(e, SqDiff):
        a = _arith(e.a)
        b = _arith(e.b)
        if isinstance(a, NumLit) and isinstance(b, NumLit):
            return NumLit((a.value - b.value) ** 2)
        return _ordered_sqdiff(a, b)
    raise TypeError(f"not an arithmetic node: {e!r}")
