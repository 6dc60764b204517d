"""Independent test oracles: truth-table evaluation and random ASTs.

The evaluator here interprets boolean connectives directly against an
assignment and deliberately shares no code with the canonicalizer it is
used to check.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

from propel.smcq import (
    And,
    Atom,
    BinOp,
    BoolExpr,
    Call,
    Cmp,
    Ident,
    IdentifierPath,
    Imply,
    Neg,
    Not,
    NumLit,
    Or,
    PathOp,
    Query,
    Segment,
    TimeBound,
)

ATOM_NAMES = ("a", "b", "c", "d", "e", "f", "g", "h")


def atom_names(expr: BoolExpr) -> set[str]:
    if isinstance(expr, Atom):
        return {str(expr.path)}
    if isinstance(expr, Not):
        return atom_names(expr.child)
    if isinstance(expr, (And, Or)):
        names: set[str] = set()
        for child in expr.children:
            names |= atom_names(child)
        return names
    if isinstance(expr, Imply):
        return atom_names(expr.lhs) | atom_names(expr.rhs)
    raise TypeError(f"arithmetic-free oracle cannot handle {expr!r}")


def evaluate(expr: BoolExpr, assignment: dict[str, bool]) -> bool:
    if isinstance(expr, Atom):
        return assignment[str(expr.path)]
    if isinstance(expr, Not):
        return not evaluate(expr.child, assignment)
    if isinstance(expr, And):
        return all(evaluate(c, assignment) for c in expr.children)
    if isinstance(expr, Or):
        return any(evaluate(c, assignment) for c in expr.children)
    if isinstance(expr, Imply):
        return (not evaluate(expr.lhs, assignment)) or evaluate(expr.rhs, assignment)
    raise TypeError(f"arithmetic-free oracle cannot handle {expr!r}")


def truth_table(expr: BoolExpr, names: list[str]) -> tuple[bool, ...]:
    rows = []
    for values in product((False, True), repeat=len(names)):
        rows.append(evaluate(expr, dict(zip(names, values))))
    return tuple(rows)


def _ident(rng: random.Random) -> IdentifierPath:
    segments = [Segment(rng.choice(ATOM_NAMES), rng.choice((None, None, 0, 1, 2)))]
    if rng.random() < 0.4:
        segments.append(Segment(rng.choice(("x", "y", "pos", "state")), None))
    return IdentifierPath(tuple(segments))


def random_numlit(rng: random.Random) -> NumLit:
    # Finite decimal literals only; that is all the grammar can produce.
    return NumLit(Fraction(rng.randrange(0, 10_000), rng.choice((1, 1, 1, 10, 100))))


def random_arith(rng: random.Random, depth: int):
    if depth <= 0:
        return rng.choice((random_numlit(rng), Ident(_ident(rng))))
    pick = rng.random()
    if pick < 0.25:
        return random_numlit(rng)
    if pick < 0.45:
        return Ident(_ident(rng))
    if pick < 0.55:
        return Neg(random_arith(rng, depth - 1))
    if pick < 0.80:
        op = rng.choice(("+", "-", "*", "/"))
        return BinOp(op, random_arith(rng, depth - 1), random_arith(rng, depth - 1))
    fn = rng.choice(("sqrt", "abs", "fabs", "pow"))
    if fn == "pow":
        args = (random_arith(rng, depth - 1), random_arith(rng, depth - 1))
    else:
        args = (random_arith(rng, depth - 1),)
    return Call(fn, args)


def random_bool(
    rng: random.Random,
    depth: int,
    arithmetic: bool = True,
    pool: tuple[str, ...] = ATOM_NAMES,
) -> BoolExpr:
    def leaf_atom() -> Atom:
        return Atom(IdentifierPath((Segment(rng.choice(pool)),)))

    if depth <= 0:
        if arithmetic and rng.random() < 0.3:
            op = rng.choice(("<", "<=", "==", "!=", ">=", ">"))
            return Cmp(op, random_arith(rng, 0), random_arith(rng, 0))
        return leaf_atom()
    pick = rng.random()
    if pick < 0.2:
        return leaf_atom()
    if pick < 0.35:
        return Not(random_bool(rng, depth - 1, arithmetic, pool))
    if pick < 0.55:
        children = tuple(
            random_bool(rng, depth - 1, arithmetic, pool) for _ in range(rng.randint(2, 3))
        )
        return And(children)
    if pick < 0.75:
        children = tuple(
            random_bool(rng, depth - 1, arithmetic, pool) for _ in range(rng.randint(2, 3))
        )
        return Or(children)
    if pick < 0.85 or not arithmetic:
        return Imply(
            random_bool(rng, depth - 1, arithmetic, pool),
            random_bool(rng, depth - 1, arithmetic, pool),
        )
    op = rng.choice(("<", "<=", "==", "!=", ">=", ">"))
    return Cmp(op, random_arith(rng, min(depth - 1, 3)), random_arith(rng, min(depth - 1, 3)))


def random_query(rng: random.Random, depth: int = 6) -> Query:
    bound = Fraction(rng.randrange(0, 5000), rng.choice((1, 1, 10, 100)))
    path_op = rng.choice((PathOp.EVENTUALLY, PathOp.GLOBALLY))
    return Query(TimeBound(bound), path_op, random_bool(rng, rng.randint(1, depth)))


def scramble(rng: random.Random, expr: BoolExpr) -> BoolExpr:
    """An equivalent-by-construction variant: shuffles commutative children,
    rewrites implications, and sprinkles double negations."""
    if isinstance(expr, Atom):
        out: BoolExpr = expr
    elif isinstance(expr, Not):
        out = Not(scramble(rng, expr.child))
    elif isinstance(expr, (And, Or)):
        children = [scramble(rng, c) for c in expr.children]
        rng.shuffle(children)
        out = type(expr)(tuple(children))
    elif isinstance(expr, Imply):
        lhs = scramble(rng, expr.lhs)
        rhs = scramble(rng, expr.rhs)
        if rng.random() < 0.5:
            out = Or((Not(lhs), rhs))
        else:
            out = Imply(lhs, rhs)
    else:
        raise TypeError(f"arithmetic-free oracle cannot handle {expr!r}")
    if rng.random() < 0.2:
        out = Not(Not(out))
    return out
