"""AST node types for bounded probabilistic reachability/invariance queries.

A query has the surface form ``P[<=B](<> prop)`` or ``P[<=B]([] prop)``:
a non-negative rational time bound, a path operator (eventually or
globally), and a boolean property over observable model state.

The expression layer is split in two: boolean properties (the body of a
query) and arithmetic terms (the operands of comparisons). All nodes are
immutable and hashable, so structural equality is plain ``==`` and
canonical forms can be compared or used as dict keys. ``sort_key`` defines
a deterministic total order over expressions; the canonicalizer uses it to
fix the child order of commutative connectives.

``SqDiff`` never comes out of the parser. It is produced only by the
canonicalizer as the order-insensitive form of a squared difference.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

FUNCTIONS = ("sqrt", "pow", "abs", "fabs")
CMP_OPS = ("<", "<=", "==", "!=", ">=", ">")
ADD_OPS = ("+", "-")
MUL_OPS = ("*", "/")

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class PathOp(Enum):
    EVENTUALLY = "<>"
    GLOBALLY = "[]"


@dataclass(frozen=True, slots=True)
class Segment:
    """One step of a dotted identifier path, optionally indexed."""

    name: str
    index: int | None = None

    def __str__(self) -> str:
        if self.index is None:
            return self.name
        return f"{self.name}[{self.index}]"


@dataclass(frozen=True, slots=True)
class IdentifierPath:
    """Dotted path into observable model state, e.g. ``arm.joint[2].angle``."""

    segments: tuple[Segment, ...]

    @classmethod
    def parse(cls, text: str) -> IdentifierPath:
        """Parse ``a[0].b`` style text; raises ValueError on malformed input."""
        segments = []
        for part in text.split("."):
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?", part)
            if m is None:
                raise ValueError(f"malformed identifier path segment: {part!r}")
            segments.append(Segment(m.group(1), int(m.group(2)) if m.group(2) else None))
        return cls(tuple(segments))

    def __str__(self) -> str:
        return ".".join(str(s) for s in self.segments)


def is_valid_name(name: str) -> bool:
    return _NAME_RE.match(name) is not None


class ArithExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class NumLit(ArithExpr):
    """Exact rational literal."""

    value: Fraction


@dataclass(frozen=True, slots=True)
class Ident(ArithExpr):
    path: IdentifierPath


@dataclass(frozen=True, slots=True)
class Neg(ArithExpr):
    child: ArithExpr


@dataclass(frozen=True, slots=True)
class BinOp(ArithExpr):
    op: str
    lhs: ArithExpr
    rhs: ArithExpr


@dataclass(frozen=True, slots=True)
class Call(ArithExpr):
    fn: str
    args: tuple[ArithExpr, ...]


@dataclass(frozen=True, slots=True)
class SqDiff(ArithExpr):
    """Canonical squared difference ``(a - b)^2`` with ordered operands."""

    a: ArithExpr
    b: ArithExpr


class BoolExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Atom(BoolExpr):
    """A bare boolean observable."""

    path: IdentifierPath


@dataclass(frozen=True, slots=True)
class Cmp(BoolExpr):
    op: str
    lhs: ArithExpr
    rhs: ArithExpr


@dataclass(frozen=True, slots=True)
class Not(BoolExpr):
    child: BoolExpr


@dataclass(frozen=True, slots=True)
class And(BoolExpr):
    children: tuple[BoolExpr, ...]


@dataclass(frozen=True, slots=True)
class Or(BoolExpr):
    children: tuple[BoolExpr, ...]


@dataclass(frozen=True, slots=True)
class Imply(BoolExpr):
    lhs: BoolExpr
    rhs: BoolExpr


@dataclass(frozen=True, slots=True)
class TimeBound:
    """Inclusive upper simulation-time bound; a non-negative rational."""

    upper: Fraction

    def __post_init__(self) -> None:
        if self.upper < 0:
            raise ValueError("time bound must be non-negative")


@dataclass(frozen=True, slots=True)
class Query:
    bound: TimeBound
    path_op: PathOp
    prop: BoolExpr


def _path_key(path: IdentifierPath) -> tuple:
    return tuple((s.name, -1 if s.index is None else s.index) for s in path.segments)


def sort_key(expr: BoolExpr | ArithExpr) -> tuple:
    """Deterministic total-order key: structural rank, then payload, then children.

    Identifier paths compare lexicographically, numeric literals by value.
    Two expressions have equal keys iff they are structurally equal.
    """
    if isinstance(expr, NumLit):
        return (0, expr.value)
    if isinstance(expr, Ident):
        return (1, _path_key(expr.path))
    if isinstance(expr, Neg):
        return (2, sort_key(expr.child))
    if isinstance(expr, BinOp):
        return (3, expr.op, sort_key(expr.lhs), sort_key(expr.rhs))
    if isinstance(expr, Call):
        return (4, expr.fn, tuple(sort_key(a) for a in expr.args))
    if isinstance(expr, SqDiff):
        return (5, sort_key(expr.a), sort_key(expr.b))
    if isinstance(expr, Atom):
        return (10, _path_key(expr.path))
    if isinstance(expr, Cmp):
        return (11, expr.op, sort_key(expr.lhs), sort_key(expr.rhs))
    if isinstance(expr, Not):
        return (12, sort_key(expr.child))
    if isinstance(expr, And):
        return (13, tuple(sort_key(c) for c in expr.children))
    if isinstance(expr, Or):
        return (14, tuple(sort_key(c) for c in expr.children))
    if isinstance(expr, Imply):
        return (15, sort_key(expr.lhs), sort_key(expr.rhs))
    raise TypeError(f"not an expression node: {expr!r}")


def iter_identifier_paths(node: BoolExpr | ArithExpr | Query):
    """Yield every identifier path in the expression, depth first, left to right."""
    if isinstance(node, Query):
        yield from iter_identifier_paths(node.prop)
    elif isinstance(node, (Atom, Ident)):
        yield node.path
    elif isinstance(node, Cmp):
        yield from iter_identifier_paths(node.lhs)
        yield from iter_identifier_paths(node.rhs)
    elif isinstance(node, Not):
        yield from iter_identifier_paths(node.child)
    elif isinstance(node, (And, Or)):
        for child in node.children:
            yield from iter_identifier_paths(child)
    elif isinstance(node, Imply):
        yield from iter_identifier_paths(node.lhs)
        yield from iter_identifier_paths(node.rhs)
    elif isinstance(node, Neg):
        yield from iter_identifier_paths(node.child)
    elif isinstance(node, BinOp):
        yield from iter_identifier_paths(node.lhs)
        yield from iter_identifier_paths(node.rhs)
    elif isinstance(node, Call):
        for arg in node.args:
            yield from iter_identifier_paths(arg)
    elif isinstance(node, SqDiff):
        yield from iter_identifier_paths(node.a)
        yield from iter_identifier_paths(node.b)
    elif isinstance(node, NumLit):
        return
    else:
        raise TypeError(f"not an expression node: {node!r}")
