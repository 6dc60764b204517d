"""Query language for bounded statistical model checking properties.

Parsing, rendering, canonicalization and deterministic equivalence for
queries of the form ``P[<=B](<> prop)`` / ``P[<=B]([] prop)``.
"""

from .canon import canonicalize, canonicalize_property
from .equiv import (
    EquivConfig,
    EquivOutcome,
    EquivVerdict,
    deterministic_equivalence,
    validate_identifiers,
)
from .nodes import (
    And,
    ArithExpr,
    Atom,
    BinOp,
    BoolExpr,
    Call,
    Cmp,
    FUNCTIONS,
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
    SqDiff,
    TimeBound,
    iter_identifier_paths,
    sort_key,
)
from .parse import ParseError, normalize_text, parse_property, parse_query
from .render import format_number, render_property, render_query

__all__ = [
    "And",
    "ArithExpr",
    "Atom",
    "BinOp",
    "BoolExpr",
    "Call",
    "Cmp",
    "EquivConfig",
    "EquivOutcome",
    "EquivVerdict",
    "FUNCTIONS",
    "Ident",
    "IdentifierPath",
    "Imply",
    "Neg",
    "Not",
    "NumLit",
    "Or",
    "ParseError",
    "PathOp",
    "Query",
    "Segment",
    "SqDiff",
    "TimeBound",
    "canonicalize",
    "canonicalize_property",
    "deterministic_equivalence",
    "format_number",
    "iter_identifier_paths",
    "normalize_text",
    "parse_property",
    "parse_query",
    "render_property",
    "render_query",
    "sort_key",
    "validate_identifiers",
]
