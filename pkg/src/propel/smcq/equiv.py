"""Deterministic, LLM-free equivalence checking between two queries."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Iterable

from .canon import canonicalize
from .nodes import IdentifierPath, Query, iter_identifier_paths


class EquivOutcome(Enum):
    EQUIVALENT = "Equivalent"
    DISTINCT = "Distinct"
    UNKNOWN = "Unknown"


@dataclass(frozen=True, slots=True)
class EquivVerdict:
    outcome: EquivOutcome
    reason: str


@dataclass(frozen=True, slots=True)
class EquivConfig:
    """Tolerances for the deterministic check.

    ``time_tolerance`` is the allowed relative difference between the two
    time bounds, measured against the larger bound.
    """

    time_tolerance: float | Fraction = 0.25


def _as_fraction(value: float | Fraction | int) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(Decimal(str(value)))


def _bounds_within_tolerance(a: Fraction, b: Fraction, tolerance: Fraction) -> bool:
    return abs(a - b) <= tolerance * max(a, b)


def deterministic_equivalence(a: Query, b: Query, cfg: EquivConfig = EquivConfig()) -> EquivVerdict:
    """Decide equivalence without consulting a model, when possible.

    Distinct is returned only for a path-operator mismatch: confusing
    reachability with invariance is never excused. Equivalent requires
    structurally equal canonical properties and time bounds within the
    configured relative tolerance. Everything else is Unknown; the caller
    may escalate to a semantic judge.
    """
    if a.path_op != b.path_op:
        return EquivVerdict(EquivOutcome.DISTINCT, "path-operator mismatch")
    if canonicalize(a).prop != canonicalize(b).prop:
        return EquivVerdict(EquivOutcome.UNKNOWN, "canonical properties differ")
    ba, bb = a.bound.upper, b.bound.upper
    if not _bounds_within_tolerance(ba, bb, _as_fraction(cfg.time_tolerance)):
        return EquivVerdict(
            EquivOutcome.UNKNOWN,
            "canonical properties equal but time bounds differ beyond tolerance",
        )
    return EquivVerdict(
        EquivOutcome.EQUIVALENT,
        "canonical properties equal and time bounds within tolerance",
    )


def validate_identifiers(
    q: Query, observable: Iterable[IdentifierPath | str]
) -> list[IdentifierPath]:
    """Identifiers used by ``q`` but absent from the observable set.

    Returned in first-appearance order, without duplicates; empty means
    every identifier is observable.
    """
    known = {
        path if isinstance(path, IdentifierPath) else IdentifierPath.parse(path)
        for path in observable
    }
    missing: list[IdentifierPath] = []
    for path in iter_identifier_paths(q):
        if path not in known and path not in missing:
            missing.append(path)
    return missing
