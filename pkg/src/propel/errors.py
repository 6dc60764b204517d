"""Shared error types, grouped by the exit code the CLI maps them to."""

from __future__ import annotations


class PropelError(Exception):
    """Base class for all errors raised by this package."""


# -- exit code 2: input validation -------------------------------------


class CorpusError(PropelError):
    pass


class MissingFile(CorpusError):
    pass


class DanglingReference(CorpusError):
    pass


class QueryParseError(CorpusError):
    """A ground-truth query failed to parse; records where it lives."""

    def __init__(self, scenario_id: str, query_id: str, detail: str):
        super().__init__(f"{scenario_id}/{query_id}: {detail}")
        self.scenario_id = scenario_id
        self.query_id = query_id


# -- exit code 3: gateway / provider ------------------------------------


class GatewayError(PropelError):
    pass


class ProviderError(GatewayError):
    def __init__(self, message: str, transient: bool = False):
        super().__init__(message)
        self.transient = transient


class CacheMiss(GatewayError):
    pass


class CredentialMissing(GatewayError):
    pass


# -- exit code 4: model-output schema -----------------------------------


class SchemaViolation(PropelError):
    pass


class InvariantViolation(SchemaViolation):
    pass


class MissingDecision(SchemaViolation):
    def __init__(self, ids: list[str]):
        super().__init__(f"no decision for requirement ids: {', '.join(ids)}")
        self.ids = ids


# -- exit code 5: external checker ---------------------------------------


class CheckerError(PropelError):
    pass


class CheckerUnconfigured(CheckerError):
    pass


class CheckerNotFound(CheckerError):
    pass


class CheckerCrash(CheckerError):
    pass
