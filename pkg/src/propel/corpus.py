"""Scenario dataset format: loading and eager validation.

A corpus is a directory of scenario subdirectories plus a ``corpus.json``
manifest declaring the expected totals.  Each scenario directory contains:

- ``spec.md``                the informal natural-language specification
- ``gt_requirements.json``   ground-truth requirements with verifiability
                             labels, query references, and scenario metadata
- ``gt_queries.json``        ground-truth queries, one per query id
- ``model_context.json``     observable identifiers, boundary assumptions,
                             grammar text, and identifier mapping rules

Everything is validated eagerly: unique ids, bidirectional requirement/query
references, parseable queries, non-negative metadata.  Loaded scenarios are
immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import (
    CorpusError,
    DanglingReference,
    MissingFile,
    QueryParseError,
    SchemaViolation,
)
from .jsonio import read_json
from .pipeline import (
    PROVENANCE_GROUND_TRUTH,
    InformalSpec,
    ModelContext,
    Requirement,
)
from .smcq import IdentifierPath, ParseError, Query, parse_query

GT_REQUIREMENTS_SCHEMA = "propel.gt_requirements@1"
GT_QUERIES_SCHEMA = "propel.gt_queries@1"
MODEL_CONTEXT_SCHEMA = "propel.model_context@1"
CORPUS_MANIFEST_SCHEMA = "propel.corpus@1"

SCENARIO_FILES = ("spec.md", "gt_requirements.json", "gt_queries.json", "model_context.json")


@dataclass(frozen=True, slots=True)
class ScenarioMetadata:
    agents: int
    locations: int
    resources: int

    def __post_init__(self) -> None:
        for name in ("agents", "locations", "resources"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise SchemaViolation(f"metadata.{name} must be a non-negative integer")


@dataclass(frozen=True, slots=True)
class GroundTruthRequirement:
    id: str
    text: str
    verifiable: bool
    query_ids: tuple[str, ...]

    def as_requirement(self) -> Requirement:
        return Requirement(self.id, self.text, PROVENANCE_GROUND_TRUTH)


@dataclass(frozen=True, slots=True)
class GroundTruthQuery:
    id: str
    requirement_id: str
    text: str
    query: Query


@dataclass(frozen=True, slots=True)
class Scenario:
    id: str
    spec: InformalSpec
    requirements: tuple[GroundTruthRequirement, ...]
    queries: tuple[GroundTruthQuery, ...]
    model_context: ModelContext
    metadata: ScenarioMetadata

    @property
    def scenario_id(self) -> str:
        return self.id

    @property
    def gt_requirements(self) -> tuple[Requirement, ...]:
        return tuple(r.as_requirement() for r in self.requirements)

    @property
    def gt_verifiable(self) -> tuple[Requirement, ...]:
        return tuple(r.as_requirement() for r in self.requirements if r.verifiable)

    @property
    def gt_labels(self) -> dict[str, bool]:
        return {r.id: r.verifiable for r in self.requirements}

    def queries_for(self, requirement_id: str) -> tuple[GroundTruthQuery, ...]:
        return tuple(q for q in self.queries if q.requirement_id == requirement_id)


@dataclass(frozen=True, slots=True)
class Corpus:
    root: Path
    scenarios: tuple[Scenario, ...]
    declared_totals: dict[str, int]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.scenarios)

    def scenario(self, scenario_id: str) -> Scenario:
        for s in self.scenarios:
            if s.id == scenario_id:
                return s
        raise CorpusError(f"unknown scenario id {scenario_id!r} (have: {list(self.ids)})")


# ---------------------------------------------------------------------------
# Loading


def _require_keys(payload: dict, keys: set[str], where: str) -> None:
    unknown = set(payload) - keys
    if unknown:
        raise SchemaViolation(f"{where}: unknown keys {sorted(unknown)}")
    missing = keys - set(payload)
    if missing:
        raise SchemaViolation(f"{where}: missing keys {sorted(missing)}")


def _string(value: object, where: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaViolation(f"{where}: expected a non-empty string")
    return value


def _string_list(value: object, where: str, *, allow_empty: bool = True) -> tuple[str, ...]:
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise SchemaViolation(f"{where}: expected an array of strings")
    if not allow_empty and not value:
        raise SchemaViolation(f"{where}: must be non-empty")
    return tuple(value)


def _check_scenario_id(payload: dict, scenario_id: str, where: str) -> None:
    if payload.get("scenario_id") != scenario_id:
        raise SchemaViolation(
            f"{where}: scenario_id {payload.get('scenario_id')!r} does not match "
            f"directory name {scenario_id!r}"
        )


def load_scenario(directory: Path) -> Scenario:
    directory = Path(directory)
    scenario_id = directory.name
    for name in SCENARIO_FILES:
        if not (directory / name).is_file():
            raise MissingFile(f"{directory}: missing {name}")

    spec_text = (directory / "spec.md").read_text(encoding="utf-8")
    if not spec_text.strip():
        raise SchemaViolation(f"{directory}/spec.md: specification text is empty")
    spec = InformalSpec(scenario_id, spec_text)

    req_payload = read_json(directory / "gt_requirements.json", GT_REQUIREMENTS_SCHEMA)
    _require_keys(
        req_payload,
        {"schema", "scenario_id", "metadata", "requirements"},
        "gt_requirements.json",
    )
    _check_scenario_id(req_payload, scenario_id, "gt_requirements.json")
    meta_obj = req_payload["metadata"]
    if not isinstance(meta_obj, dict):
        raise SchemaViolation("gt_requirements.json: metadata must be an object")
    _require_keys(meta_obj, {"agents", "locations", "resources"}, "metadata")
    metadata = ScenarioMetadata(meta_obj["agents"], meta_obj["locations"], meta_obj["resources"])

    requirements: list[GroundTruthRequirement] = []
    seen_req_ids: set[str] = set()
    raw_reqs = req_payload["requirements"]
    if not isinstance(raw_reqs, list) or not raw_reqs:
        raise SchemaViolation("gt_requirements.json: requirements must be a non-empty array")
    for i, item in enumerate(raw_reqs):
        where = f"gt_requirements.json: requirements[{i}]"
        if not isinstance(item, dict):
            raise SchemaViolation(f"{where}: expected an object")
        _require_keys(item, {"id", "text", "verifiable", "query_ids"}, where)
        rid = _string(item["id"], f"{where}.id")
        if rid in seen_req_ids:
            raise SchemaViolation(f"{where}: duplicate requirement id {rid!r}")
        seen_req_ids.add(rid)
        if not isinstance(item["verifiable"], bool):
            raise SchemaViolation(f"{where}.verifiable: expected true or false")
        requirements.append(
            GroundTruthRequirement(
                id=rid,
                text=_string(item["text"], f"{where}.text"),
                verifiable=item["verifiable"],
                query_ids=_string_list(item["query_ids"], f"{where}.query_ids"),
            )
        )
    req_by_id = {r.id: r for r in requirements}

    query_payload = read_json(directory / "gt_queries.json", GT_QUERIES_SCHEMA)
    _require_keys(query_payload, {"schema", "scenario_id", "queries"}, "gt_queries.json")
    _check_scenario_id(query_payload, scenario_id, "gt_queries.json")
    raw_queries = query_payload["queries"]
    if not isinstance(raw_queries, list):
        raise SchemaViolation("gt_queries.json: queries must be an array")
    queries: list[GroundTruthQuery] = []
    seen_query_ids: set[str] = set()
    for i, item in enumerate(raw_queries):
        where = f"gt_queries.json: queries[{i}]"
        if not isinstance(item, dict):
            raise SchemaViolation(f"{where}: expected an object")
        _require_keys(item, {"id", "requirement_id", "query"}, where)
        qid = _string(item["id"], f"{where}.id")
        if qid in seen_query_ids:
            raise SchemaViolation(f"{where}: duplicate query id {qid!r}")
        seen_query_ids.add(qid)
        rid = _string(item["requirement_id"], f"{where}.requirement_id")
        text = _string(item["query"], f"{where}.query")
        try:
            parsed = parse_query(text)
        except ParseError as exc:
            raise QueryParseError(scenario_id, qid, str(exc)) from exc
        queries.append(GroundTruthQuery(id=qid, requirement_id=rid, text=text, query=parsed))
    query_by_id = {q.id: q for q in queries}

    # Bidirectional reference checks.
    for r in requirements:
        for qid in r.query_ids:
            q = query_by_id.get(qid)
            if q is None:
                raise DanglingReference(
                    f"{scenario_id}: requirement {r.id!r} references unknown query {qid!r}"
                )
            if q.requirement_id != r.id:
                raise DanglingReference(
                    f"{scenario_id}: query {qid!r} belongs to {q.requirement_id!r}, "
                    f"not {r.id!r}"
                )
    for q in queries:
        r = req_by_id.get(q.requirement_id)
        if r is None:
            raise DanglingReference(
                f"{scenario_id}: query {q.id!r} references unknown requirement "
                f"{q.requirement_id!r}"
            )
        if not r.verifiable:
            raise DanglingReference(
                f"{scenario_id}: query {q.id!r} references requirement {r.id!r} "
                "which is not verifiable"
            )
        if q.id not in r.query_ids:
            raise DanglingReference(
                f"{scenario_id}: requirement {r.id!r} does not list query {q.id!r} "
                "in its query_ids"
            )

    ctx_payload = read_json(directory / "model_context.json", MODEL_CONTEXT_SCHEMA)
    _require_keys(
        ctx_payload,
        {
            "schema",
            "scenario_id",
            "observable_identifiers",
            "boundary_assumptions",
            "grammar_text",
            "mapping_rules_text",
        },
        "model_context.json",
    )
    _check_scenario_id(ctx_payload, scenario_id, "model_context.json")
    observables = _string_list(
        ctx_payload["observable_identifiers"],
        "model_context.json: observable_identifiers",
        allow_empty=False,
    )
    for ident in observables:
        try:
            IdentifierPath.parse(ident)
        except ValueError as exc:
            raise SchemaViolation(
                f"model_context.json: observable identifier {ident!r} is malformed: {exc}"
            ) from exc
    model_context = ModelContext(
        observable_identifiers=observables,
        boundary_assumptions=_string_list(
            ctx_payload["boundary_assumptions"],
            "model_context.json: boundary_assumptions",
            allow_empty=False,
        ),
        grammar_text=_string(ctx_payload["grammar_text"], "model_context.json: grammar_text"),
        mapping_rules_text=_string(
            ctx_payload["mapping_rules_text"], "model_context.json: mapping_rules_text"
        ),
    )

    return Scenario(
        id=scenario_id,
        spec=spec,
        requirements=tuple(requirements),
        queries=tuple(queries),
        model_context=model_context,
        metadata=metadata,
    )


def _scenario_dirs(root: Path) -> list[Path]:
    return sorted(
        (p for p in root.iterdir() if p.is_dir() and not p.name.startswith(".")),
        key=lambda p: p.name,
    )


def _read_manifest(root: Path) -> dict[str, int]:
    manifest_path = root / "corpus.json"
    if not manifest_path.is_file():
        raise MissingFile(f"{root}: missing corpus.json manifest")
    payload = read_json(manifest_path, CORPUS_MANIFEST_SCHEMA)
    _require_keys(payload, {"schema", "totals"}, "corpus.json")
    totals = payload["totals"]
    if not isinstance(totals, dict):
        raise SchemaViolation("corpus.json: totals must be an object")
    _require_keys(totals, {"requirements", "verifiable", "queries"}, "corpus.json: totals")
    for key, value in totals.items():
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise SchemaViolation(f"corpus.json: totals.{key} must be a non-negative integer")
    return dict(totals)


def corpus_totals(scenarios: tuple[Scenario, ...]) -> dict[str, int]:
    return {
        "requirements": sum(len(s.requirements) for s in scenarios),
        "verifiable": sum(sum(1 for r in s.requirements if r.verifiable) for s in scenarios),
        "queries": sum(len(s.queries) for s in scenarios),
    }


def load_corpus(root: Path) -> Corpus:
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(f"corpus root {root} is not a directory")
    dirs = _scenario_dirs(root)
    if not dirs:
        raise CorpusError(f"corpus root {root} contains no scenario directories")
    scenarios = tuple(load_scenario(d) for d in dirs)
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"duplicate scenario ids in corpus: {ids}")
    declared = _read_manifest(root)
    actual = corpus_totals(scenarios)
    if actual != declared:
        raise SchemaViolation(
            f"corpus totals mismatch: counted {actual}, corpus.json declares {declared}"
        )
    return Corpus(root=root, scenarios=scenarios, declared_totals=declared)


@dataclass(frozen=True, slots=True)
class CorpusValidationReport:
    root: Path
    scenario_ids: tuple[str, ...]
    totals: dict[str, int]
    problems: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.problems

    def render(self) -> str:
        lines = [f"corpus root: {self.root}"]
        lines.append(f"scenarios: {len(self.scenario_ids)} ({', '.join(self.scenario_ids)})")
        lines.append(
            "totals: {requirements} requirements, {verifiable} verifiable, "
            "{queries} queries".format(**self.totals)
        )
        if self.problems:
            lines.append(f"problems ({len(self.problems)}):")
            lines.extend(f"  - {p}" for p in self.problems)
        else:
            lines.append("no problems found")
        return "\n".join(lines)


def validate_corpus(root: Path) -> CorpusValidationReport:
    """Validate every scenario under *root*, aggregating problems instead of
    stopping at the first."""
    root = Path(root)
    problems: list[str] = []
    scenarios: list[Scenario] = []
    if not root.is_dir():
        return CorpusValidationReport(
            root, (), {"requirements": 0, "verifiable": 0, "queries": 0},
            (f"corpus root {root} is not a directory",),
        )
    dirs = _scenario_dirs(root)
    if not dirs:
        problems.append(f"corpus root {root} contains no scenario directories")
    for d in dirs:
        try:
            scenarios.append(load_scenario(d))
        except (CorpusError, SchemaViolation) as exc:
            problems.append(f"{d.name}: {exc}")
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        problems.append(f"duplicate scenario ids: {ids}")
    totals = corpus_totals(tuple(scenarios))
    try:
        declared = _read_manifest(root)
    except (CorpusError, SchemaViolation) as exc:
        problems.append(str(exc))
    else:
        if not problems and totals != declared:
            problems.append(
                f"corpus totals mismatch: counted {totals}, corpus.json declares {declared}"
            )
    return CorpusValidationReport(
        root=root,
        scenario_ids=tuple(ids),
        totals=totals,
        problems=tuple(problems),
    )


def shots_for(
    scenario_id: str, corpus: Corpus
) -> list[tuple[InformalSpec, tuple[Requirement, ...]]]:
    """Worked examples for few-shot extraction: every *other* scenario's
    (spec, ground-truth requirements) pair, in corpus order."""
    if scenario_id not in corpus.ids:
        raise CorpusError(f"unknown scenario id {scenario_id!r}")
    others = [s for s in corpus.scenarios if s.id != scenario_id]
    if not others:
        raise CorpusError(
            "few-shot extraction needs at least one other scenario in the corpus"
        )
    return [(s.spec, s.gt_requirements) for s in others]
