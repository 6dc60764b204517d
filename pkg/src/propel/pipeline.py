"""Three-stage requirement formalization pipeline.

Stage 1 extracts atomic natural-language requirements from an informal
specification, Stage 2 classifies each requirement as verifiable or not
against the simulation model's semantic boundaries, and Stage 3 translates
the verifiable subset into bounded probabilistic queries.  Every stage is a
single chat completion with strict JSON output validation and exactly one
repair retry on schema violations.

All intermediate artifacts are persisted to a run directory as
deterministic JSON so that runs are auditable and replayable.
"""

from __future__ import annotations

import json
from collections.abc import Callable, MutableMapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol, TypeVar

from . import prompts
from .errors import MissingDecision, SchemaViolation
from .gateway import (
    DEFAULT_MAX_OUTPUT_TOKENS,
    DEFAULT_TEMPERATURE,
    ChatMessage,
    ChatRequest,
    Gateway,
    content_fingerprint,
    transcript_key,
)
from .jsonio import read_json, write_json
from .smcq import ParseError, Query, canonicalize, parse_query, render_query

DEFAULT_MODEL_ID = "gpt-4o"

PROVENANCE_GENERATED = "generated"
PROVENANCE_GROUND_TRUTH = "ground_truth"
_PROVENANCES = (PROVENANCE_GENERATED, PROVENANCE_GROUND_TRUTH)

STAGE1_SCHEMA = "propel.stage1@1"
STAGE2_SCHEMA = "propel.stage2@1"
STAGE3_SCHEMA = "propel.stage3@1"
META_SCHEMA = "propel.meta@1"


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True, slots=True)
class InformalSpec:
    """An informal natural-language system description."""

    scenario_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("specification text must be non-empty")


@dataclass(frozen=True, slots=True)
class Requirement:
    """One atomic requirement, either model-generated or ground truth."""

    id: str
    text: str
    provenance: str = PROVENANCE_GENERATED

    def __post_init__(self) -> None:
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance: {self.provenance!r}")
        if not self.id:
            raise ValueError("requirement id must be non-empty")
        if not self.text.strip():
            raise ValueError("requirement text must be non-empty")


@dataclass(frozen=True, slots=True)
class VerifiabilityDecision:
    """Stage-2 verdict for one requirement."""

    requirement_id: str
    verdict: str
    justification: str

    def __post_init__(self) -> None:
        if self.verdict not in ("Yes", "No"):
            raise ValueError('verdict must be exactly "Yes" or "No"')
        if not self.justification.strip():
            raise ValueError("justification must be non-empty")

    @property
    def verifiable(self) -> bool:
        return self.verdict == "Yes"


@dataclass(frozen=True, slots=True)
class QueryAttempt:
    """One translated query string plus its parse outcome."""

    text: str
    query: Query | None = None
    canonical: str | None = None
    error_position: int | None = None
    error_message: str | None = None

    @property
    def valid(self) -> bool:
        return self.query is not None


@dataclass(frozen=True, slots=True)
class TranslationResult:
    """Stage-3 output for one requirement (one or more query attempts)."""

    requirement_id: str
    attempts: tuple[QueryAttempt, ...]

    def __post_init__(self) -> None:
        if not self.attempts:
            raise ValueError("a translation must contain at least one query")


@dataclass(frozen=True, slots=True)
class ModelContext:
    """Everything the prompts need to know about the simulation model."""

    observable_identifiers: tuple[str, ...]
    boundary_assumptions: tuple[str, ...]
    grammar_text: str
    mapping_rules_text: str

    def __post_init__(self) -> None:
        if not self.observable_identifiers:
            raise ValueError("observable_identifiers must be non-empty")
        if not self.boundary_assumptions:
            raise ValueError("boundary_assumptions must be non-empty")


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    model_id: str = DEFAULT_MODEL_ID
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    decoupled: bool = False


@dataclass(slots=True)
class PipelineRun:
    """Assembled result of one pipeline execution over one scenario."""

    scenario_id: str
    requirements: tuple[Requirement, ...]
    decisions: tuple[VerifiabilityDecision, ...]
    translations: tuple[TranslationResult, ...]
    fingerprints: dict[str, dict] = field(default_factory=dict)
    prompt_hashes: dict[str, str] = field(default_factory=dict)
    run_dir: Path | None = None


class ScenarioLike(Protocol):
    """What the pipeline needs from a corpus scenario (kept structural to
    avoid importing the corpus layer)."""

    scenario_id: str
    spec: InformalSpec

    @property
    def gt_requirements(self) -> Sequence[Requirement]: ...

    @property
    def gt_verifiable(self) -> Sequence[Requirement]: ...


# ---------------------------------------------------------------------------
# Request builders


def _requirements_payload(requirements: Sequence[Requirement]) -> list[dict]:
    return [{"id": r.id, "text": r.text} for r in requirements]


def _dump_message_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False)


def build_extraction_request(
    spec: InformalSpec,
    shots: Sequence[tuple[InformalSpec, Sequence[Requirement]]],
    config: PipelineConfig | None = None,
) -> ChatRequest:
    """Few-shot extraction request: each shot is a worked example mapping a
    full specification to its requirement list."""
    config = config or PipelineConfig()
    messages: list[ChatMessage] = []
    for shot_spec, shot_requirements in shots:
        messages.append(ChatMessage("user", shot_spec.text))
        messages.append(
            ChatMessage(
                "assistant", _dump_message_json(_requirements_payload(shot_requirements))
            )
        )
    messages.append(ChatMessage("user", spec.text))
    return ChatRequest(
        model_id=config.model_id,
        system_prompt=prompts.load_asset(prompts.EXTRACTION_SYSTEM),
        messages=tuple(messages),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


def build_classification_request(
    spec: InformalSpec,
    requirements: Sequence[Requirement],
    ctx: ModelContext,
    config: PipelineConfig | None = None,
) -> ChatRequest:
    if not requirements:
        raise ValueError("classification needs at least one requirement")
    config = config or PipelineConfig()
    system = prompts.fill_asset(
        prompts.CLASSIFICATION_SYSTEM,
        BOUNDARY_ASSUMPTIONS="\n".join(f"- {rule}" for rule in ctx.boundary_assumptions),
    )
    user = _dump_message_json(
        {
            "specification": spec.text,
            "requirements": _requirements_payload(requirements),
        }
    )
    return ChatRequest(
        model_id=config.model_id,
        system_prompt=system,
        messages=(ChatMessage("user", user),),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


def build_translation_request(
    spec: InformalSpec,
    verifiable_reqs: Sequence[Requirement],
    ctx: ModelContext,
    config: PipelineConfig | None = None,
) -> ChatRequest:
    if not verifiable_reqs:
        raise ValueError("translation needs at least one verifiable requirement")
    config = config or PipelineConfig()
    system = prompts.fill_asset(
        prompts.TRANSLATION_SYSTEM,
        GRAMMAR=ctx.grammar_text,
        MAPPING_RULES=ctx.mapping_rules_text,
    )
    user = _dump_message_json(
        {
            "specification": spec.text,
            "requirements": _requirements_payload(verifiable_reqs),
        }
    )
    return ChatRequest(
        model_id=config.model_id,
        system_prompt=system,
        messages=(ChatMessage("user", user),),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


# ---------------------------------------------------------------------------
# Response validation

T = TypeVar("T")


def _loads_json(content: str) -> object:
    try:
        return json.loads(content)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"response is not valid JSON: {exc}") from exc


def _require_object(item: object, allowed_keys: set[str], where: str) -> dict:
    if not isinstance(item, dict):
        raise SchemaViolation(f"{where}: expected a JSON object")
    unknown = set(item) - allowed_keys
    if unknown:
        raise SchemaViolation(f"{where}: unknown keys {sorted(unknown)}")
    missing = allowed_keys - set(item)
    if missing:
        raise SchemaViolation(f"{where}: missing keys {sorted(missing)}")
    return item


def _require_string(value: object, where: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaViolation(f"{where}: expected a non-empty string")
    return value


def parse_generated_requirements(content: str) -> tuple[Requirement, ...]:
    """Validate a Stage-1 response body into generated requirements."""
    value = _loads_json(content)
    if not isinstance(value, list) or not value:
        raise SchemaViolation("expected a non-empty JSON array of requirements")
    requirements: list[Requirement] = []
    seen: set[str] = set()
    for i, item in enumerate(value):
        obj = _require_object(item, {"id", "text"}, f"requirement[{i}]")
        rid = _require_string(obj["id"], f"requirement[{i}].id")
        text = _require_string(obj["text"], f"requirement[{i}].text")
        if rid in seen:
            raise SchemaViolation(f"duplicate requirement id {rid!r}")
        seen.add(rid)
        requirements.append(Requirement(rid, text, PROVENANCE_GENERATED))
    return tuple(requirements)


def parse_verifiability_decisions(
    content: str, expected_ids: Sequence[str]
) -> tuple[VerifiabilityDecision, ...]:
    """Validate a Stage-2 response body; the decisions must cover the input
    requirement ids bijectively.  Output order follows *expected_ids*."""
    value = _loads_json(content)
    if not isinstance(value, list):
        raise SchemaViolation("expected a JSON array of decisions")
    expected = list(expected_ids)
    by_id: dict[str, VerifiabilityDecision] = {}
    for i, item in enumerate(value):
        obj = _require_object(item, {"id", "verifiable", "justification"}, f"decision[{i}]")
        rid = _require_string(obj["id"], f"decision[{i}].id")
        raw_verdict = _require_string(obj["verifiable"], f"decision[{i}].verifiable")
        justification = _require_string(obj["justification"], f"decision[{i}].justification")
        lowered = raw_verdict.strip().lower()
        if lowered not in ("yes", "no"):
            raise SchemaViolation(
                f"decision[{i}].verifiable: expected Yes or No, got {raw_verdict!r}"
            )
        if rid not in expected:
            raise SchemaViolation(f"decision for unknown requirement id {rid!r}")
        if rid in by_id:
            raise SchemaViolation(f"duplicate decision for requirement id {rid!r}")
        by_id[rid] = VerifiabilityDecision(
            requirement_id=rid,
            verdict="Yes" if lowered == "yes" else "No",
            justification=justification,
        )
    missing = [rid for rid in expected if rid not in by_id]
    if missing:
        raise MissingDecision(missing)
    return tuple(by_id[rid] for rid in expected)


def attempt_query(text: str) -> QueryAttempt:
    """Parse one translated query string, retaining failures as data."""
    try:
        query = parse_query(text)
    except ParseError as exc:
        return QueryAttempt(
            text=text, error_position=exc.position, error_message=exc.message
        )
    return QueryAttempt(text=text, query=query, canonical=render_query(canonicalize(query)))


def parse_translations(
    content: str, expected_ids: Sequence[str]
) -> tuple[TranslationResult, ...]:
    """Validate a Stage-3 response body; every expected requirement must be
    covered exactly once.  Query strings that fail to parse are retained
    with their error positions instead of aborting."""
    value = _loads_json(content)
    if not isinstance(value, list):
        raise SchemaViolation("expected a JSON array of translations")
    expected = list(expected_ids)
    by_id: dict[str, TranslationResult] = {}
    for i, item in enumerate(value):
        obj = _require_object(item, {"requirement_id", "queries"}, f"translation[{i}]")
        rid = _require_string(obj["requirement_id"], f"translation[{i}].requirement_id")
        queries = obj["queries"]
        if not isinstance(queries, list) or not queries:
            raise SchemaViolation(
                f"translation[{i}].queries: expected a non-empty array of strings"
            )
        attempts = tuple(
            attempt_query(_require_string(q, f"translation[{i}].queries[{j}]"))
            for j, q in enumerate(queries)
        )
        if rid not in expected:
            raise SchemaViolation(f"translation for unknown requirement id {rid!r}")
        if rid in by_id:
            raise SchemaViolation(f"duplicate translation for requirement id {rid!r}")
        by_id[rid] = TranslationResult(requirement_id=rid, attempts=attempts)
    missing = [rid for rid in expected if rid not in by_id]
    if missing:
        raise SchemaViolation(f"no translation for requirement ids: {missing}")
    return tuple(by_id[rid] for rid in expected)


# ---------------------------------------------------------------------------
# Stage execution with one repair retry


def complete_json_stage(
    gateway: Gateway,
    request: ChatRequest,
    validate: Callable[[str], T],
    *,
    fingerprints: MutableMapping[str, dict] | None = None,
    stage: str = "stage",
) -> T:
    """Run one chat completion and validate its body.

    On a schema violation the model gets exactly one repair turn (its raw
    answer plus the validation error are appended); a second violation
    propagates.
    """
    response = gateway.complete(request)
    repaired = False
    try:
        value = validate(response.content)
    except SchemaViolation as first_error:
        repaired = True
        repair_text = prompts.fill_asset(prompts.REPAIR_USER, ERROR=str(first_error))
        request = request.append(
            ChatMessage("assistant", response.content),
            ChatMessage("user", repair_text),
        )
        response = gateway.complete(request)
        value = validate(response.content)
    if fingerprints is not None:
        fingerprints[stage] = {
            "repaired": repaired,
            "request": str(transcript_key(request)),
            "response": content_fingerprint(response.content),
        }
    return value


def run_extraction(
    spec: InformalSpec,
    shots: Sequence[tuple[InformalSpec, Sequence[Requirement]]],
    gateway: Gateway,
    config: PipelineConfig | None = None,
    *,
    fingerprints: MutableMapping[str, dict] | None = None,
) -> tuple[Requirement, ...]:
    request = build_extraction_request(spec, shots, config)
    return complete_json_stage(
        gateway,
        request,
        parse_generated_requirements,
        fingerprints=fingerprints,
        stage="stage1",
    )


def run_classification(
    spec: InformalSpec,
    requirements: Sequence[Requirement],
    ctx: ModelContext,
    gateway: Gateway,
    config: PipelineConfig | None = None,
    *,
    fingerprints: MutableMapping[str, dict] | None = None,
) -> tuple[VerifiabilityDecision, ...]:
    request = build_classification_request(spec, requirements, ctx, config)
    expected = [r.id for r in requirements]
    return complete_json_stage(
        gateway,
        request,
        lambda content: parse_verifiability_decisions(content, expected),
        fingerprints=fingerprints,
        stage="stage2",
    )


def run_translation(
    spec: InformalSpec,
    verifiable_reqs: Sequence[Requirement],
    ctx: ModelContext,
    gateway: Gateway,
    config: PipelineConfig | None = None,
    *,
    fingerprints: MutableMapping[str, dict] | None = None,
) -> tuple[TranslationResult, ...]:
    request = build_translation_request(spec, verifiable_reqs, ctx, config)
    expected = [r.id for r in verifiable_reqs]
    return complete_json_stage(
        gateway,
        request,
        lambda content: parse_translations(content, expected),
        fingerprints=fingerprints,
        stage="stage3",
    )


# ---------------------------------------------------------------------------
# Run directory persistence


def _requirement_record(r: Requirement) -> dict:
    return {"id": r.id, "provenance": r.provenance, "text": r.text}


def write_stage1(run_dir: Path, scenario_id: str, requirements: Sequence[Requirement]) -> None:
    write_json(
        run_dir / "stage1.json",
        {
            "schema": STAGE1_SCHEMA,
            "scenario_id": scenario_id,
            "requirements": [_requirement_record(r) for r in requirements],
        },
    )


def read_stage1(run_dir: Path) -> tuple[Requirement, ...]:
    payload = read_json(run_dir / "stage1.json", STAGE1_SCHEMA)
    return tuple(
        Requirement(item["id"], item["text"], item["provenance"])
        for item in payload["requirements"]
    )


def write_stage2(
    run_dir: Path,
    scenario_id: str,
    decisions: Sequence[VerifiabilityDecision],
    *,
    requirements_provenance: str,
) -> None:
    write_json(
        run_dir / "stage2.json",
        {
            "schema": STAGE2_SCHEMA,
            "scenario_id": scenario_id,
            "requirements_provenance": requirements_provenance,
            "decisions": [
                {
                    "justification": d.justification,
                    "requirement_id": d.requirement_id,
                    "verdict": d.verdict,
                }
                for d in decisions
            ],
        },
    )


def read_stage2(run_dir: Path) -> tuple[tuple[VerifiabilityDecision, ...], str]:
    payload = read_json(run_dir / "stage2.json", STAGE2_SCHEMA)
    decisions = tuple(
        VerifiabilityDecision(item["requirement_id"], item["verdict"], item["justification"])
        for item in payload["decisions"]
    )
    return decisions, payload["requirements_provenance"]


def _attempt_record(attempt: QueryAttempt) -> dict:
    record: dict = {"text": attempt.text, "valid": attempt.valid}
    if attempt.valid:
        record["canonical"] = attempt.canonical
    else:
        record["error_message"] = attempt.error_message
        record["error_position"] = attempt.error_position
    return record


def write_stage3(
    run_dir: Path,
    scenario_id: str,
    translations: Sequence[TranslationResult],
    *,
    requirements_provenance: str,
) -> None:
    write_json(
        run_dir / "stage3.json",
        {
            "schema": STAGE3_SCHEMA,
            "scenario_id": scenario_id,
            "requirements_provenance": requirements_provenance,
            "translations": [
                {
                    "queries": [_attempt_record(a) for a in t.attempts],
                    "requirement_id": t.requirement_id,
                }
                for t in translations
            ],
        },
    )


def read_stage3(run_dir: Path) -> tuple[TranslationResult, ...]:
    payload = read_json(run_dir / "stage3.json", STAGE3_SCHEMA)
    translations = []
    for item in payload["translations"]:
        attempts = tuple(attempt_query(q["text"]) for q in item["queries"])
        for recorded, rebuilt in zip(item["queries"], attempts):
            if recorded["valid"] != rebuilt.valid:
                raise SchemaViolation(
                    f"stage3.json: recorded validity for {rebuilt.text!r} "
                    "does not match the parser"
                )
        translations.append(TranslationResult(item["requirement_id"], attempts))
    return tuple(translations)


def write_meta(
    run_dir: Path,
    scenario_id: str,
    config: PipelineConfig,
    *,
    mode: str,
    fingerprints: MutableMapping[str, dict],
    created_utc: str | None = None,
) -> None:
    if created_utc is None:
        created_utc = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    write_json(
        run_dir / "meta.json",
        {
            "schema": META_SCHEMA,
            "scenario_id": scenario_id,
            "created_utc": created_utc,
            "decoupled": config.decoupled,
            "mode": mode,
            "model_id": config.model_id,
            "temperature": config.temperature,
            "fingerprints": dict(fingerprints),
            "prompt_hashes": {
                name: prompts.prompt_hash(name)
                for name in (
                    prompts.EXTRACTION_SYSTEM,
                    prompts.CLASSIFICATION_SYSTEM,
                    prompts.TRANSLATION_SYSTEM,
                    prompts.REPAIR_USER,
                )
            },
        },
    )


def read_meta(run_dir: Path) -> dict:
    return read_json(run_dir / "meta.json", META_SCHEMA)


def new_run_dir(out_root: Path, scenario_id: str, label: str | None = None) -> Path:
    """Allocate a fresh run directory under ``<out_root>/<scenario_id>/``."""
    stamp = label or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = out_root / scenario_id
    candidate = base / stamp
    suffix = 2
    while candidate.exists():
        candidate = base / f"{stamp}-{suffix}"
        suffix += 1
    candidate.mkdir(parents=True)
    return candidate


def latest_run_dir(out_root: Path, scenario_id: str) -> Path:
    base = out_root / scenario_id
    runs = sorted(p for p in base.iterdir() if p.is_dir()) if base.is_dir() else []
    if not runs:
        raise FileNotFoundError(f"no runs recorded under {base}")
    return runs[-1]


# ---------------------------------------------------------------------------
# Full pipeline


def run_pipeline(
    scenario: ScenarioLike,
    ctx: ModelContext,
    gateway: Gateway,
    config: PipelineConfig | None = None,
    *,
    run_dir: Path,
    shots: Sequence[tuple[InformalSpec, Sequence[Requirement]]] = (),
) -> PipelineRun:
    """Execute Stages 1-3 over one scenario, persisting each stage artifact
    as soon as it exists (a failing stage leaves earlier artifacts behind).

    In decoupled mode Stages 2 and 3 consume the ground-truth requirements
    instead of upstream outputs, so each stage is measured in isolation.
    """
    config = config or PipelineConfig()
    scenario_id = scenario.scenario_id
    fingerprints: dict[str, dict] = {}
    run = PipelineRun(
        scenario_id=scenario_id,
        requirements=(),
        decisions=(),
        translations=(),
        fingerprints=fingerprints,
        prompt_hashes=prompts.all_prompt_hashes(),
        run_dir=run_dir,
    )
    try:
        run.requirements = run_extraction(
            scenario.spec, shots, gateway, config, fingerprints=fingerprints
        )
        write_stage1(run_dir, scenario_id, run.requirements)

        if config.decoupled:
            stage2_inputs = tuple(scenario.gt_requirements)
            provenance = PROVENANCE_GROUND_TRUTH
        else:
            stage2_inputs = run.requirements
            provenance = PROVENANCE_GENERATED
        run.decisions = run_classification(
            scenario.spec, stage2_inputs, ctx, gateway, config, fingerprints=fingerprints
        )
        write_stage2(
            run_dir, scenario_id, run.decisions, requirements_provenance=provenance
        )

        if config.decoupled:
            stage3_inputs = tuple(scenario.gt_verifiable)
        else:
            verifiable_ids = {d.requirement_id for d in run.decisions if d.verifiable}
            stage3_inputs = tuple(r for r in stage2_inputs if r.id in verifiable_ids)
        if stage3_inputs:
            run.translations = run_translation(
                scenario.spec, stage3_inputs, ctx, gateway, config, fingerprints=fingerprints
            )
        else:
            run.translations = ()
        write_stage3(
            run_dir, scenario_id, run.translations, requirements_provenance=provenance
        )
    finally:
        write_meta(
            run_dir,
            scenario_id,
            config,
            mode=gateway.mode.value,
            fingerprints=fingerprints,
        )
    return run
