"""LLM-as-a-judge for requirement matching and query equivalence.

Requirement matching is a single zero-shot judge call per scenario that
aligns generated requirements with ground truth, allowing many-to-many
correspondence.  Query equivalence is tiered: exact token-level string
equality first, then the deterministic canonicalizer, and only genuinely
undecided pairs reach the LLM judge, so deterministic decisions cost zero
gateway calls.
"""

from __future__ import annotations

import difflib
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from . import prompts
from .errors import InvariantViolation, SchemaViolation
from .gateway import ChatMessage, ChatRequest, Gateway
from .jsonio import read_json, write_json
from .pipeline import (
    InformalSpec,
    ModelContext,
    PipelineConfig,
    Requirement,
    TranslationResult,
    complete_json_stage,
)
from .smcq import (
    EquivConfig,
    EquivOutcome,
    deterministic_equivalence,
    normalize_text,
    parse_query,
)

RQ1_SCHEMA = "propel.rq1@1"
RQ3_SCHEMA = "propel.rq3@1"


# ---------------------------------------------------------------------------
# Requirement matching (RQ1)


class MatchVerdict(Enum):
    MATCH = "Match"
    PARTIAL = "Partial"
    NO_MATCH = "NoMatch"


@dataclass(frozen=True, slots=True)
class RequirementMatch:
    generated_id: str
    gt_ids: tuple[str, ...]
    verdict: MatchVerdict
    confidence: float
    justification: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantViolation(
                f"confidence must be within [0, 1], got {self.confidence}"
            )
        if (self.verdict is MatchVerdict.NO_MATCH) != (not self.gt_ids):
            raise InvariantViolation(
                f"match for {self.generated_id!r}: gt_ids must be empty exactly "
                "when the verdict is NoMatch"
            )


@dataclass(frozen=True, slots=True)
class Rq1Report:
    matches: tuple[RequirementMatch, ...]
    missed_gt_ids: tuple[str, ...]


def validate_rq1_report(
    report: Rq1Report, generated_ids: Sequence[str], gt_ids: Sequence[str]
) -> None:
    """Check the report-level accounting invariants."""
    seen = [m.generated_id for m in report.matches]
    if sorted(seen) != sorted(generated_ids):
        raise InvariantViolation(
            "matches must cover every generated requirement exactly once; "
            f"got {sorted(seen)}, expected {sorted(generated_ids)}"
        )
    known_gt = set(gt_ids)
    referenced: set[str] = set()
    for m in report.matches:
        unknown = [g for g in m.gt_ids if g not in known_gt]
        if unknown:
            raise InvariantViolation(
                f"match for {m.generated_id!r} references unknown ground-truth ids {unknown}"
            )
        referenced.update(m.gt_ids)
    stray = [g for g in report.missed_gt_ids if g not in known_gt]
    if stray:
        raise InvariantViolation(f"missed_gt_ids contains unknown ids {stray}")
    overlap = sorted(referenced & set(report.missed_gt_ids))
    if overlap:
        raise InvariantViolation(
            f"ground-truth ids {overlap} are both matched and reported missed"
        )


def _parse_rq1_response(
    content: str, generated_ids: Sequence[str], gt_ids: Sequence[str]
) -> Rq1Report:
    try:
        value = json.loads(content)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"response is not valid JSON: {exc}") from exc
    if not isinstance(value, dict) or set(value) != {"matches", "missed_gt_ids"}:
        raise SchemaViolation('expected an object with keys "matches" and "missed_gt_ids"')
    raw_matches = value["matches"]
    raw_missed = value["missed_gt_ids"]
    if not isinstance(raw_matches, list):
        raise SchemaViolation("matches must be an array")
    if not isinstance(raw_missed, list) or any(not isinstance(g, str) for g in raw_missed):
        raise SchemaViolation("missed_gt_ids must be an array of strings")
    matches: list[RequirementMatch] = []
    expected_keys = {"generated_id", "gt_ids", "verdict", "confidence", "justification"}
    verdicts = {v.value: v for v in MatchVerdict}
    for i, item in enumerate(raw_matches):
        where = f"matches[{i}]"
        if not isinstance(item, dict) or set(item) != expected_keys:
            raise SchemaViolation(f"{where}: expected keys {sorted(expected_keys)}")
        if not isinstance(item["generated_id"], str) or not item["generated_id"]:
            raise SchemaViolation(f"{where}.generated_id: expected a non-empty string")
        if not isinstance(item["gt_ids"], list) or any(
            not isinstance(g, str) for g in item["gt_ids"]
        ):
            raise SchemaViolation(f"{where}.gt_ids: expected an array of strings")
        if item["verdict"] not in verdicts:
            raise SchemaViolation(
                f"{where}.verdict: expected one of {sorted(verdicts)}, got {item['verdict']!r}"
            )
        if not isinstance(item["confidence"], (int, float)) or isinstance(
            item["confidence"], bool
        ):
            raise SchemaViolation(f"{where}.confidence: expected a number")
        if not isinstance(item["justification"], str) or not item["justification"].strip():
            raise SchemaViolation(f"{where}.justification: expected a non-empty string")
        matches.append(
            RequirementMatch(
                generated_id=item["generated_id"],
                gt_ids=tuple(item["gt_ids"]),
                verdict=verdicts[item["verdict"]],
                confidence=float(item["confidence"]),
                justification=item["justification"],
            )
        )
    report = Rq1Report(matches=tuple(matches), missed_gt_ids=tuple(raw_missed))
    validate_rq1_report(report, generated_ids, gt_ids)
    return report


def build_rq1_request(
    spec: InformalSpec,
    generated: Sequence[Requirement],
    gt: Sequence[Requirement],
    config: PipelineConfig | None = None,
) -> ChatRequest:
    config = config or PipelineConfig()
    user = json.dumps(
        {
            "specification": spec.text,
            "generated_requirements": [{"id": r.id, "text": r.text} for r in generated],
            "ground_truth_requirements": [{"id": r.id, "text": r.text} for r in gt],
        },
        sort_keys=True,
        indent=2,
        ensure_ascii=False,
    )
    return ChatRequest(
        model_id=config.model_id,
        system_prompt=prompts.load_asset(prompts.JUDGE_REQUIREMENTS_SYSTEM),
        messages=(ChatMessage("user", user),),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


def judge_requirements(
    spec: InformalSpec,
    generated: Sequence[Requirement],
    gt: Sequence[Requirement],
    gateway: Gateway,
    config: PipelineConfig | None = None,
) -> Rq1Report:
    """One zero-shot judge call aligning generated requirements with ground
    truth (many-to-many allowed), with one repair retry on schema errors."""
    if not generated or not gt:
        raise ValueError("judge_requirements needs non-empty requirement lists")
    request = build_rq1_request(spec, generated, gt, config)
    generated_ids = [r.id for r in generated]
    gt_ids = [r.id for r in gt]
    return complete_json_stage(
        gateway,
        request,
        lambda content: _parse_rq1_response(content, generated_ids, gt_ids),
        stage="rq1_judge",
    )


# ---------------------------------------------------------------------------
# Query equivalence (RQ3)


class EquivMethod(Enum):
    EXACT_STRING = "ExactString"
    DETERMINISTIC = "Deterministic"
    LLM_JUDGE = "LlmJudge"


@dataclass(frozen=True, slots=True)
class EquivalenceResult:
    requirement_id: str
    generated_query: str
    gt_query: str
    equivalent: bool
    method: EquivMethod
    justification: str


def _parse_judge_verdict(content: str) -> tuple[bool, str]:
    try:
        value = json.loads(content)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"response is not valid JSON: {exc}") from exc
    if not isinstance(value, dict) or set(value) != {"equivalent", "justification"}:
        raise SchemaViolation(
            'expected an object with keys "equivalent" and "justification"'
        )
    if not isinstance(value["equivalent"], bool):
        raise SchemaViolation("equivalent must be a boolean")
    if not isinstance(value["justification"], str) or not value["justification"].strip():
        raise SchemaViolation("justification must be a non-empty string")
    return value["equivalent"], value["justification"]


def build_equivalence_request(
    gen: str, gt: str, ctx: ModelContext, config: PipelineConfig | None = None
) -> ChatRequest:
    config = config or PipelineConfig()
    user = json.dumps(
        {
            "generated_query": gen,
            "ground_truth_query": gt,
            "observable_identifiers": list(ctx.observable_identifiers),
            "identifier_mapping_rules": ctx.mapping_rules_text,
        },
        sort_keys=True,
        indent=2,
        ensure_ascii=False,
    )
    return ChatRequest(
        model_id=config.model_id,
        system_prompt=prompts.load_asset(prompts.JUDGE_EQUIVALENCE_SYSTEM),
        messages=(ChatMessage("user", user),),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )


def judge_query_pair(
    gen: str,
    gt: str,
    ctx: ModelContext,
    cfg: EquivConfig,
    gateway: Gateway,
    config: PipelineConfig | None = None,
    *,
    requirement_id: str = "",
) -> EquivalenceResult:
    """Tiered equivalence check for one generated/ground-truth query pair.

    Tier 1 is token-normalized string equality, tier 2 the deterministic
    canonicalizer (both without gateway calls); only pairs the rewriter
    cannot decide reach the LLM judge.
    """
    gen_query = parse_query(gen)
    gt_query = parse_query(gt)

    if normalize_text(gen) == normalize_text(gt):
        return EquivalenceResult(
            requirement_id=requirement_id,
            generated_query=gen,
            gt_query=gt,
            equivalent=True,
            method=EquivMethod.EXACT_STRING,
            justification="identical queries up to whitespace",
        )

    verdict = deterministic_equivalence(gen_query, gt_query, cfg)
    if verdict.outcome is EquivOutcome.EQUIVALENT:
        return EquivalenceResult(
            requirement_id=requirement_id,
            generated_query=gen,
            gt_query=gt,
            equivalent=True,
            method=EquivMethod.DETERMINISTIC,
            justification=verdict.reason,
        )
    if verdict.outcome is EquivOutcome.DISTINCT:
        return EquivalenceResult(
            requirement_id=requirement_id,
            generated_query=gen,
            gt_query=gt,
            equivalent=False,
            method=EquivMethod.DETERMINISTIC,
            justification=verdict.reason,
        )

    request = build_equivalence_request(gen, gt, ctx, config)
    equivalent, justification = complete_json_stage(
        gateway, request, _parse_judge_verdict, stage="rq3_judge"
    )
    return EquivalenceResult(
        requirement_id=requirement_id,
        generated_query=gen,
        gt_query=gt,
        equivalent=equivalent,
        method=EquivMethod.LLM_JUDGE,
        justification=justification,
    )


def _closest_index(gen: str, candidates: Sequence[tuple[int, str]]) -> int:
    """Index (into the original GT list) of the candidate most similar to
    *gen*; ties resolve to the earliest candidate."""
    gen_norm = normalize_text(gen)
    best_index = candidates[0][0]
    best_ratio = -1.0
    for index, text in candidates:
        ratio = difflib.SequenceMatcher(None, gen_norm, normalize_text(text)).ratio()
        if ratio > best_ratio:
            best_ratio = ratio
            best_index = index
    return best_index


def judge_translation_set(
    results: Sequence[TranslationResult],
    gt_queries: Mapping[str, Sequence[str]],
    ctx: ModelContext,
    cfg: EquivConfig,
    gateway: Gateway,
    config: PipelineConfig | None = None,
) -> list[EquivalenceResult]:
    """Pair every parseable generated query with a ground-truth query of the
    same requirement and judge the pairs.

    Pairing is greedy and consume-once per requirement: exact string matches
    claim their GT query first, then deterministically equivalent pairs,
    and each remaining generated query is judged against the most similar
    GT query still unclaimed.  Generated queries left without any GT query
    are marked non-equivalent outright.  Syntactically invalid generated
    queries never appear here; they are counted at the syntax tier.
    """
    judged: list[EquivalenceResult] = []
    for result in results:
        rid = result.requirement_id
        gens = [a.text for a in result.attempts if a.valid]
        gts = list(gt_queries.get(rid, ()))
        consumed = [False] * len(gts)
        paired: dict[int, EquivalenceResult] = {}

        def claim(gen_index: int, gt_index: int, outcome: EquivalenceResult) -> None:
            consumed[gt_index] = True
            paired[gen_index] = outcome

        for i, gen in enumerate(gens):
            for j, gt in enumerate(gts):
                if consumed[j]:
                    continue
                if normalize_text(gen) == normalize_text(gt):
                    claim(
                        i,
                        j,
                        EquivalenceResult(
                            requirement_id=rid,
                            generated_query=gen,
                            gt_query=gt,
                            equivalent=True,
                            method=EquivMethod.EXACT_STRING,
                            justification="identical queries up to whitespace",
                        ),
                    )
                    break

        for i, gen in enumerate(gens):
            if i in paired:
                continue
            gen_query = parse_query(gen)
            for j, gt in enumerate(gts):
                if consumed[j]:
                    continue
                verdict = deterministic_equivalence(gen_query, parse_query(gt), cfg)
                if verdict.outcome is EquivOutcome.EQUIVALENT:
                    claim(
                        i,
                        j,
                        EquivalenceResult(
                            requirement_id=rid,
                            generated_query=gen,
                            gt_query=gt,
                            equivalent=True,
                            method=EquivMethod.DETERMINISTIC,
                            justification=verdict.reason,
                        ),
                    )
                    break

        for i, gen in enumerate(gens):
            if i in paired:
                continue
            remaining = [(j, gt) for j, gt in enumerate(gts) if not consumed[j]]
            if not remaining:
                paired[i] = EquivalenceResult(
                    requirement_id=rid,
                    generated_query=gen,
                    gt_query="",
                    equivalent=False,
                    method=EquivMethod.DETERMINISTIC,
                    justification="no ground-truth query remained for this requirement",
                )
                continue
            j = _closest_index(gen, remaining)
            consumed[j] = True
            paired[i] = judge_query_pair(
                gen, gts[j], ctx, cfg, gateway, config, requirement_id=rid
            )

        judged.extend(paired[i] for i in range(len(gens)))
    return judged


def count_syntax_failures(results: Sequence[TranslationResult]) -> int:
    return sum(1 for r in results for a in r.attempts if not a.valid)


# ---------------------------------------------------------------------------
# Persistence


def write_rq1_report(run_dir: Path, scenario_id: str, report: Rq1Report) -> None:
    write_json(
        run_dir / "rq1_report.json",
        {
            "schema": RQ1_SCHEMA,
            "scenario_id": scenario_id,
            "matches": [
                {
                    "confidence": m.confidence,
                    "generated_id": m.generated_id,
                    "gt_ids": list(m.gt_ids),
                    "justification": m.justification,
                    "verdict": m.verdict.value,
                }
                for m in report.matches
            ],
            "missed_gt_ids": list(report.missed_gt_ids),
        },
    )


def read_rq1_report(run_dir: Path) -> Rq1Report:
    payload = read_json(run_dir / "rq1_report.json", RQ1_SCHEMA)
    matches = tuple(
        RequirementMatch(
            generated_id=item["generated_id"],
            gt_ids=tuple(item["gt_ids"]),
            verdict=MatchVerdict(item["verdict"]),
            confidence=item["confidence"],
            justification=item["justification"],
        )
        for item in payload["matches"]
    )
    return Rq1Report(matches=matches, missed_gt_ids=tuple(payload["missed_gt_ids"]))


def write_rq3_judgments(
    run_dir: Path,
    scenario_id: str,
    judgments: Sequence[EquivalenceResult],
    syntax_failures: int,
) -> None:
    write_json(
        run_dir / "rq3_judgments.json",
        {
            "schema": RQ3_SCHEMA,
            "scenario_id": scenario_id,
            "syntax_failures": syntax_failures,
            "judgments": [
                {
                    "equivalent": r.equivalent,
                    "generated_query": r.generated_query,
                    "gt_query": r.gt_query,
                    "justification": r.justification,
                    "method": r.method.value,
                    "requirement_id": r.requirement_id,
                }
                for r in judgments
            ],
        },
    )


def read_rq3_judgments(run_dir: Path) -> tuple[tuple[EquivalenceResult, ...], int]:
    payload = read_json(run_dir / "rq3_judgments.json", RQ3_SCHEMA)
    judgments = tuple(
        EquivalenceResult(
            requirement_id=item["requirement_id"],
            generated_query=item["generated_query"],
            gt_query=item["gt_query"],
            equivalent=item["equivalent"],
            method=EquivMethod(item["method"]),
            justification=item["justification"],
        )
        for item in payload["judgments"]
    )
    return judgments, payload["syntax_failures"]
