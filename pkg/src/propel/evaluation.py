"""Metric computation and report rendering.

Three metric families mirror the three pipeline stages: extraction match
distribution, verifiability confusion matrix, and translation accuracy.
Counts are the source of truth; every percentage is recomputed at render
time (one decimal place, round half away from zero) and zero-denominator
metrics render as an em dash instead of a fabricated zero.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .jsonio import dump_canonical
from .judging import EquivalenceResult, EquivMethod, MatchVerdict, Rq1Report
from .pipeline import Requirement, VerifiabilityDecision

REPORT_SCHEMA = "propel.report@1"

TOTAL_LABEL = "Total"

UNDEFINED = "—"  # em dash for undefined metrics


def pct(numerator: int, denominator: int) -> str | None:
    """Percentage with one decimal, round half away from zero; None when the
    denominator is zero."""
    if denominator == 0:
        return None
    value = Decimal(numerator * 100) / Decimal(denominator)
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _count_with_pct(count: int, denominator: int) -> str:
    p = pct(count, denominator)
    return f"{count} ({p}%)" if p is not None else f"{count} ({UNDEFINED})"


# ---------------------------------------------------------------------------
# RQ1: extraction match distribution


@dataclass(frozen=True, slots=True)
class ExtractionStats:
    gt_count: int
    gen_count: int
    match: int
    partial: int
    nomatch: int
    missed: int

    def __post_init__(self) -> None:
        if self.match + self.partial + self.nomatch != self.gen_count:
            raise ValueError(
                "match + partial + nomatch must equal the generated count"
            )
        if not 0 <= self.missed <= self.gt_count:
            raise ValueError("missed must be within [0, gt_count]")


def extraction_stats(
    report: Rq1Report, gt: Sequence[Requirement], generated: Sequence[Requirement]
) -> ExtractionStats:
    counts = {verdict: 0 for verdict in MatchVerdict}
    for m in report.matches:
        counts[m.verdict] += 1
    return ExtractionStats(
        gt_count=len(gt),
        gen_count=len(generated),
        match=counts[MatchVerdict.MATCH],
        partial=counts[MatchVerdict.PARTIAL],
        nomatch=counts[MatchVerdict.NO_MATCH],
        missed=len(report.missed_gt_ids),
    )


def aggregate_extraction(stats: Sequence[ExtractionStats]) -> ExtractionStats:
    return ExtractionStats(
        gt_count=sum(s.gt_count for s in stats),
        gen_count=sum(s.gen_count for s in stats),
        match=sum(s.match for s in stats),
        partial=sum(s.partial for s in stats),
        nomatch=sum(s.nomatch for s in stats),
        missed=sum(s.missed for s in stats),
    )


# ---------------------------------------------------------------------------
# RQ2: verifiability confusion matrix


@dataclass(frozen=True, slots=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fn", "fp", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def confusion(
    decisions: Sequence[VerifiabilityDecision], gt_labels: Mapping[str, bool]
) -> ConfusionMatrix:
    """Confusion matrix of predicted verifiability against ground-truth
    labels; the decisions must cover the labeled ids exactly."""
    if not decisions:
        raise ValueError("confusion needs at least one decision")
    decided = [d.requirement_id for d in decisions]
    if sorted(decided) != sorted(gt_labels):
        raise ValueError(
            "decisions must cover the ground-truth requirement ids exactly; "
            f"got {sorted(decided)}, expected {sorted(gt_labels)}"
        )
    tp = fn = fp = tn = 0
    for d in decisions:
        actual = gt_labels[d.requirement_id]
        if d.verifiable and actual:
            tp += 1
        elif not d.verifiable and actual:
            fn += 1
        elif d.verifiable and not actual:
            fp += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fn=fn, fp=fp, tn=tn)


def aggregate_confusion(matrices: Sequence[ConfusionMatrix]) -> ConfusionMatrix:
    return ConfusionMatrix(
        tp=sum(m.tp for m in matrices),
        fn=sum(m.fn for m in matrices),
        fp=sum(m.fp for m in matrices),
        tn=sum(m.tn for m in matrices),
    )


def confusion_metrics(m: ConfusionMatrix) -> dict[str, float | None]:
    """Accuracy, precision, and recall as fractions; None when a metric's
    denominator is zero."""
    return {
        "accuracy": (m.tp + m.tn) / m.total if m.total else None,
        "precision": m.tp / (m.tp + m.fp) if m.tp + m.fp else None,
        "recall": m.tp / (m.tp + m.fn) if m.tp + m.fn else None,
    }


# ---------------------------------------------------------------------------
# RQ3: translation accuracy


@dataclass(frozen=True, slots=True)
class TranslationStats:
    total: int
    compiled: int
    exact: int
    judged_valid: int

    def __post_init__(self) -> None:
        if not 0 <= self.exact <= self.compiled <= self.total:
            raise ValueError("expected exact <= compiled <= total")
        if self.judged_valid > self.compiled - self.exact:
            raise ValueError("judged_valid cannot exceed compiled - exact")

    @property
    def valid(self) -> int:
        return self.exact + self.judged_valid

    @property
    def accuracy(self) -> float | None:
        return self.valid / self.total if self.total else None


def translation_stats(
    results: Sequence[EquivalenceResult], syntax_failures: int
) -> TranslationStats:
    """Counts for one scenario; *results* hold only queries that compiled
    (syntax failures are a separate count)."""
    if syntax_failures < 0:
        raise ValueError("syntax_failures must be non-negative")
    exact = sum(1 for r in results if r.method is EquivMethod.EXACT_STRING)
    judged_valid = sum(
        1 for r in results if r.equivalent and r.method is not EquivMethod.EXACT_STRING
    )
    return TranslationStats(
        total=len(results) + syntax_failures,
        compiled=len(results),
        exact=exact,
        judged_valid=judged_valid,
    )


def aggregate_translation(stats: Sequence[TranslationStats]) -> TranslationStats:
    return TranslationStats(
        total=sum(s.total for s in stats),
        compiled=sum(s.compiled for s in stats),
        exact=sum(s.exact for s in stats),
        judged_valid=sum(s.judged_valid for s in stats),
    )


# ---------------------------------------------------------------------------
# Report rendering


def _rq1_row(scenario: str, s: ExtractionStats) -> dict:
    return {
        "scenario": scenario,
        "gt_count": s.gt_count,
        "gen_count": s.gen_count,
        "match": s.match,
        "match_pct": pct(s.match, s.gen_count),
        "partial": s.partial,
        "partial_pct": pct(s.partial, s.gen_count),
        "nomatch": s.nomatch,
        "nomatch_pct": pct(s.nomatch, s.gen_count),
        "missed": s.missed,
        "missed_pct": pct(s.missed, s.gt_count),
    }


def _rq2_row(scenario: str, m: ConfusionMatrix) -> dict:
    return {
        "scenario": scenario,
        "tp": m.tp,
        "fn": m.fn,
        "fp": m.fp,
        "tn": m.tn,
        "accuracy_pct": pct(m.tp + m.tn, m.total),
        "precision_pct": pct(m.tp, m.tp + m.fp),
        "recall_pct": pct(m.tp, m.tp + m.fn),
    }


def _rq3_row(scenario: str, s: TranslationStats) -> dict:
    return {
        "scenario": scenario,
        "total": s.total,
        "compiled": s.compiled,
        "compiled_pct": pct(s.compiled, s.total),
        "exact": s.exact,
        "exact_pct": pct(s.exact, s.total),
        "judged_valid": s.judged_valid,
        "judged_valid_pct": pct(s.judged_valid, s.compiled - s.exact),
        "valid": s.valid,
        "accuracy_pct": pct(s.valid, s.total),
    }


def _dash(p: str | None) -> str:
    return f"{p}%" if p is not None else UNDEFINED


def _markdown_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    lines = ["| " + " | ".join(headers) + " |"]
    lines.append("| " + " | ".join("---" for _ in headers) + " |")
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines


def render_report(
    rq1: Mapping[str, ExtractionStats] | None = None,
    rq2: Mapping[str, ConfusionMatrix] | None = None,
    rq3: Mapping[str, TranslationStats] | None = None,
    fmt: str = "markdown",
) -> str:
    """Render the evaluation report with per-scenario rows plus a Total row.

    ``fmt`` is ``markdown`` for human reading or ``json`` for a
    schema-stable document suited to CI diffing.
    """
    if not (rq1 or rq2 or rq3):
        raise ValueError("render_report needs at least one metric section")
    if fmt not in ("markdown", "json"):
        raise ValueError(f"unknown report format {fmt!r}")

    if fmt == "json":
        payload: dict = {"schema": REPORT_SCHEMA, "rq1": None, "rq2": None, "rq3": None}
        if rq1:
            payload["rq1"] = {
                "rows": [_rq1_row(sid, s) for sid, s in rq1.items()],
                "total": _rq1_row(TOTAL_LABEL, aggregate_extraction(list(rq1.values()))),
            }
        if rq2:
            payload["rq2"] = {
                "rows": [_rq2_row(sid, m) for sid, m in rq2.items()],
                "total": _rq2_row(TOTAL_LABEL, aggregate_confusion(list(rq2.values()))),
            }
        if rq3:
            payload["rq3"] = {
                "rows": [_rq3_row(sid, s) for sid, s in rq3.items()],
                "total": _rq3_row(TOTAL_LABEL, aggregate_translation(list(rq3.values()))),
            }
        return dump_canonical(payload)

    lines: list[str] = ["# Evaluation report"]
    if rq1:
        lines += ["", "## Requirement extraction", ""]
        rows = [_rq1_row(sid, s) for sid, s in rq1.items()]
        rows.append(_rq1_row(TOTAL_LABEL, aggregate_extraction(list(rq1.values()))))
        lines += _markdown_table(
            ["Scenario", "GT", "Generated", "Match", "Partial", "NoMatch", "Missed GT"],
            [
                [
                    r["scenario"],
                    str(r["gt_count"]),
                    str(r["gen_count"]),
                    f"{r['match']} ({_dash(r['match_pct'])})",
                    f"{r['partial']} ({_dash(r['partial_pct'])})",
                    f"{r['nomatch']} ({_dash(r['nomatch_pct'])})",
                    f"{r['missed']} ({_dash(r['missed_pct'])})",
                ]
                for r in rows
            ],
        )
    if rq2:
        lines += ["", "## Verifiability classification", ""]
        rows = [_rq2_row(sid, m) for sid, m in rq2.items()]
        rows.append(_rq2_row(TOTAL_LABEL, aggregate_confusion(list(rq2.values()))))
        lines += _markdown_table(
            ["Scenario", "TP", "FN", "FP", "TN", "Accuracy", "Precision", "Recall"],
            [
                [
                    r["scenario"],
                    str(r["tp"]),
                    str(r["fn"]),
                    str(r["fp"]),
                    str(r["tn"]),
                    _dash(r["accuracy_pct"]),
                    _dash(r["precision_pct"]),
                    _dash(r["recall_pct"]),
                ]
                for r in rows
            ],
        )
    if rq3:
        lines += ["", "## Query translation", ""]
        rows = [_rq3_row(sid, s) for sid, s in rq3.items()]
        rows.append(_rq3_row(TOTAL_LABEL, aggregate_translation(list(rq3.values()))))
        lines += _markdown_table(
            [
                "Scenario",
                "Queries",
                "Compiled",
                "Exact match",
                "Judged valid",
                "Overall valid",
            ],
            [
                [
                    r["scenario"],
                    str(r["total"]),
                    f"{r['compiled']} ({_dash(r['compiled_pct'])})",
                    f"{r['exact']} ({_dash(r['exact_pct'])})",
                    f"{r['judged_valid']} ({_dash(r['judged_valid_pct'])})",
                    f"{r['valid']} ({_dash(r['accuracy_pct'])})",
                ]
                for r in rows
            ],
        )
    lines.append("")
    return "\n".join(lines)
