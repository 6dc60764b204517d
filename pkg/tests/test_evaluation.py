"""Metric arithmetic, rounding, aggregation, and the rendered report."""

import json

import pytest

from conftest import REPO_ROOT
from propel.evaluation import (
    ConfusionMatrix,
    ExtractionStats,
    TranslationStats,
    aggregate_confusion,
    aggregate_extraction,
    aggregate_translation,
    confusion,
    confusion_metrics,
    extraction_stats,
    pct,
    render_report,
    translation_stats,
)
from propel.judging import (
    EquivMethod,
    EquivalenceResult,
    MatchVerdict,
    Rq1Report,
    RequirementMatch,
)
from propel.pipeline import Requirement, VerifiabilityDecision

GOLDEN = REPO_ROOT / "tests" / "golden"


# ---------------------------------------------------------------------------
# Percentage rounding


@pytest.mark.parametrize(
    "n,d,expected",
    [
        (7, 16, "43.8"),   # 43.75 rounds half away from zero
        (2, 16, "12.5"),
        (3, 7, "42.9"),
        (3, 12, "25.0"),
        (31, 44, "70.5"),
        (56, 72, "77.8"),
        (28, 71, "39.4"),
        (25, 25, "100.0"),
        (0, 5, "0.0"),
        (1, 3, "33.3"),
        (2, 3, "66.7"),
    ],
)
def test_pct_rounds_half_up_to_one_decimal(n, d, expected):
    assert pct(n, d) == expected


def test_pct_of_zero_denominator_is_none():
    assert pct(5, 0) is None


# ---------------------------------------------------------------------------
# Classification metrics


def test_confusion_counts_against_ground_truth_labels():
    decisions = (
        VerifiabilityDecision("R1", "Yes", "ok"),   # TP
        VerifiabilityDecision("R2", "No", "ok"),    # FN
        VerifiabilityDecision("R3", "Yes", "ok"),   # FP
        VerifiabilityDecision("R4", "No", "ok"),    # TN
    )
    labels = {"R1": True, "R2": True, "R3": False, "R4": False}
    assert confusion(decisions, labels) == ConfusionMatrix(tp=1, fn=1, fp=1, tn=1)


def test_confusion_requires_exact_id_coverage():
    decisions = (VerifiabilityDecision("R1", "Yes", "ok"),)
    with pytest.raises(ValueError, match="cover"):
        confusion(decisions, {"R1": True, "R2": False})
    with pytest.raises(ValueError, match="cover"):
        confusion(decisions, {"R9": True})
    with pytest.raises(ValueError):
        confusion((), {})


def test_confusion_matrix_rejects_negative_counts():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1, fn=0, fp=0, tn=0)


def test_reference_confusion_totals_give_the_reference_metrics():
    m = ConfusionMatrix(tp=49, fn=3, fp=5, tn=14)
    metrics = confusion_metrics(m)
    assert pct(round(metrics["accuracy"] * m.total), m.total) == "88.7"
    assert metrics["accuracy"] == pytest.approx(63 / 71)
    assert metrics["precision"] == pytest.approx(49 / 54)
    assert metrics["recall"] == pytest.approx(49 / 52)


def test_confusion_metrics_undefined_on_zero_denominators():
    metrics = confusion_metrics(ConfusionMatrix(tp=0, fn=0, fp=0, tn=0))
    assert metrics == {"accuracy": None, "precision": None, "recall": None}


def test_aggregate_confusion_sums_componentwise():
    total = aggregate_confusion(
        [ConfusionMatrix(11, 1, 2, 5), ConfusionMatrix(21, 1, 1, 3), ConfusionMatrix(17, 1, 2, 6)]
    )
    assert total == ConfusionMatrix(tp=49, fn=3, fp=5, tn=14)


# ---------------------------------------------------------------------------
# Extraction stats


def test_extraction_stats_counts_verdicts_and_missed():
    report = Rq1Report(
        matches=(
            RequirementMatch("R1", ("G1",), MatchVerdict.MATCH, 0.9, "x"),
            RequirementMatch("R2", ("G2",), MatchVerdict.PARTIAL, 0.5, "x"),
            RequirementMatch("R3", (), MatchVerdict.NO_MATCH, 0.8, "x"),
        ),
        missed_gt_ids=("G3",),
    )
    gt = tuple(Requirement(f"G{i}", "text", "ground_truth") for i in (1, 2, 3))
    generated = tuple(Requirement(f"R{i}", "text") for i in (1, 2, 3))
    stats = extraction_stats(report, gt, generated)
    assert (stats.match, stats.partial, stats.nomatch) == (1, 1, 1)
    assert (stats.gt_count, stats.gen_count, stats.missed) == (3, 3, 1)


def test_extraction_stats_invariants():
    with pytest.raises(ValueError):
        ExtractionStats(gt_count=3, gen_count=2, match=2, partial=2, nomatch=0, missed=0)
    with pytest.raises(ValueError):
        ExtractionStats(gt_count=3, gen_count=2, match=1, partial=1, nomatch=0, missed=4)


def test_aggregate_extraction_reproduces_the_reference_totals():
    per_scenario = [
        ExtractionStats(19, 16, 7, 7, 2, 6),
        ExtractionStats(26, 15, 9, 3, 3, 15),
        ExtractionStats(26, 24, 8, 11, 5, 7),
    ]
    total = aggregate_extraction(per_scenario)
    assert (total.gen_count, total.gt_count) == (55, 71)
    assert pct(total.match, total.gen_count) == "43.6"
    assert pct(total.partial, total.gen_count) == "38.2"
    assert pct(total.nomatch, total.gen_count) == "18.2"
    assert pct(total.missed, total.gt_count) == "39.4"


# ---------------------------------------------------------------------------
# Translation stats


def judgment(method, equivalent):
    return EquivalenceResult(
        requirement_id="R1",
        generated_query="P[<=1](<> a)",
        gt_query="P[<=1](<> b)",
        equivalent=equivalent,
        method=method,
        justification="x",
    )


def test_translation_stats_tiers():
    judged = [
        judgment(EquivMethod.EXACT_STRING, True),
        judgment(EquivMethod.DETERMINISTIC, True),
        judgment(EquivMethod.LLM_JUDGE, True),
        judgment(EquivMethod.DETERMINISTIC, False),
        judgment(EquivMethod.LLM_JUDGE, False),
    ]
    stats = translation_stats(judged, syntax_failures=2)
    assert stats.total == 7
    assert stats.compiled == 5
    assert stats.exact == 1
    assert stats.judged_valid == 2  # deterministic-equivalent + judge-accepted
    assert stats.valid == 3
    assert stats.accuracy == pytest.approx(3 / 7)


def test_translation_stats_invariants():
    with pytest.raises(ValueError):
        TranslationStats(total=3, compiled=4, exact=0, judged_valid=0)
    with pytest.raises(ValueError):
        TranslationStats(total=4, compiled=3, exact=4, judged_valid=0)
    with pytest.raises(ValueError):
        TranslationStats(total=4, compiled=3, exact=1, judged_valid=3)


def test_aggregate_translation_reproduces_the_reference_totals():
    per_scenario = [
        TranslationStats(15, 15, 8, 3),
        TranslationStats(23, 22, 10, 3),
        TranslationStats(34, 32, 7, 25),
    ]
    total = aggregate_translation(per_scenario)
    assert (total.total, total.compiled, total.exact, total.judged_valid) == (72, 69, 25, 31)
    assert pct(total.compiled, total.total) == "95.8"
    assert pct(total.exact, total.total) == "34.7"
    assert pct(total.judged_valid, total.compiled - total.exact) == "70.5"
    assert pct(total.valid, total.total) == "77.8"


# ---------------------------------------------------------------------------
# Report rendering


REFERENCE_RQ1 = {
    "escort_guide": ExtractionStats(26, 15, 9, 3, 3, 15),
    "med_courier": ExtractionStats(19, 16, 7, 7, 2, 6),
    "warehouse_cell": ExtractionStats(26, 24, 8, 11, 5, 7),
}
REFERENCE_RQ2 = {
    "escort_guide": ConfusionMatrix(21, 1, 1, 3),
    "med_courier": ConfusionMatrix(11, 1, 2, 5),
    "warehouse_cell": ConfusionMatrix(17, 1, 2, 6),
}
REFERENCE_RQ3 = {
    "escort_guide": TranslationStats(23, 22, 10, 3),
    "med_courier": TranslationStats(15, 15, 8, 3),
    "warehouse_cell": TranslationStats(34, 32, 7, 25),
}


def test_markdown_report_matches_the_golden_file():
    rendered = render_report(REFERENCE_RQ1, REFERENCE_RQ2, REFERENCE_RQ3, fmt="markdown")
    assert rendered == (GOLDEN / "report.md").read_text(encoding="utf-8")


def test_json_report_matches_the_golden_file():
    rendered = render_report(REFERENCE_RQ1, REFERENCE_RQ2, REFERENCE_RQ3, fmt="json")
    assert rendered == (GOLDEN / "report.json").read_text(encoding="utf-8")
    payload = json.loads(rendered)
    assert payload["schema"] == "propel.report@1"
    assert payload["rq2"]["total"]["accuracy_pct"] == "88.7"
    assert payload["rq3"]["total"]["judged_valid_pct"] == "70.5"


def test_report_sections_are_optional():
    rendered = render_report(rq2=REFERENCE_RQ2, fmt="json")
    payload = json.loads(rendered)
    assert payload["rq1"] is None and payload["rq3"] is None
    markdown = render_report(rq2=REFERENCE_RQ2, fmt="markdown")
    assert "Verifiability classification" in markdown
    assert "Requirement extraction" not in markdown


def test_report_renders_dashes_for_undefined_percentages():
    stats = {"empty": ConfusionMatrix(tp=0, fn=0, fp=5, tn=0)}
    markdown = render_report(rq2=stats, fmt="markdown")
    assert "—" in markdown  # recall denominator is zero


def test_render_report_rejects_unknown_formats_and_empty_calls():
    with pytest.raises(ValueError):
        render_report(fmt="html")
    with pytest.raises(ValueError):
        render_report()
