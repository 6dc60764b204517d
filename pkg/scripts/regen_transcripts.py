#!/usr/bin/env python3
"""Regenerate the bundled replay transcripts.

A scripted, fully deterministic stand-in for the chat provider answers every
request the pipeline and the judges can make over the bundled corpus.  The
exchanges are recorded into the transcript store so that the CLI, the test
suite, and CI can replay complete runs offline.

The scripted answers are not arbitrary: each scenario's translation stage
emits a fixed mix of verbatim, rewritten, loosened, and broken queries, and
the scripted judges grade them with fixed rules, so the aggregated metrics
land on known reference values.  The script asserts those values after
re-running everything in strict replay mode; regeneration fails loudly
rather than committing a bundle that disagrees with the test suite.

Usage: python3 scripts/regen_transcripts.py [--corpus DIR] [--transcripts DIR]
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from propel import prompts
from propel.corpus import Corpus, Scenario, load_corpus, shots_for
from propel.evaluation import confusion, extraction_stats, translation_stats
from propel.gateway import (
    ChatRequest,
    ChatResponse,
    Gateway,
    GatewayMode,
    TranscriptStore,
)
from propel.judging import (
    count_syntax_failures,
    judge_requirements,
    judge_translation_set,
)
from propel.pipeline import (
    PipelineConfig,
    build_classification_request,
    build_translation_request,
    read_stage1,
    read_stage2,
    read_stage3,
    run_pipeline,
)
from propel.smcq import EquivConfig, ParseError, parse_query

# ---------------------------------------------------------------------------
# Scripted behaviour, per scenario.
#
# Query variants: how the scripted translator renders each ground-truth
# query.  "exact" copies it verbatim; ("text", s) substitutes a hand-written
# rewrite the deterministic equivalence checker accepts; ("bound", n)
# changes the time bound; "flip" swaps reachability and invariance;
# "plan" replaces the condition with a task-level completion flag (decided
# only by the scripted judge); "broken" truncates the query so it no longer
# parses.

VARIANTS: dict[str, dict[str, object]] = {
    "med_courier": {
        "MC-Q01": "exact",
        "MC-Q15": ("text", "P[<=120](<> courier.carrying_payload && courier.bay_locked)"),
        "MC-Q02": "exact",
        "MC-Q03": ("bound", 330),
        "MC-Q04": "exact",
        "MC-Q05": ("text", "P[<=600]([] !(courier.battery < 25) || courier.returning)"),
        "MC-Q06": "exact",
        "MC-Q07": "exact",
        "MC-Q14": "exact",
        "MC-Q08": "flip",
        "MC-Q09": "exact",
        "MC-Q10": "flip",
        "MC-Q11": "exact",
        "MC-Q12": "flip",
        "MC-Q13": "flip",
    },
    "escort_guide": {
        "EG-Q01": "exact",
        "EG-Q02": "exact",
        "EG-Q03": "flip",
        "EG-Q04": ("text", "P[<=900]([] guide.escorting imply 1.1 >= guide.speed)"),
        "EG-Q05": "exact",
        "EG-Q06": ("bound", 2700),
        "EG-Q07": "flip",
        "EG-Q08": ("bound", 1000),
        "EG-Q09": ("bound", 2700),
        "EG-Q10": "exact",
        "EG-Q11": "flip",
        "EG-Q12": "exact",
        "EG-Q13": "flip",
        "EG-Q14": "exact",
        "EG-Q15": "exact",
        "EG-Q16": "flip",
        "EG-Q17": ("bound", 2700),
        "EG-Q18": (
            "text",
            "P[<=900]([] sqrt(pow(visitor.pos.x - guide.pos.x, 2)"
            " + pow(visitor.pos.y - guide.pos.y, 2)) >= 0.4)",
        ),
        "EG-Q19": "exact",
        "EG-Q20": ("bound", 2700),
        "EG-Q21": "exact",
        "EG-Q22": "broken",
        "EG-Q23": "exact",
    },
    "warehouse_cell": {
        **{f"WC-Q{i:02d}": "plan" for i in range(1, 35)},
        "WC-Q01": "exact",
        "WC-Q03": "exact",
        "WC-Q05": "exact",
        "WC-Q12": "exact",
        "WC-Q15": "exact",
        "WC-Q24": "exact",
        "WC-Q27": "exact",
        "WC-Q30": "broken",
        "WC-Q33": "broken",
    },
}

PLAN_FLAGS = [
    "plan.inbound_cleared",
    "plan.pallet_stored",
    "plan.assembly_fed",
    "plan.inspection_done",
    "plan.packing_done",
    "plan.outbound_ready",
    "plan.cycle_complete",
    "plan.recharge_done",
    "plan.no_collision",
    "plan.zone_clear",
    "plan.throughput_met",
    "plan.all_tasks_assigned",
]

# Requirement-matching judge: (exact matches, partial matches, unrelated
# extras).  Generated requirements beyond the matched ones reference no
# ground truth; ground-truth requirements past the referenced prefix are
# reported as missed.

RQ1_COUNTS: dict[str, tuple[int, int, int]] = {
    "med_courier": (7, 7, 2),
    "escort_guide": (9, 3, 3),
    "warehouse_cell": (8, 11, 5),
}

RQ1_MISSED: dict[str, int] = {
    "med_courier": 6,
    "escort_guide": 15,
    "warehouse_cell": 7,
}

UNRELATED_TEXTS: dict[str, list[str]] = {
    "med_courier": [
        "The courier should behave politely around hospital staff.",
        "The courier should look clean and professional at all times.",
    ],
    "escort_guide": [
        "The guide should make the tour enjoyable for visitors.",
        "The guide should use a friendly tone when speaking.",
        "The guide should represent the museum's brand well.",
    ],
    "warehouse_cell": [
        "The robots should operate efficiently.",
        "The cell should look tidy during customer visits.",
        "Operators should find the robots predictable.",
        "The robots should coordinate gracefully.",
        "The cell should minimise unnecessary noise.",
    ],
}

# Verifiability classifier: decisions follow the ground-truth labels except
# for these scripted disagreements (requirement id -> verdict).

STAGE2_FLIPS: dict[str, dict[str, str]] = {
    "med_courier": {"MC-R01": "No", "MC-R13": "Yes", "MC-R14": "Yes"},
    "escort_guide": {"EG-R01": "No", "EG-R23": "Yes"},
    "warehouse_cell": {"WC-R01": "No", "WC-R19": "Yes", "WC-R20": "Yes"},
}

# Reference values the recorded bundle must reproduce, keyed by scenario:
# confusion (tp, fn, fp, tn), extraction (match, partial, nomatch, missed),
# translation (total, compiled, exact, judged valid).

EXPECT_CONFUSION = {
    "med_courier": (11, 1, 2, 5),
    "escort_guide": (21, 1, 1, 3),
    "warehouse_cell": (17, 1, 2, 6),
}
EXPECT_EXTRACTION = {
    "med_courier": (7, 7, 2, 6),
    "escort_guide": (9, 3, 3, 15),
    "warehouse_cell": (8, 11, 5, 7),
}
EXPECT_TRANSLATION = {
    "med_courier": (15, 15, 8, 3),
    "escort_guide": (23, 22, 10, 3),
    "warehouse_cell": (34, 32, 7, 25),
}

YES_TEXT = "Maps onto simulated state variables within the model's scope."
NO_TEXT = "Depends on behaviour outside the simulation's semantic boundary."


@dataclass(frozen=True)
class GeneratedReq:
    id: str
    text: str
    source: str | None  # ground-truth requirement id, None for unrelated


def _partial_text(text: str) -> str:
    words = text.rstrip(".").split()
    kept = words[: max(4, (len(words) * 3) // 5)]
    out = " ".join(kept) + "."
    assert out != text, f"partial rewrite did not change: {text!r}"
    return out


def build_generated(scenario: Scenario) -> list[GeneratedReq]:
    """The scripted extraction output: verbatim copies of the first
    ground-truth requirements, shortened paraphrases of the next band, and
    unrelated qualitative statements at the end."""
    exact_n, partial_n, unrelated_n = RQ1_COUNTS[scenario.id]
    referenced = scenario.requirements[: len(scenario.requirements) - RQ1_MISSED[scenario.id]]
    prefix = scenario.requirements[0].id.split("-")[0]
    gens: list[GeneratedReq] = []
    for i in range(exact_n + partial_n):
        src = referenced[i % len(referenced)]
        text = src.text if i < exact_n else _partial_text(src.text)
        gens.append(GeneratedReq(f"{prefix}-G{i + 1:02d}", text, src.id))
    for j, text in enumerate(UNRELATED_TEXTS[scenario.id][:unrelated_n]):
        gens.append(GeneratedReq(f"{prefix}-G{exact_n + partial_n + j + 1:02d}", text, None))
    return gens


def _flip(text: str) -> str:
    return (
        text.replace("(<> ", "([] ", 1)
        if "(<> " in text
        else text.replace("([] ", "(<> ", 1)
    )


def _with_bound(text: str, bound: int) -> str:
    return re.sub(r"<=\d+(?:\.\d+)?", f"<={bound}", text, count=1)


class ScriptedProvider:
    """Deterministic transport: dispatches on the system prompt, reads the
    request payload, and answers from the scripted tables above."""

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self.by_spec = {s.spec.text: s for s in corpus.scenarios}
        self.generated = {s.id: build_generated(s) for s in corpus.scenarios}
        self.extraction_system = prompts.load_asset(prompts.EXTRACTION_SYSTEM)
        self.rq1_system = prompts.load_asset(prompts.JUDGE_REQUIREMENTS_SYSTEM)
        self.rq3_system = prompts.load_asset(prompts.JUDGE_EQUIVALENCE_SYSTEM)
        self.classification_systems = {}
        self.translation_systems = {}
        for s in corpus.scenarios:
            dummy = s.gt_requirements[:1]
            self.classification_systems[
                build_classification_request(s.spec, dummy, s.model_context).system_prompt
            ] = s
            self.translation_systems[
                build_translation_request(s.spec, dummy, s.model_context).system_prompt
            ] = s
        self.query_order = {
            s.id: [q.id for q in s.queries] for s in corpus.scenarios
        }

    # -- dispatch ---------------------------------------------------------

    def __call__(self, req: ChatRequest) -> ChatResponse:
        system = req.system_prompt
        if system == self.extraction_system:
            return self._extract(req)
        if system in self.classification_systems:
            return self._classify(req, self.classification_systems[system])
        if system in self.translation_systems:
            return self._translate(req, self.translation_systems[system])
        if system == self.rq1_system:
            return self._judge_requirements(req)
        if system == self.rq3_system:
            return self._judge_equivalence(req)
        raise AssertionError("scripted provider got an unexpected system prompt")

    # -- stage answers ----------------------------------------------------

    def _extract(self, req: ChatRequest) -> ChatResponse:
        scenario = self.by_spec[req.messages[-1].content]
        payload = [
            {"id": g.id, "text": g.text} for g in self.generated[scenario.id]
        ]
        return ChatResponse(json.dumps(payload, indent=2))

    def _gen_by_id(self, scenario: Scenario) -> dict[str, GeneratedReq]:
        return {g.id: g for g in self.generated[scenario.id]}

    def _classify(self, req: ChatRequest, scenario: Scenario) -> ChatResponse:
        payload = json.loads(req.messages[-1].content)
        labels = scenario.gt_labels
        flips = STAGE2_FLIPS[scenario.id]
        gen_by_id = self._gen_by_id(scenario)
        decisions = []
        for item in payload["requirements"]:
            rid = item["id"]
            if rid in labels:
                verdict = flips.get(rid, "Yes" if labels[rid] else "No")
            else:
                source = gen_by_id[rid].source
                verdict = "Yes" if source is not None and labels[source] else "No"
            decisions.append(
                {
                    "id": rid,
                    "verifiable": verdict,
                    "justification": YES_TEXT if verdict == "Yes" else NO_TEXT,
                }
            )
        return ChatResponse(json.dumps(decisions, indent=2))

    def variant_text(self, scenario: Scenario, query_id: str, source: str) -> str:
        variant = VARIANTS[scenario.id][query_id]
        if variant == "exact":
            return source
        if variant == "flip":
            return _flip(source)
        if variant == "plan":
            head = re.match(r"P\[<=(\d+(?:\.\d+)?)\]\((<>|\[\])", source)
            assert head is not None, source
            flag = PLAN_FLAGS[self.query_order[scenario.id].index(query_id) % len(PLAN_FLAGS)]
            return f"P[<={head.group(1)}]({head.group(2)} {flag})"
        if variant == "broken":
            return source[:-1]
        kind, arg = variant  # type: ignore[misc]
        if kind == "bound":
            return _with_bound(source, arg)
        assert kind == "text"
        return arg

    def _translate(self, req: ChatRequest, scenario: Scenario) -> ChatResponse:
        payload = json.loads(req.messages[-1].content)
        gen_by_id = self._gen_by_id(scenario)
        out = []
        for item in payload["requirements"]:
            rid = item["id"]
            source = rid if rid in scenario.gt_labels else gen_by_id[rid].source
            assert source is not None, f"no queries scripted for {rid}"
            queries = [
                self.variant_text(scenario, q.id, q.text)
                for q in scenario.queries_for(source)
            ]
            out.append({"requirement_id": rid, "queries": queries})
        return ChatResponse(json.dumps(out, indent=2))

    # -- judge answers ----------------------------------------------------

    def _judge_requirements(self, req: ChatRequest) -> ChatResponse:
        payload = json.loads(req.messages[-1].content)
        scenario = self.by_spec[payload["specification"]]
        exact_n, partial_n, _ = RQ1_COUNTS[scenario.id]
        gt_ids = [r["id"] for r in payload["ground_truth_requirements"]]
        referenced = gt_ids[: len(gt_ids) - RQ1_MISSED[scenario.id]]
        matches = []
        for i, item in enumerate(payload["generated_requirements"]):
            if i < exact_n:
                verdict, ids, confidence = "Match", [referenced[i % len(referenced)]], 0.95
                why = "Restates the reference requirement nearly verbatim."
            elif i < exact_n + partial_n:
                verdict, ids, confidence = "Partial", [referenced[i % len(referenced)]], 0.6
                why = "Covers the core obligation but drops qualifying detail."
            else:
                verdict, ids, confidence = "NoMatch", [], 0.85
                why = "Describes a soft preference absent from the reference set."
            matches.append(
                {
                    "generated_id": item["id"],
                    "gt_ids": ids,
                    "verdict": verdict,
                    "confidence": confidence,
                    "justification": why,
                }
            )
        body = {"matches": matches, "missed_gt_ids": gt_ids[len(referenced):]}
        return ChatResponse(json.dumps(body, indent=2))

    def _judge_equivalence(self, req: ChatRequest) -> ChatResponse:
        payload = json.loads(req.messages[-1].content)
        equivalent = "plan." in payload["generated_query"]
        why = (
            "The task-level completion flag tracks the same outcome as the"
            " state-level condition."
            if equivalent
            else "The time horizons differ by a factor of three, which changes"
            " what the query measures."
        )
        return ChatResponse(json.dumps({"equivalent": equivalent, "justification": why}, indent=2))


# ---------------------------------------------------------------------------
# Recording and verification


def _check_variant_outcomes(corpus: Corpus) -> None:
    """Every scripted variant must land in the intended tier."""
    cfg = EquivConfig()
    provider = ScriptedProvider(corpus)
    from propel.smcq import deterministic_equivalence, normalize_text

    for scenario in corpus.scenarios:
        for q in scenario.queries:
            text = provider.variant_text(scenario, q.id, q.text)
            variant = VARIANTS[scenario.id][q.id]
            if variant == "broken":
                try:
                    parse_query(text)
                except ParseError:
                    continue
                raise AssertionError(f"{q.id}: broken variant still parses: {text!r}")
            if variant == "exact":
                assert normalize_text(text) == normalize_text(q.text), q.id
                continue
            verdict = deterministic_equivalence(
                parse_query(text), parse_query(q.text), cfg
            ).outcome.value
            expected = {
                "flip": "Distinct",
                "plan": "Unknown",
            }.get(variant if isinstance(variant, str) else "", None)
            if expected is None:
                kind, arg = variant  # type: ignore[misc]
                if kind == "text":
                    expected = "Equivalent"
                else:
                    source_bound = float(re.search(r"<=(\d+(?:\.\d+)?)", q.text).group(1))
                    rel = abs(arg - source_bound) / max(arg, source_bound)
                    expected = "Equivalent" if rel <= 0.25 else "Unknown"
            assert verdict == expected, f"{q.id}: wanted {expected}, got {verdict}"


def record_all(corpus: Corpus, store_dir: Path) -> None:
    provider = ScriptedProvider(corpus)
    gateway = Gateway(
        mode=GatewayMode.RECORD, store=TranscriptStore(store_dir), transport=provider
    )
    config = PipelineConfig()
    with tempfile.TemporaryDirectory() as tmp:
        for scenario in corpus.scenarios:
            shots = shots_for(scenario.id, corpus)
            run_dir = Path(tmp) / "decoupled" / scenario.id
            run_dir.mkdir(parents=True)
            run_pipeline(
                scenario,
                scenario.model_context,
                gateway,
                PipelineConfig(decoupled=True),
                run_dir=run_dir,
                shots=shots,
            )
            generated = read_stage1(run_dir)
            judge_requirements(
                scenario.spec, generated, scenario.gt_requirements, gateway, config
            )
            translations = read_stage3(run_dir)
            gt_map = {
                r.id: [q.text for q in scenario.queries_for(r.id)]
                for r in scenario.requirements
            }
            judge_translation_set(
                translations, gt_map, scenario.model_context, EquivConfig(), gateway, config
            )
            normal_dir = Path(tmp) / "normal" / scenario.id
            normal_dir.mkdir(parents=True)
            run_pipeline(
                scenario,
                scenario.model_context,
                gateway,
                PipelineConfig(decoupled=False),
                run_dir=normal_dir,
                shots=shots,
            )
    print(f"recorded {gateway.counters.recorded} exchanges into {store_dir}")


def verify_replay(corpus: Corpus, store_dir: Path) -> None:
    """Re-run everything strictly from the store and assert the reference
    numbers; any miss means the bundle is incomplete or the script drifted."""
    gateway = Gateway(mode=GatewayMode.REPLAY_STRICT, store=TranscriptStore(store_dir))
    config = PipelineConfig()
    totals = {"tp": 0, "fn": 0, "fp": 0, "tn": 0}
    with tempfile.TemporaryDirectory() as tmp:
        for scenario in corpus.scenarios:
            shots = shots_for(scenario.id, corpus)
            run_dir = Path(tmp) / scenario.id
            run_dir.mkdir(parents=True)
            run_pipeline(
                scenario,
                scenario.model_context,
                gateway,
                PipelineConfig(decoupled=True),
                run_dir=run_dir,
                shots=shots,
            )
            generated = read_stage1(run_dir)
            report = judge_requirements(
                scenario.spec, generated, scenario.gt_requirements, gateway, config
            )
            ext = extraction_stats(report, scenario.gt_requirements, generated)
            got_ext = (ext.match, ext.partial, ext.nomatch, ext.missed)
            assert got_ext == EXPECT_EXTRACTION[scenario.id], (scenario.id, got_ext)

            decisions, provenance = read_stage2(run_dir)
            assert provenance == "ground_truth"
            matrix = confusion(decisions, scenario.gt_labels)
            got_conf = (matrix.tp, matrix.fn, matrix.fp, matrix.tn)
            assert got_conf == EXPECT_CONFUSION[scenario.id], (scenario.id, got_conf)
            for key, value in zip(totals, got_conf):
                totals[key] += value

            translations = read_stage3(run_dir)
            gt_map = {
                r.id: [q.text for q in scenario.queries_for(r.id)]
                for r in scenario.requirements
            }
            judgments = judge_translation_set(
                translations, gt_map, scenario.model_context, EquivConfig(), gateway, config
            )
            stats = translation_stats(judgments, count_syntax_failures(translations))
            got_tr = (stats.total, stats.compiled, stats.exact, stats.judged_valid)
            assert got_tr == EXPECT_TRANSLATION[scenario.id], (scenario.id, got_tr)
    assert gateway.counters.live_calls == 0
    assert totals == {"tp": 49, "fn": 3, "fp": 5, "tn": 14}, totals
    print(f"verified strict replay: {gateway.counters.cache_hits} cache hits, 0 live calls")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", type=Path, default=Path("fixtures/corpus"))
    parser.add_argument("--transcripts", type=Path, default=Path("fixtures/transcripts"))
    args = parser.parse_args()

    corpus = load_corpus(args.corpus)
    _check_variant_outcomes(corpus)
    if args.transcripts.is_dir():
        for stale in args.transcripts.glob("*.json"):
            stale.unlink()
    record_all(corpus, args.transcripts)
    verify_replay(corpus, args.transcripts)
    return 0


if __name__ == "__main__":
    sys.exit(main())
