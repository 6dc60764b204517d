"""Corpus loading, cross-reference validation, and the bundled fixtures."""

import json
import shutil

import pytest

from conftest import fixture_path
from propel.corpus import (
    corpus_totals,
    load_corpus,
    load_scenario,
    shots_for,
    validate_corpus,
)
from propel.errors import (
    CorpusError,
    DanglingReference,
    MissingFile,
    QueryParseError,
    SchemaViolation,
)

CORPUS_ROOT = fixture_path("corpus")

EXPECTED_SHAPE = {
    "med_courier": (19, 12, 15),
    "escort_guide": (26, 22, 23),
    "warehouse_cell": (26, 18, 34),
}


@pytest.fixture(scope="module")
def corpus():
    return load_corpus(CORPUS_ROOT)


def test_bundled_corpus_has_the_expected_cardinalities(corpus):
    assert set(corpus.ids) == set(EXPECTED_SHAPE)
    for scenario in corpus.scenarios:
        reqs, verifiable, queries = EXPECTED_SHAPE[scenario.id]
        assert len(scenario.requirements) == reqs
        assert sum(r.verifiable for r in scenario.requirements) == verifiable
        assert len(scenario.queries) == queries
    assert corpus_totals(corpus.scenarios) == {
        "requirements": 71,
        "verifiable": 52,
        "queries": 72,
    }
    assert corpus.declared_totals == corpus_totals(corpus.scenarios)


def test_every_ground_truth_query_is_already_parsed(corpus):
    for scenario in corpus.scenarios:
        for q in scenario.queries:
            assert q.query is not None
            assert q.text.startswith("P[<=")


def test_scenario_accessors(corpus):
    scenario = corpus.scenario("med_courier")
    assert scenario.scenario_id == "med_courier"
    assert len(scenario.gt_requirements) == 19
    assert len(scenario.gt_verifiable) == 12
    assert all(r.provenance == "ground_truth" for r in scenario.gt_requirements)
    labels = scenario.gt_labels
    assert sum(labels.values()) == 12
    assert [q.id for q in scenario.queries_for("MC-R01")] == ["MC-Q01", "MC-Q15"]
    with pytest.raises(CorpusError, match="unknown scenario id"):
        corpus.scenario("nope")


def test_observable_identifiers_cover_the_ground_truth_queries(corpus):
    from propel.smcq import validate_identifiers

    for scenario in corpus.scenarios:
        observables = scenario.model_context.observable_identifiers
        for q in scenario.queries:
            assert validate_identifiers(q.query, observables) == [], q.id


def test_shots_exclude_the_target_and_keep_corpus_order(corpus):
    shots = shots_for("med_courier", corpus)
    assert [spec.scenario_id for spec, _ in shots] == ["escort_guide", "warehouse_cell"]
    for _, gt in shots:
        assert all(r.provenance == "ground_truth" for r in gt)
    with pytest.raises(CorpusError, match="unknown scenario id"):
        shots_for("nope", corpus)


def test_validate_corpus_reports_success(corpus):
    report = validate_corpus(CORPUS_ROOT)
    assert report.ok
    rendered = report.render()
    assert "no problems found" in rendered
    assert "71 requirements" in rendered


# ---------------------------------------------------------------------------
# Corruption cases, each applied to a scratch copy of one scenario.


@pytest.fixture
def scratch(tmp_path):
    root = tmp_path / "corpus"
    shutil.copytree(CORPUS_ROOT, root)
    return root


def edit_json(path, mutate):
    payload = json.loads(path.read_text())
    mutate(payload)
    path.write_text(json.dumps(payload))


def test_missing_file_is_reported(scratch):
    (scratch / "med_courier" / "model_context.json").unlink()
    with pytest.raises(MissingFile, match="model_context.json"):
        load_corpus(scratch)


def test_missing_manifest_is_reported(scratch):
    (scratch / "corpus.json").unlink()
    with pytest.raises(MissingFile, match="corpus.json"):
        load_corpus(scratch)


def test_totals_mismatch_is_reported(scratch):
    edit_json(scratch / "corpus.json", lambda p: p["totals"].update(queries=99))
    with pytest.raises(SchemaViolation, match="totals"):
        load_corpus(scratch)


def test_scenario_id_mismatch_is_reported(scratch):
    edit_json(
        scratch / "med_courier" / "gt_requirements.json",
        lambda p: p.update(scenario_id="other"),
    )
    with pytest.raises(SchemaViolation, match="scenario_id"):
        load_scenario(scratch / "med_courier")


def test_unparseable_ground_truth_query_is_located(scratch):
    def mutate(p):
        p["queries"][0]["query"] = "P[<=120](<> courier.at_pharmacy"

    edit_json(scratch / "med_courier" / "gt_queries.json", mutate)
    with pytest.raises(QueryParseError) as err:
        load_scenario(scratch / "med_courier")
    assert err.value.scenario_id == "med_courier"
    assert err.value.query_id == "MC-Q01"


def test_requirement_referencing_unknown_query_is_reported(scratch):
    def mutate(p):
        p["requirements"][0]["query_ids"].append("MC-Q99")

    edit_json(scratch / "med_courier" / "gt_requirements.json", mutate)
    with pytest.raises(DanglingReference, match="MC-Q99"):
        load_scenario(scratch / "med_courier")


def test_query_for_unverifiable_requirement_is_reported(scratch):
    def mutate(p):
        p["queries"][0]["requirement_id"] = "MC-R13"  # not verifiable

    edit_json(scratch / "med_courier" / "gt_queries.json", mutate)
    with pytest.raises(DanglingReference):
        load_scenario(scratch / "med_courier")


def test_query_missing_from_requirement_listing_is_reported(scratch):
    def mutate(p):
        p["requirements"][0]["query_ids"].remove("MC-Q15")

    edit_json(scratch / "med_courier" / "gt_requirements.json", mutate)
    with pytest.raises(DanglingReference, match="MC-Q15"):
        load_scenario(scratch / "med_courier")


def test_duplicate_requirement_id_is_reported(scratch):
    def mutate(p):
        p["requirements"][1]["id"] = p["requirements"][0]["id"]

    edit_json(scratch / "med_courier" / "gt_requirements.json", mutate)
    with pytest.raises(SchemaViolation, match="duplicate requirement id"):
        load_scenario(scratch / "med_courier")


def test_non_boolean_verifiable_flag_is_reported(scratch):
    def mutate(p):
        p["requirements"][0]["verifiable"] = "yes"

    edit_json(scratch / "med_courier" / "gt_requirements.json", mutate)
    with pytest.raises(SchemaViolation, match="verifiable"):
        load_scenario(scratch / "med_courier")


def test_unparseable_observable_identifier_is_reported(scratch):
    def mutate(p):
        p["observable_identifiers"].append("not an identifier!")

    edit_json(scratch / "med_courier" / "model_context.json", mutate)
    with pytest.raises(SchemaViolation, match="observable"):
        load_scenario(scratch / "med_courier")


def test_validate_corpus_collects_problems_instead_of_raising(scratch):
    (scratch / "med_courier" / "model_context.json").unlink()
    report = validate_corpus(scratch)
    assert not report.ok
    assert "model_context.json" in report.render()


def test_validate_corpus_flags_a_totals_mismatch(scratch):
    edit_json(scratch / "corpus.json", lambda p: p["totals"].update(queries=99))
    report = validate_corpus(scratch)
    assert not report.ok
    assert any("totals mismatch" in p for p in report.problems)


def test_empty_corpus_root_is_reported(tmp_path):
    (tmp_path / "corpus.json").write_text(
        json.dumps({"schema": "propel.corpus@1", "totals": {}})
    )
    with pytest.raises(CorpusError, match="no scenario directories"):
        load_corpus(tmp_path)
