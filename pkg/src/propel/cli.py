"""Command-line interface.

Subcommands wire the corpus, pipeline, judging, and evaluation layers
together and map error classes onto stable exit codes:

0 success, 2 validation, 3 gateway, 4 schema, 5 external checker.
"""

from __future__ import annotations

import functools
import shutil
import subprocess
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .corpus import Corpus, Scenario, load_corpus, shots_for, validate_corpus
from .errors import (
    CheckerCrash,
    CheckerError,
    CheckerNotFound,
    CheckerUnconfigured,
    CorpusError,
    GatewayError,
    SchemaViolation,
)
from .evaluation import (
    ConfusionMatrix,
    confusion,
    confusion_metrics,
    extraction_stats,
    render_report,
    translation_stats,
)
from .gateway import (
    DEFAULT_TEMPERATURE,
    Gateway,
    GatewayMode,
    HttpTransport,
    TranscriptStore,
)
from .judging import (
    count_syntax_failures,
    judge_requirements,
    judge_translation_set,
    read_rq1_report,
    read_rq3_judgments,
    write_rq1_report,
    write_rq3_judgments,
)
from .jsonio import read_json, write_json
from .pipeline import (
    DEFAULT_MODEL_ID,
    PipelineConfig,
    latest_run_dir,
    new_run_dir,
    read_stage1,
    read_stage2,
    read_stage3,
    run_pipeline,
)
from .smcq import (
    EquivConfig,
    ParseError,
    canonicalize,
    deterministic_equivalence,
    parse_query,
    render_query,
    validate_identifiers,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GATEWAY = 3
EXIT_SCHEMA = 4
EXIT_CHECKER = 5

RQ2_SCHEMA = "propel.rq2@1"

_MODE_NAMES = {
    "live": GatewayMode.LIVE,
    "record": GatewayMode.RECORD,
    "replay": GatewayMode.REPLAY,
    "replay-strict": GatewayMode.REPLAY_STRICT,
}


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, CheckerError):
        return EXIT_CHECKER
    if isinstance(exc, SchemaViolation):
        return EXIT_SCHEMA
    if isinstance(exc, GatewayError):
        return EXIT_GATEWAY
    return EXIT_VALIDATION


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CorpusError, GatewayError, SchemaViolation, CheckerError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code_for(exc))
        except (ParseError, ValueError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


def _make_gateway(mode_name: str, transcripts: Path | None) -> Gateway:
    mode = _MODE_NAMES[mode_name]
    store = TranscriptStore(transcripts) if transcripts is not None else None
    if mode is not GatewayMode.LIVE and store is None:
        raise ValueError(f"--transcripts is required in {mode_name} mode")
    return Gateway(transport=HttpTransport(), mode=mode, store=store)


def _pipeline_config(model_id: str, temperature: float, decoupled: bool) -> PipelineConfig:
    return PipelineConfig(model_id=model_id, temperature=temperature, decoupled=decoupled)


@click.group()
def main() -> None:
    """Turn informal specifications into verification-ready queries."""


# ---------------------------------------------------------------------------
# corpus


@main.group()
def corpus() -> None:
    """Inspect and validate a scenario corpus."""


@corpus.command("validate")
@click.option(
    "--corpus", "corpus_root", type=click.Path(path_type=Path), required=True,
    help="Corpus root directory.",
)
@_handle_errors
def corpus_validate(corpus_root: Path) -> None:
    """Validate every scenario and the declared corpus totals."""
    report = validate_corpus(corpus_root)
    click.echo(report.render())
    if not report.ok:
        sys.exit(EXIT_VALIDATION)


# ---------------------------------------------------------------------------
# run


def _run_one(
    scenario: Scenario,
    corpus_obj: Corpus,
    out_dir: Path,
    mode_name: str,
    transcripts: Path | None,
    config: PipelineConfig,
    run_label: str | None,
) -> Path:
    gateway = _make_gateway(mode_name, transcripts)
    run_dir = new_run_dir(out_dir, scenario.id, run_label)
    run_pipeline(
        scenario,
        scenario.model_context,
        gateway,
        config,
        run_dir=run_dir,
        shots=shots_for(scenario.id, corpus_obj),
    )
    return run_dir


@main.command("run")
@click.option("--corpus", "corpus_root", type=click.Path(path_type=Path), required=True)
@click.option("--scenario", "scenario_id", default=None, help="Run one scenario only.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("runs"))
@click.option("--mode", "mode_name", type=click.Choice(sorted(_MODE_NAMES)), default="replay-strict")
@click.option("--transcripts", type=click.Path(path_type=Path), default=None,
              help="Transcript store directory (required for non-live modes).")
@click.option("--model-id", default=DEFAULT_MODEL_ID, show_default=True)
@click.option("--temperature", type=click.FloatRange(0.0, 2.0), default=DEFAULT_TEMPERATURE,
              show_default=True)
@click.option("--decoupled", is_flag=True,
              help="Feed ground-truth requirements into Stages 2 and 3.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Scenarios to run concurrently.")
@click.option("--run-label", default=None,
              help="Run directory name (defaults to a UTC timestamp).")
@_handle_errors
def cmd_run(
    corpus_root: Path,
    scenario_id: str | None,
    out_dir: Path,
    mode_name: str,
    transcripts: Path | None,
    model_id: str,
    temperature: float,
    decoupled: bool,
    jobs: int,
    run_label: str | None,
) -> None:
    """Execute the three-stage pipeline over the corpus."""
    corpus_obj = load_corpus(corpus_root)
    scenarios = (
        [corpus_obj.scenario(scenario_id)] if scenario_id else list(corpus_obj.scenarios)
    )
    config = _pipeline_config(model_id, temperature, decoupled)

    def run_one(s: Scenario) -> Path:
        return _run_one(s, corpus_obj, out_dir, mode_name, transcripts, config, run_label)

    if jobs == 1 or len(scenarios) == 1:
        run_dirs = [run_one(s) for s in scenarios]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            run_dirs = list(pool.map(run_one, scenarios))
    for s, run_dir in zip(scenarios, run_dirs):
        click.echo(f"{s.id}: {run_dir}")


# ---------------------------------------------------------------------------
# evaluate


def _resolve_run_dir(
    out_dir: Path, scenario_id: str, run_label: str | None
) -> Path:
    if run_label is not None:
        run_dir = out_dir / scenario_id / run_label
        if not run_dir.is_dir():
            raise FileNotFoundError(f"run directory {run_dir} does not exist")
        return run_dir
    return latest_run_dir(out_dir, scenario_id)


def _scenario_option(fn):
    fn = click.option("--run-label", default=None,
                      help="Evaluate a specific run (defaults to the latest).")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(path_type=Path),
                      default=Path("runs"))(fn)
    fn = click.option("--scenario", "scenario_id", required=True)(fn)
    fn = click.option("--corpus", "corpus_root", type=click.Path(path_type=Path),
                      required=True)(fn)
    return fn


def _gateway_options(fn):
    fn = click.option("--temperature", type=click.FloatRange(0.0, 2.0),
                      default=DEFAULT_TEMPERATURE, show_default=True)(fn)
    fn = click.option("--model-id", default=DEFAULT_MODEL_ID, show_default=True)(fn)
    fn = click.option("--transcripts", type=click.Path(path_type=Path), default=None)(fn)
    fn = click.option("--mode", "mode_name", type=click.Choice(sorted(_MODE_NAMES)),
                      default="replay-strict")(fn)
    return fn


@main.group()
def evaluate() -> None:
    """Judge and score one scenario's run artifacts."""


@evaluate.command("rq1")
@_scenario_option
@_gateway_options
@_handle_errors
def evaluate_rq1(
    corpus_root: Path,
    scenario_id: str,
    out_dir: Path,
    run_label: str | None,
    mode_name: str,
    transcripts: Path | None,
    model_id: str,
    temperature: float,
) -> None:
    """Match extracted requirements against ground truth (one judge call)."""
    corpus_obj = load_corpus(corpus_root)
    scenario = corpus_obj.scenario(scenario_id)
    run_dir = _resolve_run_dir(out_dir, scenario_id, run_label)
    generated = read_stage1(run_dir)
    gateway = _make_gateway(mode_name, transcripts)
    config = _pipeline_config(model_id, temperature, decoupled=False)
    report = judge_requirements(
        scenario.spec, generated, scenario.gt_requirements, gateway, config
    )
    write_rq1_report(run_dir, scenario_id, report)
    stats = extraction_stats(report, scenario.gt_requirements, generated)
    click.echo(
        f"{scenario_id}: generated={stats.gen_count} match={stats.match} "
        f"partial={stats.partial} nomatch={stats.nomatch} missed={stats.missed}"
    )
    click.echo(f"wrote {run_dir / 'rq1_report.json'}")


@evaluate.command("rq2")
@_scenario_option
@_handle_errors
def evaluate_rq2(
    corpus_root: Path,
    scenario_id: str,
    out_dir: Path,
    run_label: str | None,
) -> None:
    """Score verifiability decisions against ground-truth labels."""
    corpus_obj = load_corpus(corpus_root)
    scenario = corpus_obj.scenario(scenario_id)
    run_dir = _resolve_run_dir(out_dir, scenario_id, run_label)
    decisions, provenance = read_stage2(run_dir)
    if provenance != "ground_truth":
        raise ValueError(
            "stage 2 classified generated requirements, which have no ground-truth "
            "labels; re-run the pipeline with --decoupled to evaluate rq2"
        )
    matrix = confusion(decisions, scenario.gt_labels)
    write_json(
        run_dir / "rq2_confusion.json",
        {
            "schema": RQ2_SCHEMA,
            "scenario_id": scenario_id,
            "tp": matrix.tp,
            "fn": matrix.fn,
            "fp": matrix.fp,
            "tn": matrix.tn,
        },
    )
    metrics = confusion_metrics(matrix)
    click.echo(
        f"{scenario_id}: tp={matrix.tp} fn={matrix.fn} fp={matrix.fp} tn={matrix.tn}"
    )
    for name in ("accuracy", "precision", "recall"):
        value = metrics[name]
        shown = f"{value * 100:.1f}%" if value is not None else "undefined"
        click.echo(f"  {name}: {shown}")
    click.echo(f"wrote {run_dir / 'rq2_confusion.json'}")


@evaluate.command("rq3")
@_scenario_option
@_gateway_options
@click.option("--time-tolerance", type=click.FloatRange(0.0, 1.0), default=0.25,
              show_default=True, help="Relative tolerance for time-bound differences.")
@_handle_errors
def evaluate_rq3(
    corpus_root: Path,
    scenario_id: str,
    out_dir: Path,
    run_label: str | None,
    mode_name: str,
    transcripts: Path | None,
    model_id: str,
    temperature: float,
    time_tolerance: float,
) -> None:
    """Judge translated queries against ground-truth queries."""
    corpus_obj = load_corpus(corpus_root)
    scenario = corpus_obj.scenario(scenario_id)
    run_dir = _resolve_run_dir(out_dir, scenario_id, run_label)
    translations = read_stage3(run_dir)
    gateway = _make_gateway(mode_name, transcripts)
    config = _pipeline_config(model_id, temperature, decoupled=False)
    gt_map = {
        r.id: [q.text for q in scenario.queries_for(r.id)] for r in scenario.requirements
    }
    judgments = judge_translation_set(
        translations,
        gt_map,
        scenario.model_context,
        EquivConfig(time_tolerance=time_tolerance),
        gateway,
        config,
    )
    failures = count_syntax_failures(translations)
    write_rq3_judgments(run_dir, scenario_id, judgments, failures)
    stats = translation_stats(judgments, failures)
    click.echo(
        f"{scenario_id}: total={stats.total} compiled={stats.compiled} "
        f"exact={stats.exact} judged_valid={stats.judged_valid}"
    )
    click.echo(f"wrote {run_dir / 'rq3_judgments.json'}")


# ---------------------------------------------------------------------------
# report


@main.command("report")
@click.option("--corpus", "corpus_root", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("runs"))
@click.option("--run-label", default=None,
              help="Aggregate a specific run per scenario (defaults to the latest).")
@_handle_errors
def cmd_report(corpus_root: Path, out_dir: Path, run_label: str | None) -> None:
    """Aggregate per-scenario judgments into report.md and report.json."""
    corpus_obj = load_corpus(corpus_root)
    rq1_stats = {}
    rq2_stats = {}
    rq3_stats = {}
    for scenario in corpus_obj.scenarios:
        try:
            run_dir = _resolve_run_dir(out_dir, scenario.id, run_label)
        except FileNotFoundError:
            continue
        if (run_dir / "rq1_report.json").is_file():
            report = read_rq1_report(run_dir)
            generated = read_stage1(run_dir)
            rq1_stats[scenario.id] = extraction_stats(
                report, scenario.gt_requirements, generated
            )
        if (run_dir / "rq2_confusion.json").is_file():
            payload = read_json(run_dir / "rq2_confusion.json", RQ2_SCHEMA)
            rq2_stats[scenario.id] = ConfusionMatrix(
                tp=payload["tp"], fn=payload["fn"], fp=payload["fp"], tn=payload["tn"]
            )
        if (run_dir / "rq3_judgments.json").is_file():
            judgments, failures = read_rq3_judgments(run_dir)
            rq3_stats[scenario.id] = translation_stats(judgments, failures)
    if not (rq1_stats or rq2_stats or rq3_stats):
        raise ValueError(
            "no evaluation artifacts found; run `evaluate rq1|rq2|rq3` first"
        )
    markdown = render_report(rq1_stats or None, rq2_stats or None, rq3_stats or None,
                             fmt="markdown")
    as_json = render_report(rq1_stats or None, rq2_stats or None, rq3_stats or None,
                            fmt="json")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.md").write_text(markdown, encoding="utf-8")
    (out_dir / "report.json").write_text(as_json, encoding="utf-8")
    click.echo(markdown)
    click.echo(f"wrote {out_dir / 'report.md'} and {out_dir / 'report.json'}")


# ---------------------------------------------------------------------------
# query


@main.group()
def query() -> None:
    """Work with individual queries (no LLM involved)."""


@query.command("check")
@click.argument("query_text")
@click.option("--context", "context_path", type=click.Path(path_type=Path), default=None,
              help="model_context.json to validate identifiers against.")
@_handle_errors
def query_check(query_text: str, context_path: Path | None) -> None:
    """Parse a query and optionally validate its identifiers."""
    parsed = parse_query(query_text)
    click.echo(f"parsed: {render_query(parsed)}")
    if context_path is not None:
        payload = read_json(context_path, "propel.model_context@1")
        missing = validate_identifiers(parsed, payload["observable_identifiers"])
        if missing:
            click.echo("unknown identifiers: " + ", ".join(str(m) for m in missing))
            sys.exit(EXIT_VALIDATION)
        click.echo("identifiers: all observable")


@query.command("canon")
@click.argument("query_text")
@_handle_errors
def query_canon(query_text: str) -> None:
    """Print the canonical rendering of a query."""
    click.echo(render_query(canonicalize(parse_query(query_text))))


@query.command("equiv")
@click.argument("query_a")
@click.argument("query_b")
@click.option("--time-tolerance", type=click.FloatRange(0.0, 1.0), default=0.25,
              show_default=True)
@_handle_errors
def query_equiv(query_a: str, query_b: str, time_tolerance: float) -> None:
    """Deterministic equivalence verdict for two queries (never calls an LLM)."""
    verdict = deterministic_equivalence(
        parse_query(query_a), parse_query(query_b), EquivConfig(time_tolerance=time_tolerance)
    )
    click.echo(f"{verdict.outcome.value}: {verdict.reason}")


# ---------------------------------------------------------------------------
# external checker


@main.command("external-check")
@click.option("--checker", "checker_path", type=click.Path(path_type=Path), default=None,
              help="Path to the external model-checker binary.")
@click.option("--model-file", type=click.Path(path_type=Path), required=True)
@click.option("--queries", "queries_path", type=click.Path(path_type=Path), required=True,
              help="File with one query per line (# starts a comment).")
@click.option("--checker-flags", default="", help="Extra flags passed through verbatim.")
@_handle_errors
def external_check(
    checker_path: Path | None,
    model_file: Path,
    queries_path: Path,
    checker_flags: str,
) -> None:
    """Compile-check queries with an external model checker.

    Queries rejected by the internal parser are reported as failures and
    never forwarded to the external binary.
    """
    if checker_path is None:
        raise CheckerUnconfigured("external checker not configured")
    if not model_file.is_file():
        raise ValueError(f"model file {model_file} does not exist")
    if shutil.which(str(checker_path)) is None and not checker_path.is_file():
        raise CheckerNotFound(f"checker binary {checker_path} not found")
    if not queries_path.is_file():
        raise ValueError(f"query file {queries_path} does not exist")
    lines = [
        line.strip()
        for line in queries_path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines:
        raise ValueError(f"query file {queries_path} contains no queries")
    flags = checker_flags.split() if checker_flags else []
    failures = 0
    for text in lines:
        try:
            parse_query(text)
        except Exception as exc:
            failures += 1
            click.echo(f"FAIL (internal parser): {text}\n  {exc}")
            continue
        with tempfile.NamedTemporaryFile(
            "w", suffix=".q", delete=False, encoding="utf-8"
        ) as handle:
            handle.write(text + "\n")
            temp_path = handle.name
        try:
            proc = subprocess.run(
                [str(checker_path), *flags, str(model_file), temp_path],
                capture_output=True,
                text=True,
            )
        except OSError as exc:
            raise CheckerCrash(f"checker failed to execute: {exc}") from exc
        finally:
            Path(temp_path).unlink(missing_ok=True)
        if proc.returncode < 0:
            raise CheckerCrash(
                f"checker terminated by signal {-proc.returncode} on query: {text}"
            )
        if proc.returncode == 0:
            click.echo(f"PASS: {text}")
        else:
            failures += 1
            reason = (proc.stderr or proc.stdout).strip().splitlines()
            detail = reason[0] if reason else f"exit status {proc.returncode}"
            click.echo(f"FAIL: {text}\n  {detail}")
    click.echo(f"{len(lines) - failures}/{len(lines)} queries passed")


if __name__ == "__main__":
    main()
