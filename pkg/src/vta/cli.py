"""Command-line interface: ingestion, student records, retrieval, the HTTP
service, quiz generation, and the evaluation harness."""
from __future__ import annotations

import datetime as _dt
import json
import sys
from pathlib import Path

import click

from .config import AppConfig, load_config, transcribe_endpoint_from_env
from .context import AppContext
from .corpus import (
    HttpTranscriptionProvider,
    normalize_segments,
    parse_transcript_file,
    transcribe_lecture,
)
from .demo import fixture_questions, fixture_students, seed_demo_course
from .errors import VtaError
from .evaluation import (
    CONDITIONS,
    CRITERIA,
    EvalContext,
    TestItem,
    aggregate,
    build_test_set,
    extract_candidate_questions,
    judge_response,
    read_score_file,
    render_report,
    report_cells,
    run_condition,
    write_score_file,
)
from .evaluation.report import ScoreRecord
from .quiz import generate_quiz, quiz_to_json
from .students import parse_student_file


def _load_ctx(config_path: str | None, db_path: str | None) -> AppContext:
    config = load_config(config_path) if config_path else AppConfig()
    if db_path:
        config.store.path = db_path
    return AppContext.create(config)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file.")
@click.option("--db", "db_path", default=None, help="Override the store path.")
@click.pass_context
def main(ctx, config_path, db_path):
    """Virtual teaching assistant over lecture transcripts."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["db_path"] = db_path


def _ctx_from(ctx) -> AppContext:
    return _load_ctx(ctx.obj.get("config_path"), ctx.obj.get("db_path"))


def _fail(exc: VtaError) -> None:
    click.echo(f"error [{exc.code}]: {exc.message}", err=True)
    sys.exit(1)


# --- ingestion -------------------------------------------------------------

@main.group()
def ingest():
    """Build the instructor course database."""


@ingest.command("course")
@click.argument("course_id")
@click.option("--name", required=True, help="Display name.")
@click.pass_context
def ingest_course(ctx, course_id, name):
    app = _ctx_from(ctx)
    try:
        handle = app.courses.register_course(course_id, name)
    except VtaError as exc:
        _fail(exc)
    click.echo(f"registered course {handle.course_id} ({handle.display_name})")


@ingest.command("lecture")
@click.argument("course_id")
@click.option("--title", required=True)
@click.option("--video", "video_uri", required=True)
@click.option("--transcript", "transcript_file", type=click.Path(exists=True),
              help="Line-delimited transcript file (text/start/end per line).")
@click.option("--transcribe", "audio_uri", default=None,
              help="Audio locator to transcribe via the configured provider.")
@click.pass_context
def ingest_lecture(ctx, course_id, title, video_uri, transcript_file, audio_uri):
    app = _ctx_from(ctx)
    if not transcript_file and not audio_uri:
        raise click.UsageError("provide --transcript or --transcribe")
    try:
        if transcript_file:
            raw = parse_transcript_file(transcript_file)
        else:
            endpoint = transcribe_endpoint_from_env()
            if not endpoint:
                raise click.UsageError(
                    "set VTA_TRANSCRIBE_ENDPOINT to use --transcribe"
                )
            provider = HttpTranscriptionProvider(endpoint=endpoint)
            raw = transcribe_lecture(provider, audio_uri)
        segments = normalize_segments(raw, app.config.ingest.min_tokens)
        lecture_id = app.courses.ingest_lecture(course_id, title, video_uri, segments)
    except VtaError as exc:
        _fail(exc)
    click.echo(f"ingested {lecture_id}: {len(segments)} segments")


# --- students ----------------------------------------------------------------

@main.group()
def students():
    """Manage the academic information system."""


@students.command("load")
@click.argument("file", type=click.Path(exists=True))
@click.pass_context
def students_load(ctx, file):
    app = _ctx_from(ctx)
    try:
        transcripts = parse_student_file(file)
        for t in transcripts:
            app.students.upsert_transcript(t)
    except VtaError as exc:
        _fail(exc)
    click.echo(f"loaded {len(transcripts)} student transcript(s)")


@students.command("show")
@click.argument("student_id")
@click.pass_context
def students_show(ctx, student_id):
    app = _ctx_from(ctx)
    try:
        t = app.students.get_transcript(student_id)
    except VtaError as exc:
        _fail(exc)
    click.echo(f"{t.student_id}: {t.name}")
    click.echo(f"  major: {t.major} ({t.degree_level}, semester {t.semester})")
    for course_name, letter in t.grades:
        click.echo(f"  {course_name}: {letter}")


# --- retrieval ----------------------------------------------------------------

@main.command("retrieve")
@click.argument("course_id")
@click.option("--query", required=True)
@click.option("--k", type=int, default=None, help="Override retrieval.k.")
@click.option("--explain", is_flag=True, help="Show per-leg ranks and fused scores.")
@click.pass_context
def retrieve(ctx, course_id, query, k, explain):
    app = _ctx_from(ctx)
    cfg = app.config.retrieval
    if k is not None:
        cfg.k = k
    try:
        knowledge = app.retrieval.retrieve(course_id, query, cfg)
    except VtaError as exc:
        _fail(exc)
    for rank, seg in enumerate(knowledge.items, start=1):
        line = f"{rank:2d}. [{seg.ref.segment_id}] {seg.lecture_title} ({seg.start_time}-{seg.end_time})"
        if explain:
            line += (
                f"  fused={seg.fused_score:.6f}"
                f" sparse_rank={seg.sparse_rank if seg.sparse_rank is not None else '-'}"
                f" dense_rank={seg.dense_rank if seg.dense_rank is not None else '-'}"
            )
        click.echo(line)
        click.echo(f"      {seg.text}")


# --- service -------------------------------------------------------------------

@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file (overrides the group-level option).")
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.pass_context
def serve(ctx, config_path, port, host):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    app_ctx = _load_ctx(
        config_path or ctx.obj.get("config_path"), ctx.obj.get("db_path")
    )
    app = create_app(app_ctx)
    uvicorn.run(app, host=host, port=port)


@main.command("seed-demo")
@click.pass_context
def seed_demo(ctx):
    """Load the packaged demo course and student profiles."""
    app = _ctx_from(ctx)
    course_id = seed_demo_course(app)
    pairs = app.courses.fetch_course_segments(course_id)
    click.echo(f"seeded course {course_id} with {len(pairs)} segments and 5 students")


# --- quizzes ----------------------------------------------------------------------

@main.command("quiz")
@click.argument("course_id")
@click.option("-n", "count", type=int, default=5)
@click.option("--topic", default=None)
@click.option("-o", "out_file", type=click.Path(), default=None,
              help="Write items as JSON instead of printing.")
@click.pass_context
def quiz(ctx, course_id, count, topic, out_file):
    app = _ctx_from(ctx)
    try:
        result = generate_quiz(
            app.courses, app.retrieval, app.gateway, app.config,
            course_id, n=count, topic=topic,
        )
    except VtaError as exc:
        _fail(exc)
    payload = quiz_to_json(result)
    if out_file:
        Path(out_file).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        click.echo(f"wrote {len(result.items)} item(s) to {out_file}")
    else:
        click.echo(json.dumps(payload, indent=2))
    if result.insufficient:
        click.echo("warning: fewer valid items than requested", err=True)


# --- evaluation ---------------------------------------------------------------------

@main.group("eval")
def eval_group():
    """Evaluation harness: test sets, ablation runs, reports."""


@eval_group.command("extract-questions")
@click.argument("course_id")
@click.option("-m", "limit", type=int, default=20)
@click.option("-o", "out_file", type=click.Path(), required=True)
@click.pass_context
def eval_extract_questions(ctx, course_id, limit, out_file):
    """Emit candidate questions for an operator to curate."""
    app = _ctx_from(ctx)
    try:
        questions = extract_candidate_questions(app.courses, course_id, limit, app.gateway)
    except VtaError as exc:
        _fail(exc)
    Path(out_file).write_text("\n".join(questions) + "\n", encoding="utf-8")
    click.echo(f"wrote {len(questions)} candidate question(s) to {out_file}")


@eval_group.command("build-testset")
@click.option("--questions", "questions_file", type=click.Path(exists=True), default=None,
              help="One question per line; defaults to the packaged fixture.")
@click.option("--profiles", "profiles_file", type=click.Path(exists=True), default=None,
              help="Student records file; defaults to the packaged fixture.")
@click.option("--course", "course_id", required=True)
@click.option("-o", "out_file", type=click.Path(), required=True)
def eval_build_testset(questions_file, profiles_file, course_id, out_file):
    questions = (
        [q for q in Path(questions_file).read_text(encoding="utf-8").splitlines() if q.strip()]
        if questions_file
        else fixture_questions()
    )
    profiles = parse_student_file(profiles_file) if profiles_file else fixture_students()
    try:
        items = build_test_set(questions, profiles, course_id)
    except VtaError as exc:
        _fail(exc)
    with open(out_file, "w", encoding="utf-8") as handle:
        for item in items:
            handle.write(json.dumps({
                "item_id": item.item_id,
                "question": item.question,
                "student_id": item.student_id,
                "course_id": item.course_id,
            }) + "\n")
    click.echo(f"wrote {len(items)} test item(s) to {out_file}")


def _read_testset(path: str) -> list[TestItem]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            items.append(TestItem(
                item_id=rec["item_id"],
                question=rec["question"],
                student_id=rec["student_id"],
                course_id=rec["course_id"],
            ))
    return items


@eval_group.command("run")
@click.option("--testset", "testset_file", type=click.Path(exists=True), required=True)
@click.option("--conditions", "conditions_arg", default=",".join(CONDITIONS),
              help=f"Comma-separated subset of {','.join(CONDITIONS)}.")
@click.option("--profiles", "profiles_file", type=click.Path(exists=True), default=None,
              help="Load these student records into the store first.")
@click.option("-o", "out_file", type=click.Path(), required=True)
@click.pass_context
def eval_run(ctx, testset_file, conditions_arg, profiles_file, out_file):
    """Generate and judge responses for every (condition, item, criterion)."""
    app = _ctx_from(ctx)
    conditions = [c.strip() for c in conditions_arg.split(",") if c.strip()]
    for cond in conditions:
        if cond not in CONDITIONS:
            raise click.UsageError(f"unknown condition {cond!r}")
    profiles = parse_student_file(profiles_file) if profiles_file else fixture_students()
    for profile in profiles:
        app.students.upsert_transcript(profile)
    items = _read_testset(testset_file)
    eval_ctx = EvalContext(
        courses=app.courses, students=app.students, retrieval=app.retrieval,
        gateway=app.gateway, config=app.config,
    )
    judge_model = app.config.eval.judge_model or app.gateway.provider.name
    template_version = app.gateway.library.version_tag()
    records: list[ScoreRecord] = []
    for condition in conditions:
        run_records = run_condition(eval_ctx, items, condition)
        for run in run_records:
            for criterion in CRITERIA:
                if run.response_text is None:
                    score = None
                    click.echo(
                        f"item {run.item.item_id} [{condition}] failed: {run.error}",
                        err=True,
                    )
                else:
                    result = judge_response(
                        run.response_text, run.item.item_id, run.item.question,
                        criterion, app.gateway,
                        student_profile=run.student_profile,
                        source_material=run.source_material,
                        model=app.config.eval.judge_model,
                    )
                    score = result.score
                records.append(ScoreRecord(
                    item_id=run.item.item_id,
                    condition=condition,
                    criterion=criterion.name,
                    score=score,
                    judge_model=judge_model,
                    template_version=template_version,
                ))
    write_score_file(out_file, records)
    click.echo(f"wrote {len(records)} score record(s) to {out_file}")


@eval_group.command("report")
@click.argument("scores_file", type=click.Path(exists=True))
@click.option("-o", "out_file", type=click.Path(), default=None)
@click.option("--cells", "cells_file", type=click.Path(), default=None,
              help="Also write machine-readable cells as JSON.")
@click.option("--timestamp", default=None, help="Override report timestamp (for reproducible output).")
def eval_report(scores_file, out_file, cells_file, timestamp):
    records = read_score_file(scores_file)
    generated_at = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    try:
        report = aggregate(records, generated_at=generated_at)
    except VtaError as exc:
        _fail(exc)
    text = render_report(report)
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if cells_file:
        Path(cells_file).write_text(
            json.dumps(report_cells(report), indent=2) + "\n", encoding="utf-8"
        )


if __name__ == "__main__":
    main()
