"""Command-line entry points: validate, run, metrics, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import analytics
from .engine import EngineConfig
from .errors import EmptyCorpus, ParseError, TourGuideError, ValidationError
from .gateway.app import create_app, make_backend
from .museum import load_museum_file, museum_from_dict, validate_museum
from .personas import load_persona_file, run_session


def _read_json(path, what: str):
    p = Path(path)
    if not p.is_file():
        click.echo(f"error: {what} file not found: {path}", err=True)
        sys.exit(2)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        click.echo(f"error: invalid JSON in {path}: {exc}", err=True)
        sys.exit(1)


def _load_museum_checked(path):
    doc = _read_json(path, "museum")
    try:
        museum = museum_from_dict(doc)
    except ParseError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    violations = validate_museum(museum)
    if violations:
        for v in violations:
            click.echo(f"violation: {v}", err=True)
        sys.exit(1)
    return museum


def _load_config(backend_path):
    doc = _read_json(backend_path, "backend config") if backend_path else {}
    if "backend" in doc or "timeout_s" in doc or "grace_s" in doc:
        config = EngineConfig.from_dict(doc)
    else:
        # bare backend description (e.g. a scripted rule table)
        config = EngineConfig()
        if doc:
            config.backend = doc
    return config


@click.group()
def main():
    """Autonomous museum-guide toolkit: validation, scripted runs, analytics,
    and the live session gateway."""


@main.command()
@click.argument("museum_path", type=click.Path())
def validate(museum_path):
    """Validate a museum description file; exit 0 iff every invariant holds."""
    _load_museum_checked(museum_path)
    click.echo("museum valid")


@main.command()
@click.option("--museum", "museum_path", required=True, type=click.Path())
@click.option("--persona", "persona_path", required=True, type=click.Path())
@click.option("--backend", "backend_path", default=None, type=click.Path(),
              help="Engine/backend configuration (JSON).")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def run(museum_path, persona_path, backend_path, seed, out_path):
    """Run one scripted session and write its transcript."""
    museum = _load_museum_checked(museum_path)
    config = _load_config(backend_path)
    if not Path(persona_path).is_file():
        click.echo(f"error: persona file not found: {persona_path}", err=True)
        sys.exit(2)
    try:
        persona = load_persona_file(persona_path)
        backend = make_backend(museum, config.backend)
        transcript = run_session(persona, museum, backend, config, seed)
    except TourGuideError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    labeled = analytics.label_turns(transcript)
    Path(out_path).write_text(labeled.to_json(), encoding="utf-8")
    duration = labeled.end_s - labeled.start_s
    counts = {
        "questions": sum(1 for m in labeled.messages
                         if m.role == "visitor" and m.label == "question"),
        "answers": sum(1 for m in labeled.messages
                       if m.role == "robot" and m.label == "answered"),
        "out_of_scope": sum(1 for m in labeled.messages
                            if m.role == "robot" and m.label == "out_of_scope"),
        "failures": sum(1 for m in labeled.messages
                        if m.role == "robot" and m.label == "comprehension_failure"),
    }
    click.echo(
        f"duration_s={duration:.0f} areas={len(set(labeled.areas_visited))} "
        f"questions={counts['questions']} answers={counts['answers']} "
        f"out_of_scope={counts['out_of_scope']} failures={counts['failures']}")


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path())
@click.option("--phrases", "phrases_path", default=None, type=click.Path())
@click.option("--museum", "museum_path", default=None, type=click.Path(),
              help="Optional museum file; orders the per-area rate rows.")
@click.option("--out", "out_csv", required=True, type=click.Path())
def metrics(corpus_dir, phrases_path, museum_path, out_csv):
    """Label a transcript corpus and export visit metrics plus per-area
    error rates as CSV."""
    museum = _load_museum_checked(museum_path) if museum_path else None
    phrases = _read_json(phrases_path, "phrase config") if phrases_path else None
    corpus_path = Path(corpus_dir)
    if not corpus_path.is_dir():
        click.echo(f"error: corpus directory not found: {corpus_dir}", err=True)
        sys.exit(2)
    try:
        corpus = [analytics.label_turns(analytics.load_transcript_file(p), phrases)
                  for p in sorted(corpus_path.glob("*.json"))]
        visit_metrics = analytics.compute_metrics(corpus)
        rates = analytics.per_area_error_rates(corpus, museum)
        analytics.export_metrics(visit_metrics, rates, out_csv)
    except EmptyCorpus:
        click.echo("error: corpus directory contains no transcripts", err=True)
        sys.exit(1)
    except (TourGuideError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {out_csv} ({len(corpus)} transcripts)")


@main.command()
@click.option("--museum", "museum_path", required=True, type=click.Path())
@click.option("--backend", "backend_path", default=None, type=click.Path())
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.option("--time-scale", default=1.0, show_default=True,
              help="Logical seconds per wall second.")
def serve(museum_path, backend_path, bind, time_scale):
    """Serve the live session gateway (WebSocket + museum snapshot)."""
    import uvicorn

    museum = _load_museum_checked(museum_path)
    config = _load_config(backend_path)
    app = create_app(museum, config, time_scale=time_scale)
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000),
                log_level="warning")


if __name__ == "__main__":
    main()
