"""Command-line surface over the pipeline modules.

Exit codes: 0 ok, 2 usage, 3 validation, 4 backend, 5 io.
Every subcommand supports --format json for scripting.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import benchmark as bench_mod
from .artifacts import ArtifactStore
from .edits import EditScript, diff_states, format_edit_script
from .errors import (
    BackendError,
    IutError,
    MalformedDocument,
    SchemaViolation,
)
from .model import SymbolicState, canonicalize, parse_iut, validate_iut
from .session import Runtime, Session, mock_runtime
from .state_engine import init_state

EXIT_VALIDATION = 3
EXIT_BACKEND = 4
EXIT_IO = 5


def _fail(code: int, message: str, fmt: str) -> "click.exceptions.Exit":
    if fmt == "json":
        click.echo(json.dumps({"error": message}))
    else:
        click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(code)


def _read_text(path: str, fmt: str) -> str:
    try:
        return Path(path).read_text("utf-8")
    except OSError as exc:
        raise _fail(EXIT_IO, str(exc), fmt)


format_option = click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")


@click.group()
def main() -> None:
    """Symbolic scene-state middleware for interleaved image-text pipelines."""


@main.command()
@click.argument("image_id")
@click.option("--out", type=click.Path(), default=None)
@click.option("--artifact-dir", type=click.Path(), default=None)
@format_option
def extract(image_id: str, out: str | None, artifact_dir: str | None, fmt: str) -> None:
    """Extract the initial scene tree from a stored image."""
    runtime = mock_runtime(ArtifactStore(artifact_dir))
    try:
        image = runtime.store.get(image_id)
    except BackendError:
        image = runtime["extractor"].seed_image(image_id)  # type: ignore[attr-defined]
    try:
        state = init_state(image, runtime["extractor"])
    except IutError as exc:
        raise _fail(EXIT_BACKEND, str(exc), fmt)
    text = canonicalize(state.tree)
    if out:
        Path(out).write_text(text + "\n", "utf-8")
    click.echo(json.dumps({"tree": text}) if fmt == "json" else text)


@main.command()
@click.argument("tree_file", type=click.Path())
@format_option
def validate(tree_file: str, fmt: str) -> None:
    """Validate a scene tree document."""
    text = _read_text(tree_file, fmt)
    try:
        report = validate_iut(parse_iut(text))
    except (MalformedDocument, SchemaViolation) as exc:
        raise _fail(EXIT_VALIDATION, str(exc), fmt)
    payload = {
        "errors": [{"code": i.code, "message": i.message} for i in report.errors],
        "warnings": [{"code": i.code, "message": i.message} for i in report.warnings],
    }
    if fmt == "json":
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        for issue in report.errors:
            click.echo(f"error: [{issue.code}] {issue.message}")
        for issue in report.warnings:
            click.echo(f"warning: [{issue.code}] {issue.message}")
        click.echo(f"{len(report.errors)} errors, {len(report.warnings)} warnings")
    if report.errors:
        raise click.exceptions.Exit(EXIT_VALIDATION)


@main.command()
@click.argument("tree_a", type=click.Path())
@click.argument("tree_b", type=click.Path())
@format_option
def diff(tree_a: str, tree_b: str, fmt: str) -> None:
    """Print the edit script that turns tree A into tree B."""
    try:
        a = SymbolicState(parse_iut(_read_text(tree_a, fmt)))
        b = SymbolicState(parse_iut(_read_text(tree_b, fmt)))
    except (MalformedDocument, SchemaViolation) as exc:
        raise _fail(EXIT_VALIDATION, str(exc), fmt)
    script = diff_states(a, b)
    text = format_edit_script(script)
    click.echo(json.dumps({"edits": text.splitlines()}) if fmt == "json" else text)


@main.group()
def session() -> None:
    """Interactive multi-turn sessions (REPL-style, resumable)."""


@session.command("new")
@click.argument("image_id")
@click.option("--dir", "root", type=click.Path(), default="sessions")
@click.option("--iut-mode", type=click.Choice(["on", "off"]), default="on")
@click.option("--artifact-dir", type=click.Path(), default=None)
@format_option
def session_new(image_id: str, root: str, iut_mode: str, artifact_dir: str | None, fmt: str) -> None:
    runtime = mock_runtime(ArtifactStore(artifact_dir))
    try:
        image = runtime.store.get(image_id)
    except BackendError:
        image = runtime["extractor"].seed_image(image_id)  # type: ignore[attr-defined]
    try:
        sess = Session.create(Path(root) / "new", image, runtime, iut_mode=iut_mode)
    except IutError as exc:
        raise _fail(EXIT_BACKEND, str(exc), fmt)
    target = Path(root) / sess.id
    (Path(root) / "new").rename(target)
    sess.directory = target
    click.echo(json.dumps({"session_id": sess.id}) if fmt == "json" else f"session {sess.id}")


def _load_session(root: str, session_id: str, artifact_dir: str | None, fmt: str) -> Session:
    directory = Path(root) / session_id
    if not (directory / "log.jsonl").exists():
        raise _fail(EXIT_IO, f"no session at {directory}", fmt)
    return Session.load(directory, mock_runtime(ArtifactStore(artifact_dir)))


@session.command("step")
@click.argument("session_id")
@click.argument("instruction")
@click.option("--dir", "root", type=click.Path(), default="sessions")
@click.option("--artifact-dir", type=click.Path(), default=None)
@format_option
def session_step(session_id: str, instruction: str, root: str, artifact_dir: str | None, fmt: str) -> None:
    """Run one turn: prints response text, image paths, and the state diff."""
    sess = _load_session(root, session_id, artifact_dir, fmt)
    turn = sess.run_turn(instruction)
    if fmt == "json":
        click.echo(json.dumps(turn.to_dict(), sort_keys=True, ensure_ascii=False))
    else:
        click.echo(f"[turn {turn.turn_id}] {turn.status}")
        click.echo(turn.response_text)
        for image_id in turn.generated_image_ids:
            click.echo(f"image: {sess.runtime.store.get(image_id).path}")
        click.echo("state diff:")
        click.echo(format_edit_script(turn.edits) or "(no change)")
    if turn.status != "ok":
        raise click.exceptions.Exit(EXIT_BACKEND)


@session.command("show")
@click.argument("session_id")
@click.option("--dir", "root", type=click.Path(), default="sessions")
@click.option("--artifact-dir", type=click.Path(), default=None)
@format_option
def session_show(session_id: str, root: str, artifact_dir: str | None, fmt: str) -> None:
    sess = _load_session(root, session_id, artifact_dir, fmt)
    if fmt == "json":
        click.echo(json.dumps({"session_id": sess.id, "turns": [t.to_dict() for t in sess.turns]}, sort_keys=True, ensure_ascii=False))
    else:
        for turn in sess.turns:
            click.echo(f"[{turn.turn_id}] {turn.status:6} {turn.instruction or '(extraction)'}")
        if sess.state is not None:
            click.echo(canonicalize(sess.state.tree))


@main.command("eval")
@click.argument("session_id")
@click.option("--turn", "turn_id", type=int, default=-1)
@click.option("--dir", "root", type=click.Path(), default="sessions")
@click.option("--artifact-dir", type=click.Path(), default=None)
@format_option
def eval_cmd(session_id: str, turn_id: int, root: str, artifact_dir: str | None, fmt: str) -> None:
    """Score a turn's consistency triplet."""
    sess = _load_session(root, session_id, artifact_dir, fmt)
    turn = sess.turns[turn_id]
    try:
        triplet = sess.evaluate_turn(turn)
    except IutError as exc:
        raise _fail(EXIT_BACKEND, str(exc), fmt)
    if fmt == "json":
        click.echo(json.dumps(triplet.as_dict(), sort_keys=True))
    else:
        click.echo(f"style={triplet.style} logic={triplet.logic} entity={triplet.entity}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@format_option
def bench(config_path: str, fmt: str) -> None:
    """Run the benchmark grid from a config file."""
    try:
        config = bench_mod.RunConfig.from_file(config_path)
        records, summary = bench_mod.run_benchmark(config)
    except OSError as exc:
        raise _fail(EXIT_IO, str(exc), fmt)
    except IutError as exc:
        raise _fail(EXIT_VALIDATION, str(exc), fmt)
    if fmt == "json":
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        click.echo(bench_mod.render_report(records))


@main.command()
@click.argument("records_file", type=click.Path())
@format_option
def report(records_file: str, fmt: str) -> None:
    """Render the paired off/on report from a records file."""
    records = []
    for line in _read_text(records_file, fmt).splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        triplet = None
        if raw.get("triplet"):
            from .evaluation import ConsistencyTriplet

            t = raw["triplet"]
            triplet = ConsistencyTriplet(t.get("style"), t.get("logic"), t.get("entity"), t.get("counts", {}))
        records.append(
            bench_mod.BenchmarkRecord(raw["item_id"], raw["vlm"], raw["t2i"], raw["iut_mode"], triplet, raw.get("composite"), raw.get("wall_time", 0.0), raw.get("error"))
        )
    text = bench_mod.render_report(records)
    click.echo(json.dumps({"report": text}) if fmt == "json" else text)


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--sessions-dir", type=click.Path(), default="sessions")
@click.option("--artifact-dir", type=click.Path(), default=None)
def serve(port: int, host: str, sessions_dir: str, artifact_dir: str | None) -> None:
    """Start the REST session service (mock backends unless configured)."""
    import uvicorn

    from .service import create_app

    app = create_app(mock_runtime(ArtifactStore(artifact_dir)), sessions_root=sessions_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
