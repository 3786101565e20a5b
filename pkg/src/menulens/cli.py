"""Command-line entry points for every pipeline stage plus a chat REPL.

Conventions shared by all commands: machine-readable output goes to
stdout only, diagnostics to stderr only. Exit codes are stable:
0 success, 1 generic failure, 2 usage error, 3 pipeline produced no
menu, 4 recall below a requested threshold.
"""
from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from . import layout as layout_mod
from .errors import EmptyMenu, MenulensError, NoEligibleItems, NoMenuDetected
from .evalrecall import recall_report, truth_from_json
from .keyframe import parse_detections, select_keyframe
from .llmclient import LlmClientConfig
from .menu import (
    Provenance,
    build_menu,
    llm_structure_menu,
    menu_from_json,
    menu_to_json,
)
from .ocr import DEFAULT_OCR_TIMEOUT, parse_ocr_document
from .prefs import (
    docs_to_json,
    import_manual,
    import_places,
    import_photos_metadata,
    import_transactions,
    load_preference_dir,
)
from .recommend import DEFAULT_K, chat as run_chat, new_session, regenerate

EXIT_GENERIC = 1
EXIT_USAGE = 2
EXIT_EMPTY = 3
EXIT_THRESHOLD = 4

CONFIG_ENV = "MENULENS_CONFIG"
DEFAULT_CONFIG_PATH = "~/.menulens.conf"
DEFAULT_MODEL = "gpt-4"
DEFAULT_TOKEN_VAR = "MENULENS_LLM_TOKEN"
OCR_FILE_PATTERN = "frame_{index}.ocr.json"


def load_config_file(path: str | None = None) -> dict[str, str]:
    """Read the optional `key = value` config file; missing file is fine."""
    location = Path(path or os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG_PATH).expanduser()
    values: dict[str, str] = {}
    if not location.is_file():
        return values
    for raw in location.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            click.echo(f"warning: ignoring malformed config line {line!r}", err=True)
            continue
        values[key.strip()] = value.strip()
    return values


def resolve_llm_config(endpoint_flag: str | None = None) -> LlmClientConfig:
    """Build the chat-completion client config from flag, env, and file."""
    config = load_config_file()
    endpoint = endpoint_flag or config.get("llm_endpoint")
    if not endpoint:
        raise click.UsageError(
            "no LLM endpoint configured; pass --llm-endpoint or set llm_endpoint "
            f"in {DEFAULT_CONFIG_PATH}"
        )
    token_var = os.environ.get("MENULENS_LLM_TOKEN_VAR") or config.get("llm_token_var") or DEFAULT_TOKEN_VAR
    return LlmClientConfig(
        endpoint=endpoint,
        model=config.get("llm_model", DEFAULT_MODEL),
        token_var=token_var,
    )


def resolve_ocr_cmd(flag: str | None = None) -> str | None:
    return flag or os.environ.get("MENULENS_OCR_CMD") or load_config_file().get("ocr_cmd")


def pipeline_errors(fn):
    """Map domain errors to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (NoMenuDetected, EmptyMenu) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_EMPTY)
        except MenulensError as e:
            click.echo(f"error [{e.code}]: {e}", err=True)
            sys.exit(EXIT_GENERIC)
        except (OSError, json.JSONDecodeError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_GENERIC)

    return wrapper


def _write_output(data: bytes, out: str | None):
    if out and out != "-":
        Path(out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
        if not data.endswith(b"\n"):
            sys.stdout.write("\n")


@click.group()
def main():
    """Turn menu photos into structured menus and chat over them."""


@main.group()
def pipeline():
    """End-to-end runs over detection sequences and OCR output."""


@pipeline.command("run")
@click.option("--detections", "detections_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ocr-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--llm", is_flag=True, help="Structure the menu via the chat-completion endpoint.")
@click.option("--llm-endpoint", default=None, help="Chat-completion URL (with --llm).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@pipeline_errors
def pipeline_run(detections_path, ocr_dir, llm, llm_endpoint, out):
    """Select the keyframe, read its OCR document, and write the menu JSON.

    The detections file holds {"detections": [...], "dims": {...}}; the
    OCR directory holds one frame_<index>.ocr.json per analyzed frame.
    """
    detections, dims = parse_detections(Path(detections_path).read_bytes())
    frame = select_keyframe(detections, dims)
    click.echo(f"selected keyframe {frame}", err=True)

    ocr_path = Path(ocr_dir) / OCR_FILE_PATTERN.format(index=frame)
    if not ocr_path.is_file():
        click.echo(f"error: no OCR document at {ocr_path}", err=True)
        sys.exit(EXIT_GENERIC)
    doc = parse_ocr_document(ocr_path.read_bytes())
    ordered = layout_mod.analyze_tokens(doc.tokens, doc.dims.width)
    provenance = Provenance(image_ref=doc.image_ref, keyframe_index=frame)
    if llm:
        menu = llm_structure_menu(ordered, provenance, config=resolve_llm_config(llm_endpoint))
    else:
        menu = build_menu(ordered, provenance)
    _write_output(menu_to_json(menu), out)
    click.echo(f"wrote menu with {sum(len(s.items) for s in menu.sections)} items to {out}", err=True)


@main.group("menu")
def menu_group():
    """Parse a single OCR document into a structured menu."""


@menu_group.command("parse")
@click.argument("ocr_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--llm", is_flag=True, help="Structure the menu via the chat-completion endpoint.")
@click.option("--llm-endpoint", default=None, help="Chat-completion URL (with --llm).")
@click.option("--out", default="-", type=click.Path(dir_okay=False, allow_dash=True))
@click.option("--dump-layout", "dump_layout", default=None, type=click.Path(dir_okay=False),
              help="Also write the line/column analysis as JSON.")
@pipeline_errors
def menu_parse(ocr_json, llm, llm_endpoint, out, dump_layout):
    """Print (or write) the structured menu for one OCR document."""
    doc = parse_ocr_document(Path(ocr_json).read_bytes())
    ordered = layout_mod.analyze_tokens(doc.tokens, doc.dims.width)
    if dump_layout:
        obj = layout_mod.layout_to_json_obj(ordered)
        Path(dump_layout).write_text(
            json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    provenance = Provenance(image_ref=doc.image_ref, keyframe_index=None)
    if llm:
        menu = llm_structure_menu(ordered, provenance, config=resolve_llm_config(llm_endpoint))
    else:
        menu = build_menu(ordered, provenance)
    _write_output(menu_to_json(menu), out)


@main.group()
def prefs():
    """Import preference sources into retrievable documents."""


@prefs.command("import")
@click.option("--source", required=True, type=click.Choice(["transactions", "places", "photos", "manual"]))
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="-", type=click.Path(dir_okay=False, allow_dash=True))
@pipeline_errors
def prefs_import(source, input_file, out):
    """Convert one raw source file into the canonical docs JSON array."""
    raw = Path(input_file).read_bytes()
    importer = {
        "transactions": import_transactions,
        "places": import_places,
        "photos": import_photos_metadata,
        "manual": import_manual,
    }[source]
    docs = importer(raw)
    _write_output(docs_to_json(docs), out)
    click.echo(f"imported {len(docs)} documents from {source}", err=True)


@main.group("eval")
def eval_group():
    """Score parsed menus against ground truth."""


@eval_group.command("recall")
@click.option("--parsed", "parsed_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--truth", "truth_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--theta", default=0.8, show_default=True, type=click.FloatRange(0.0, 1.0, min_open=True))
@click.option("--min-recall", "min_recall", default=None, type=click.FloatRange(0.0, 1.0))
@pipeline_errors
def eval_recall(parsed_dir, truth_dir, theta, min_recall):
    """Report item recall; exits 4 when below --min-recall.

    Each truth file is <menu_id>.json with {"menu_id", "language",
    "items"}; the matching parse is <menu_id>.json in --parsed holding
    the pipeline's menu JSON. A truth menu without a parse scores zero.
    """
    truth = {}
    for path in sorted(Path(truth_dir).glob("*.json")):
        gt = truth_from_json(path.read_bytes())
        truth[gt.menu_id] = gt
    if not truth:
        click.echo(f"error: no truth files in {truth_dir}", err=True)
        sys.exit(EXIT_GENERIC)

    parsed: dict[str, list[str]] = {}
    for path in sorted(Path(parsed_dir).glob("*.json")):
        menu = menu_from_json(path.read_bytes())
        parsed[path.stem] = [item.name for section in menu.sections for item in section.items]

    report = recall_report(parsed, truth, theta=theta)
    click.echo(json.dumps(report.to_obj(), ensure_ascii=False, indent=2, sort_keys=True))

    width = max(len(mid) for mid in report.per_menu)
    for menu_id in sorted(report.per_menu):
        entry = report.per_menu[menu_id]
        click.echo(f"{menu_id:<{width}}  {entry.matched}/{entry.total}  recall={entry.recall:.4f}", err=True)
    click.echo(f"{'aggregate':<{width}}  recall={report.aggregate_recall:.4f}", err=True)

    if min_recall is not None and report.aggregate_recall < min_recall:
        click.echo(f"error: aggregate recall {report.aggregate_recall:.4f} < {min_recall:.4f}", err=True)
        sys.exit(EXIT_THRESHOLD)


@main.command("chat")
@click.option("--menu", "menu_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prefs", "prefs_dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--offline", is_flag=True, help="Skip the LLM; always use the deterministic recommender.")
@click.option("--llm-endpoint", default=None, help="Chat-completion URL (ignored with --offline).")
@click.option("--k", default=DEFAULT_K, show_default=True, type=click.IntRange(min=1))
@pipeline_errors
def chat_command(menu_path, prefs_dir, offline, llm_endpoint, k):
    """Chat over a parsed menu on stdin/stdout.

    Plain lines are queries. `:reject <id>...` regenerates without those
    items, `:quit` exits. Responses end with an `[ids: ...]` line so
    rejects can name items.
    """
    menu = menu_from_json(Path(menu_path).read_bytes())
    if not any(section.items for section in menu.sections):
        click.echo("error: menu has no items", err=True)
        sys.exit(EXIT_EMPTY)
    docs = load_preference_dir(prefs_dir) if prefs_dir else []
    session = new_session("cli", menu=menu, docs=docs)
    config = None if offline else resolve_llm_config(llm_endpoint)

    def show(rec):
        click.echo(rec.text)
        ranked_ids = ", ".join(entry.item_id for entry in rec.ranked)
        click.echo(f"[ids: {ranked_ids}]")
        click.echo("")

    for raw in sys.stdin:
        line = raw.strip()
        if not line:
            continue
        if line == ":quit":
            break
        if line.startswith(":reject"):
            ids = line.split()[1:]
            if not ids:
                click.echo("usage: :reject <item-id>...", err=True)
                continue
            try:
                show(regenerate(session, ids, config=config))
            except KeyError as e:
                click.echo(f"unknown item id {e.args[0]!r}", err=True)
            except NoEligibleItems as e:
                click.echo(f"(no eligible items: {e})", err=True)
            continue
        if line.startswith(":"):
            click.echo(f"unknown command {line.split()[0]!r}", err=True)
            continue
        try:
            show(run_chat(session, line, k=k, config=config))
        except NoEligibleItems as e:
            click.echo(f"(no eligible items: {e})", err=True)


@main.command("serve")
@click.option("--addr", default="127.0.0.1:8080", show_default=True, help="host:port to bind.")
@click.option("--static-dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--profiles-dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Directory of named preference profiles.")
@click.option("--llm-endpoint", default=None, help="Chat-completion URL.")
@click.option("--offline", is_flag=True, help="Run without any LLM endpoint.")
@click.option("--ocr-cmd", default=None, help="External OCR command template with {image}.")
@click.option("--capacity", default=1000, show_default=True, type=click.IntRange(min=1))
def serve(addr, static_dir, profiles_dir, llm_endpoint, offline, ocr_cmd, capacity):
    """Run the HTTP service (and optionally the web UI's static files)."""
    import uvicorn

    from .service import create_app

    host, sep, port_text = addr.rpartition(":")
    if not sep or not port_text.isdigit():
        raise click.UsageError(f"--addr must be host:port, got {addr!r}")
    config = None if offline else resolve_llm_config(llm_endpoint)
    app = create_app(
        profiles_dir=profiles_dir,
        static_dir=static_dir,
        llm_config=config,
        ocr_cmd=resolve_ocr_cmd(ocr_cmd),
        ocr_timeout=DEFAULT_OCR_TIMEOUT,
        capacity=capacity,
    )
    click.echo(f"listening on {host}:{port_text}", err=True)
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")


if __name__ == "__main__":
    main()
