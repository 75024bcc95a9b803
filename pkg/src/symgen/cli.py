"""Command-line front end for the grounded-generation pipeline.

One executable, six subcommands:

``render``
    Render a template file against a data document and report provenance.
``check``
    Pre-flight a template: parse it and resolve every static path and
    variable binding against a document, without rendering.
``generate``
    Run a prompting strategy over a batch of documents and append one
    replayable record per item to a JSONL file.  ``--mock`` replays
    canned completions so whole runs work offline and deterministically.
``corrupt``
    Build a counterfactual obituary corpus from an entity file.
``eval``
    Score a record file with the standard metrics and print the usual
    score table.
``export-view``
    Write one provenance bundle per record for the browser viewer.

Exit codes are uniform across subcommands: 0 clean; 1 for I/O problems or
malformed inputs; 2 for local failures (render errors, failed checks);
3 for parse/global failures.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath
from types import SimpleNamespace
from typing import Callable, Mapping, Sequence

import click

from .data import DataDocument, Path, load_document, resolve_path
from .datasets import (
    FixtureSource,
    build_obituary_corpus,
    entity_from_json,
    entity_to_document,
    fetch_scientists,
    load_property_questions,
    write_corpus,
)
from .errors import (
    EmptyCandidate,
    MalformedInput,
    MixedStrategies,
    ParseError,
    PathResolutionError,
    SymgenError,
    TransportError,
)
from .generate import (
    GenParams,
    GenerationRecord,
    HttpChatClient,
    Message,
    MockChatClient,
    counter_clock,
    load_task,
    read_records,
    record_to_json,
    run_strategy,
    utc_clock,
)
from .metrics import (
    MetricReport,
    bleu,
    error_rates,
    exact_match,
    format_table,
    gsm_score,
    qa_evaluate,
    rouge,
    tokenize,
)
from .render import DEFAULT_POLICY, Env, RenderPolicy, render_result_to_json
from .render import render_or_fallback as _render_or_fallback
from .template import collect_references, parse_template

EXIT_OK = 0
EXIT_IO = 1
EXIT_LOCAL = 2
EXIT_GLOBAL = 3

SCHEMA_VERSION = "symgen_provenance_v1"


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on besides the input payloads.

    Loaded from a JSON config file, overridden field-by-field from the
    command line, and echoed verbatim into every artifact a command
    writes, so any output can be traced back to the exact invocation.
    """

    model_id: str | None = None
    api_base: str | None = None
    credential_env_name: str = "SYMGEN_API_KEY"
    strategy: str | None = None
    n_shots: int = 0
    task_id: str | None = None
    concurrency_limit: int = 4
    seed: int = 0
    data_path: str | None = None
    prompts_path: str | None = None
    out_path: str | None = None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def read_config(path: str | os.PathLike) -> RunConfig:
    """Parse a JSON config file into a RunConfig, rejecting unknown keys."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise MalformedInput("config file must hold a JSON object")
    unknown = sorted(set(payload) - _CONFIG_FIELDS)
    if unknown:
        raise MalformedInput(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**payload)


def _merged_config(config_path: str | None, **overrides) -> RunConfig:
    """Config file values overridden by any explicitly-given CLI options."""
    try:
        config = read_config(config_path) if config_path else RunConfig()
    except (OSError, json.JSONDecodeError, MalformedInput, TypeError) as exc:
        _abort(EXIT_IO, f"cannot read config: {exc}")
    given = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(config, **given)


# --------------------------------------------------------------------------
# Small shared helpers
# --------------------------------------------------------------------------

def _abort(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        _abort(EXIT_IO, f"cannot read {path}: {exc}")


def _load_doc(path: str) -> DataDocument:
    try:
        with open(path, "rb") as fh:
            return load_document(fh.read())
    except OSError as exc:
        _abort(EXIT_IO, f"cannot read {path}: {exc}")
    except (MalformedInput, SymgenError) as exc:
        _abort(EXIT_IO, f"bad document {path}: {exc}")


def _write_json(path: str | os.PathLike, payload: object) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def _load_policy(path: str | None) -> RenderPolicy:
    if path is None:
        return DEFAULT_POLICY
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _abort(EXIT_IO, f"cannot read policy {path}: {exc}")
    if not isinstance(payload, dict):
        _abort(EXIT_IO, "policy file must hold a JSON object")
    allowed = {"undefined_text", "global_failure_text"}
    unknown = sorted(set(payload) - allowed)
    if unknown:
        _abort(EXIT_IO, f"unknown policy keys: {', '.join(unknown)}")
    return RenderPolicy(**payload)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Render, check, generate, corrupt, eval, and export in one tool."""


# --------------------------------------------------------------------------
# render
# --------------------------------------------------------------------------

@main.command("render")
@click.option("--data", "data_path", required=True, help="Data document (JSON).")
@click.option("--template", "template_path", required=True, help="Template file.")
@click.option("--provenance", "provenance_path", default=None,
              help="Also write the full provenance JSON here.")
@click.option("--policy", "policy_path", default=None,
              help="JSON overrides for the failure texts.")
def cmd_render(data_path: str, template_path: str, provenance_path: str | None,
               policy_path: str | None) -> None:
    """Render TEMPLATE against DATA and print the text.

    Exits 0 on a clean render, 2 if any expression failed locally, and 3
    if the template failed to parse at all.
    """
    doc = _load_doc(data_path)
    source = _read_text(template_path)
    policy = _load_policy(policy_path)
    result = _render_or_fallback(source, Env(document=doc, policy=policy))
    click.echo(result.text)
    if provenance_path:
        try:
            _write_json(provenance_path, render_result_to_json(result))
        except OSError as exc:
            _abort(EXIT_IO, f"cannot write {provenance_path}: {exc}")
    if result.global_error is not None:
        sys.exit(EXIT_GLOBAL)
    if result.local_errors:
        sys.exit(EXIT_LOCAL)


# --------------------------------------------------------------------------
# check
# --------------------------------------------------------------------------

def _prefix_text(prefix: tuple) -> str:
    return Path(tuple(prefix)).text() if prefix else "(document root)"


@main.command("check")
@click.option("--data", "data_path", required=True, help="Data document (JSON).")
@click.option("--template", "template_path", required=True, help="Template file.")
def cmd_check(data_path: str, template_path: str) -> None:
    """Statically verify TEMPLATE against DATA without rendering.

    Parses the template, then resolves every referenced path and checks
    that every variable is assigned before it is read.  Each failure is
    listed with the longest path prefix that did resolve.  Exits 0 when
    everything resolves, 2 when anything does not, 3 on a parse failure.
    """
    doc = _load_doc(data_path)
    source = _read_text(template_path)
    try:
        ast = parse_template(source)
    except ParseError as exc:
        click.echo(f"parse failure: {exc}", err=True)
        sys.exit(EXIT_GLOBAL)
    report = collect_references(ast)
    findings: list[str] = []
    for path in report.paths:
        try:
            resolve_path(doc, path)
        except PathResolutionError as exc:
            findings.append(
                f"unresolvable path {path.text()}: {exc} "
                f"(longest resolvable prefix: {_prefix_text(exc.resolved_prefix)})"
            )
    for name, segment in report.unbound:
        findings.append(f"unbound variable {name!r} read in segment {segment}")
    if not findings:
        click.echo(
            f"ok: {len(report.paths)} paths resolve, "
            f"{len(report.var_reads)} variables bound"
        )
        return
    for finding in findings:
        click.echo(finding)
    sys.exit(EXIT_LOCAL)


# --------------------------------------------------------------------------
# generate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkItem:
    """One unit of generation: an id plus optional document and question."""

    id: str
    document: DataDocument | None = None
    question: str | None = None


def _items_from_jsonl(path: str) -> list[WorkItem]:
    items: list[WorkItem] = []
    qmap = None
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if not isinstance(row, dict):
                raise MalformedInput(f"line {i + 1}: expected a JSON object")
            if "entity" in row and "source_id" in row:
                # A counterfactual-corpus item: rebuild its document.
                if qmap is None:
                    qmap = load_property_questions()
                entity = entity_from_json(row["entity"])
                doc = entity_to_document(entity, qmap)
                doc = DataDocument(root=doc.root, source_id=str(row["source_id"]))
                items.append(WorkItem(id=str(row["source_id"]), document=doc))
            elif "document" in row:
                item_id = str(row.get("id", f"item-{i + 1:04d}"))
                doc = load_document(row["document"], source_id=item_id)
                items.append(WorkItem(id=item_id, document=doc,
                                      question=row.get("question")))
            elif set(row) == {"data"}:
                item_id = f"doc-{i + 1:04d}"
                doc = load_document(row, source_id=item_id)
                items.append(WorkItem(id=item_id, document=doc))
            elif "question" in row:
                item_id = str(row.get("id", f"item-{i + 1:04d}"))
                items.append(WorkItem(id=item_id, question=row["question"]))
            else:
                raise MalformedInput(
                    f"line {i + 1}: not a document, corpus item, or question item"
                )
    return items


def _load_items(data_path: str) -> list[WorkItem]:
    """Input documents from a JSON file, a JSONL batch, or a directory."""
    if os.path.isdir(data_path):
        paths = sorted(FsPath(data_path).glob("*.json"))
        if not paths:
            raise MalformedInput(f"no *.json files in {data_path}")
        items = []
        for p in paths:
            doc = load_document(p.read_bytes(), source_id=p.stem)
            items.append(WorkItem(id=p.stem, document=doc))
        return items
    if data_path.endswith(".jsonl"):
        return _items_from_jsonl(data_path)
    with open(data_path, "rb") as fh:
        doc = load_document(fh.read(), source_id=FsPath(data_path).stem)
    return [WorkItem(id=FsPath(data_path).stem, document=doc)]


def _load_mock(path: str, n_items: int) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    completions = payload.get("completions") if isinstance(payload, dict) else None
    if not isinstance(completions, list):
        raise MalformedInput('mock file must hold {"completions": [[...], ...]}')
    if len(completions) != n_items:
        raise MalformedInput(
            f"mock file has {len(completions)} completion lists "
            f"for {n_items} input items"
        )
    scripts = []
    for entry in completions:
        if not isinstance(entry, list) or not all(isinstance(t, str) for t in entry):
            raise MalformedInput("each completions entry must be a list of strings")
        scripts.append(list(entry))
    return scripts


@main.command("generate")
@click.option("--task", "task_id", default=None, help="Task name or task file.")
@click.option("--strategy", default=None,
              help="Prompting strategy: baseline, direct, or indirect.")
@click.option("--shots", "n_shots", type=int, default=None,
              help="How many few-shot examples to include.")
@click.option("--data", "data_path", default=None,
              help="Document file, JSONL batch, or directory of *.json files.")
@click.option("--out", "out_path", default=None, help="Record JSONL to append to.")
@click.option("--mock", "mock_path", default=None,
              help="Canned completions for an offline run.")
@click.option("--config", "config_path", default=None, help="JSON run config.")
@click.option("--model", "model_id", default=None, help="Model identifier.")
@click.option("--api-base", default=None, help="OpenAI-compatible endpoint base.")
@click.option("--credential-env", "credential_env_name", default=None,
              help="Environment variable holding the API key.")
@click.option("--concurrency", "concurrency_limit", type=int, default=None,
              help="Max in-flight items.")
@click.option("--seed", type=int, default=None, help="Run seed echoed into records.")
def cmd_generate(task_id, strategy, n_shots, data_path, out_path, mock_path,
                 config_path, model_id, api_base, credential_env_name,
                 concurrency_limit, seed) -> None:
    """Run one strategy over a batch of documents, one record per item.

    Records are appended to --out as JSONL.  With --mock the client
    replays canned completions (one list per input item, in order) and
    timestamps come from a per-item counter, so reruns are byte
    identical.  Partial progress is kept: items that fail are reported
    and the command exits 1.
    """
    config = _merged_config(
        config_path,
        task_id=task_id, strategy=strategy, n_shots=n_shots,
        data_path=data_path, out_path=out_path, model_id=model_id,
        api_base=api_base, credential_env_name=credential_env_name,
        concurrency_limit=concurrency_limit, seed=seed,
    )
    if config.task_id is None:
        _abort(EXIT_IO, "no task given (use --task or a config file)")
    if config.strategy is None:
        _abort(EXIT_IO, "no strategy given (use --strategy or a config file)")
    if config.data_path is None:
        _abort(EXIT_IO, "no input data given (use --data or a config file)")
    if config.out_path is None:
        _abort(EXIT_IO, "no output path given (use --out or a config file)")

    try:
        task = load_task(config.prompts_path or config.task_id)
    except MalformedInput as exc:
        _abort(EXIT_IO, str(exc))
    if config.strategy not in task.strategies:
        _abort(EXIT_IO,
               f"task {task.task_id!r} does not define strategy "
               f"{config.strategy!r} (has: {', '.join(task.strategies)})")

    try:
        items = _load_items(config.data_path)
    except OSError as exc:
        _abort(EXIT_IO, f"cannot read {config.data_path}: {exc}")
    except (MalformedInput, SymgenError, json.JSONDecodeError, ValueError) as exc:
        _abort(EXIT_IO, f"bad input data: {exc}")

    if mock_path is not None:
        try:
            scripts = _load_mock(mock_path, len(items))
        except OSError as exc:
            _abort(EXIT_IO, f"cannot read {mock_path}: {exc}")
        except (MalformedInput, json.JSONDecodeError) as exc:
            _abort(EXIT_IO, f"bad mock file: {exc}")
        config = dataclasses.replace(config, model_id=config.model_id or "mock")

        def runner(index: int, item: WorkItem) -> GenerationRecord:
            client = MockChatClient(scripts[index], model_id=config.model_id)
            return run_strategy(
                client, task, config.strategy, item.document,
                config.n_shots, item.question,
                record_id=item.id, config=config.as_dict(),
                clock=counter_clock(),
            )
    else:
        if config.api_base is None:
            _abort(EXIT_IO, "no --api-base configured and no --mock file given")
        if config.model_id is None:
            _abort(EXIT_IO, "no --model configured")
        client = HttpChatClient(config.api_base, config.model_id,
                                credential_env=config.credential_env_name)

        def runner(index: int, item: WorkItem) -> GenerationRecord:
            return run_strategy(
                client, task, config.strategy, item.document,
                config.n_shots, item.question,
                record_id=item.id, config=config.as_dict(), clock=utc_clock,
            )

    records: list[GenerationRecord | None] = [None] * len(items)
    failures: list[tuple[str, str]] = []
    workers = max(1, config.concurrency_limit)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(runner, i, item) for i, item in enumerate(items)]
        for i, future in enumerate(futures):
            try:
                records[i] = future.result()
            except (TransportError, ValueError, SymgenError) as exc:
                failures.append((items[i].id, str(exc)))

    written = [r for r in records if r is not None]
    try:
        with open(config.out_path, "a", encoding="utf-8") as fh:
            for record in written:
                fh.write(json.dumps(record_to_json(record), ensure_ascii=False))
                fh.write("\n")
    except OSError as exc:
        _abort(EXIT_IO, f"cannot write {config.out_path}: {exc}")

    click.echo(f"wrote {len(written)} records to {config.out_path}")
    for item_id, message in failures:
        click.echo(f"error: item {item_id} failed: {message}", err=True)
    if failures:
        sys.exit(EXIT_IO)


# --------------------------------------------------------------------------
# corrupt
# --------------------------------------------------------------------------

_ENTITY_KEYS = {"id", "name", "age", "gender", "properties"}


def _load_entities(path: str, min_sitelinks: int):
    """Entities from a raw payload fixture or an already-parsed entity file."""
    if path == "bundled":
        return fetch_scientists(FixtureSource(), min_sitelinks=min_sitelinks)
    with open(path, encoding="utf-8") as fh:
        first = None
        for line in fh:
            if line.strip():
                first = json.loads(line)
                break
    if first is None:
        raise MalformedInput(f"{path} holds no entities")
    if isinstance(first, dict) and "claims" in first:
        return fetch_scientists(FixtureSource(path), min_sitelinks=min_sitelinks)
    if isinstance(first, dict) and _ENTITY_KEYS <= set(first):
        entities = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entities.append(entity_from_json(json.loads(line)))
        return entities
    raise MalformedInput(f"{path}: lines are neither raw payloads nor entities")


@main.command("corrupt")
@click.option("--entities", "entities_path", required=True,
              help='Entity JSONL, raw payload JSONL, or "bundled".')
@click.option("--fractions", default="0.5,1.0", show_default=True,
              help="Comma-separated corruption fractions.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--min-sitelinks", type=int, default=75, show_default=True,
              help="Popularity floor applied to raw payloads.")
@click.option("--out", "out_path", required=True, help="Corpus JSONL to write.")
def cmd_corrupt(entities_path, fractions, seed, min_sitelinks, out_path) -> None:
    """Build a counterfactual corpus: originals plus corrupted copies.

    Every entity contributes its original document and one corrupted
    copy per fraction, each tagged with exactly which properties were
    replaced.
    """
    try:
        parts = [float(x) for x in fractions.split(",") if x.strip()]
    except ValueError:
        _abort(EXIT_IO, f"bad fractions: {fractions!r}")
    try:
        entities = _load_entities(entities_path, min_sitelinks)
    except OSError as exc:
        _abort(EXIT_IO, f"cannot read {entities_path}: {exc}")
    except (MalformedInput, SymgenError, json.JSONDecodeError, ValueError) as exc:
        _abort(EXIT_IO, f"bad entities: {exc}")
    if not entities:
        _abort(EXIT_IO, "no entities survived loading")
    try:
        corpus = build_obituary_corpus(entities, parts, seed=seed)
    except ValueError as exc:
        _abort(EXIT_IO, str(exc))
    try:
        write_corpus(out_path, corpus)
    except OSError as exc:
        _abort(EXIT_IO, f"cannot write {out_path}: {exc}")
    click.echo(
        f"wrote {len(corpus)} items ({len(entities)} entities x "
        f"{1 + len(parts)} variants) to {out_path}"
    )


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------

KNOWN_METRICS = ("bleu", "rouge", "em", "er", "ger", "gsm", "qa")
REFERENCE_METRICS = {"bleu", "rouge", "em", "gsm"}


def _candidate_text(record: GenerationRecord) -> str:
    """What a record is scored on: its render, or raw prose for baselines."""
    if record.render is not None:
        return record.render.text
    return record.raw_outputs[-1]


def _aligned_refs(payload, records: Sequence[GenerationRecord]) -> list[list[str]]:
    """References as one list of strings per record, in record order."""
    if isinstance(payload, dict):
        missing = [r.id for r in records if r.id not in payload]
        if missing:
            raise MalformedInput(f"refs missing for records: {', '.join(missing)}")
        entries = [payload[r.id] for r in records]
    elif isinstance(payload, list):
        if len(payload) != len(records):
            raise MalformedInput(
                f"{len(payload)} references for {len(records)} records"
            )
        entries = payload
    else:
        raise MalformedInput("refs file must hold a JSON list or object")
    out: list[list[str]] = []
    for entry in entries:
        refs = entry if isinstance(entry, list) else [entry]
        if not refs or not all(isinstance(r, str) for r in refs):
            raise MalformedInput("each reference must be a string or list of strings")
        out.append(refs)
    return out


def _entity_view(record: GenerationRecord, key_to_pid: Mapping[str, str]):
    """Duck-typed entity (name + properties) rebuilt from a record's document."""
    root = record.document or {}
    data = root.get("data")
    if not isinstance(data, dict) or "name" not in data:
        raise MalformedInput(
            f"record {record.id}: document is not an entity dictionary"
        )
    properties = {
        key_to_pid[key]: [value]
        for key, value in data.items()
        if key in key_to_pid
    }
    return SimpleNamespace(name=data["name"], properties=properties)


def _scripted_qa_client(answers: Mapping[str, str]) -> Callable[[list[dict]], str]:
    """Answer by matching a scripted question inside the prompt text."""
    ordered = sorted(answers.items(), key=lambda kv: (-len(kv[0]), kv[0]))

    def client(messages: list[dict]) -> str:
        content = messages[-1]["content"]
        for question, answer in ordered:
            if question in content:
                return answer
        return "Unknown"

    return client


def _qa_client_from_config(payload: Mapping) -> Callable[[list[dict]], str]:
    answers = payload.get("mock_answers")
    if answers is not None:
        if not isinstance(answers, dict):
            raise MalformedInput("mock_answers must map question text to answers")
        return _scripted_qa_client(answers)
    api_base = payload.get("api_base")
    model_id = payload.get("model_id")
    if not api_base or not model_id:
        raise MalformedInput(
            "qa config needs either mock_answers or api_base + model_id"
        )
    client = HttpChatClient(
        api_base, model_id,
        credential_env=payload.get("credential_env", "SYMGEN_API_KEY"),
    )

    def ask(messages: list[dict]) -> str:
        msgs = [Message(m["role"], m["content"]) for m in messages]
        return client.complete(msgs, GenParams()).text

    return ask


@main.command("eval")
@click.option("--records", "records_path", required=True, help="Record JSONL.")
@click.option("--metrics", "metrics_arg", required=True,
              help=f"Comma-separated subset of: {', '.join(KNOWN_METRICS)}.")
@click.option("--refs", "refs_path", default=None,
              help="References (JSON list aligned with records, or id map).")
@click.option("--qa-config", "qa_config_path", default=None,
              help="QA scoring config (mock_answers or endpoint settings).")
@click.option("--out", "out_path", default=None, help="Write the report JSON here.")
@click.option("--concurrency", type=int, default=4, show_default=True,
              help="Max in-flight QA questions.")
def cmd_eval(records_path, metrics_arg, refs_path, qa_config_path, out_path,
             concurrency) -> None:
    """Score a record file and print the score table.

    Reference metrics (bleu, rouge, em, gsm) need --refs; er/ger need
    only the records themselves; qa needs --qa-config and replaces the
    reference metrics for its run.
    """
    metrics = [m.strip() for m in metrics_arg.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in KNOWN_METRICS]
    if unknown:
        _abort(EXIT_IO, f"unknown metrics: {', '.join(unknown)}")
    if not metrics:
        _abort(EXIT_IO, "no metrics requested")
    if "qa" in metrics and REFERENCE_METRICS & set(metrics):
        _abort(EXIT_IO, "qa is scored from questions, not references; "
                        "run it separately from bleu/rouge/em/gsm")

    try:
        records = read_records(records_path)
    except OSError as exc:
        _abort(EXIT_IO, f"cannot read {records_path}: {exc}")
    except (KeyError, ValueError, SymgenError, json.JSONDecodeError) as exc:
        _abort(EXIT_IO, f"bad records: {exc}")
    if not records:
        _abort(EXIT_IO, "no records to score")

    refs: list[list[str]] | None = None
    if REFERENCE_METRICS & set(metrics):
        if refs_path is None:
            _abort(EXIT_IO,
                   "reference metrics requested but no --refs file given")
        try:
            with open(refs_path, encoding="utf-8") as fh:
                refs = _aligned_refs(json.load(fh), records)
        except OSError as exc:
            _abort(EXIT_IO, f"cannot read {refs_path}: {exc}")
        except (MalformedInput, json.JSONDecodeError) as exc:
            _abort(EXIT_IO, f"bad refs: {exc}")

    report = MetricReport()
    report.counts["n_records"] = len(records)
    rows: list[dict] = [{"id": r.id} for r in records]

    if "bleu" in metrics:
        scores = []
        for row, record, ref_list in zip(rows, records, refs):
            cand = tokenize(_candidate_text(record))
            try:
                score = bleu(cand, [tokenize(r) for r in ref_list])
            except EmptyCandidate:
                score = 0.0
            row["BLEU"] = score
            scores.append(score)
        report.aggregates["BLEU"] = sum(scores) / len(scores)

    if "rouge" in metrics:
        for label, variant in (("ROUGE-1", 1), ("ROUGE-2", 2), ("ROUGE-L", "L")):
            scores = []
            for row, record, ref_list in zip(rows, records, refs):
                score = rouge(_candidate_text(record), ref_list[0], variant)
                row[label] = score
                scores.append(score)
            report.aggregates[label] = 100.0 * sum(scores) / len(scores)

    if "em" in metrics:
        values = []
        for row, record, ref_list in zip(rows, records, refs):
            value = max(exact_match(_candidate_text(record), r) for r in ref_list)
            row["EM"] = value
            values.append(value)
        report.aggregates["EM"] = 100.0 * sum(values) / len(values)

    if "gsm" in metrics:
        golds = [ref_list[0] for ref_list in refs]
        report.aggregates["GSM"] = gsm_score(records, golds)

    if "er" in metrics or "ger" in metrics:
        try:
            er, ger = error_rates(records)
        except (MixedStrategies, ValueError) as exc:
            _abort(EXIT_IO, str(exc))
        if "er" in metrics:
            report.aggregates["ER"] = er
        if "ger" in metrics:
            report.aggregates["GER"] = ger

    if "qa" in metrics:
        if qa_config_path is None:
            _abort(EXIT_IO, "qa metric requested but no --qa-config file given")
        try:
            with open(qa_config_path, encoding="utf-8") as fh:
                qa_payload = json.load(fh)
            qa_client = _qa_client_from_config(qa_payload)
            qmap = load_property_questions(qa_payload.get("property_questions"))
            key_to_pid = {qmap.key_for(pid): pid for pid in qmap.property_ids}
            stories = [(_entity_view(r, key_to_pid), _candidate_text(r))
                       for r in records]
        except OSError as exc:
            _abort(EXIT_IO, f"cannot read qa config: {exc}")
        except (MalformedInput, json.JSONDecodeError, SymgenError) as exc:
            _abort(EXIT_IO, f"bad qa config: {exc}")
        qa_report = qa_evaluate(stories, qmap, qa_client, concurrency=concurrency)
        report.aggregates.update(qa_report.aggregates)
        report.counts.update(qa_report.counts)
        rows.extend(qa_report.per_item)

    report.per_item = rows
    strategies = {r.strategy for r in records}
    label = strategies.pop() if len(strategies) == 1 else "mixed"
    click.echo(format_table([(label, report.aggregates)]))

    if out_path:
        payload = {
            "config": {
                "records": records_path,
                "metrics": metrics,
                "refs": refs_path,
                "qa_config": qa_config_path,
                "concurrency": concurrency,
            },
            **report.to_json(),
        }
        try:
            _write_json(out_path, payload)
        except OSError as exc:
            _abort(EXIT_IO, f"cannot write {out_path}: {exc}")


# --------------------------------------------------------------------------
# export-view
# --------------------------------------------------------------------------

_SAFE_ID = re.compile(r"[^A-Za-z0-9._:-]")


def _bundle_dir_name(record_id: str, taken: set[str]) -> str:
    base = _SAFE_ID.sub("_", record_id) or "record"
    name, n = base, 1
    while name in taken:
        n += 1
        name = f"{base}-{n}"
    taken.add(name)
    return name


@main.command("export-view")
@click.option("--records", "records_path", required=True, help="Record JSONL.")
@click.option("--out", "out_dir", required=True, help="Bundle directory to write.")
def cmd_export_view(records_path: str, out_dir: str) -> None:
    """Write one viewer bundle per rendered record.

    Each bundle directory holds provenance.json, data.json, and
    meta.json.  Plain-prose records have nothing to inspect and are
    skipped with a warning.
    """
    try:
        records = read_records(records_path)
    except OSError as exc:
        _abort(EXIT_IO, f"cannot read {records_path}: {exc}")
    except (KeyError, ValueError, SymgenError, json.JSONDecodeError) as exc:
        _abort(EXIT_IO, f"bad records: {exc}")

    out = FsPath(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _abort(EXIT_IO, f"cannot create {out_dir}: {exc}")

    taken: set[str] = set()
    bundles: list[str] = []
    skipped = 0
    for record in records:
        if record.render is None:
            click.echo(
                f"warning: skipping {record.id} (plain prose, nothing to inspect)",
                err=True,
            )
            skipped += 1
            continue
        name = _bundle_dir_name(record.id, taken)
        bundle = out / name
        try:
            bundle.mkdir(exist_ok=True)
            _write_json(bundle / "provenance.json",
                        render_result_to_json(record.render))
            _write_json(bundle / "data.json", record.document or {"data": {}})
            _write_json(bundle / "meta.json", {
                "schema_version": SCHEMA_VERSION,
                "id": record.id,
                "task_id": record.task_id,
                "strategy": record.strategy,
                "model_id": record.model_id,
                "n_shots": record.n_shots,
                "question": record.question,
                "started_at": record.started_at,
                "finished_at": record.finished_at,
                "token_usage": dict(record.token_usage),
                "params": dict(record.params),
                "config": dict(record.config),
            })
        except OSError as exc:
            _abort(EXIT_IO, f"cannot write bundle {name}: {exc}")
        bundles.append(name)

    try:
        _write_json(out / "index.json",
                    {"schema_version": SCHEMA_VERSION, "bundles": bundles})
    except OSError as exc:
        _abort(EXIT_IO, f"cannot write index: {exc}")
    click.echo(f"exported {len(bundles)} bundles to {out_dir}"
               + (f" ({skipped} skipped)" if skipped else ""))


if __name__ == "__main__":
    main()
