"""Prompt assembly and the three generation strategies.

Prompts live as JSON assets under ``assets/tasks/<task_id>/task.json``;
this module turns them into chat transcripts, talks to an
OpenAI-compatible chat-completions endpoint (or a scripted stand-in),
and produces replayable generation records.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import requests

from .data import DataDocument, load_document, serialize_document
from .errors import (
    ContextOverflow,
    MalformedInput,
    RateLimited,
    ShotShapeMismatch,
    TransportError,
)
from .render import (
    Env,
    RenderResult,
    render_or_fallback,
    render_result_from_json,
    render_result_to_json,
)

STRATEGIES = ("baseline", "direct", "indirect")

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role: {self.role!r}")


def validate_message_list(messages: Sequence[Message]) -> None:
    """Enforce: one leading system message, then alternating user/assistant."""
    if not messages or messages[0].role != "system":
        raise ValueError("transcript must start with a system message")
    if any(m.role == "system" for m in messages[1:]):
        raise ValueError("transcript must contain exactly one system message")
    for i, message in enumerate(messages[1:]):
        expected = "user" if i % 2 == 0 else "assistant"
        if message.role != expected:
            raise ValueError(
                f"expected {expected!r} at position {i + 1}, got {message.role!r}"
            )


@dataclass(frozen=True)
class Shot:
    """One few-shot exchange; follow-up turns carry the rewrite round."""

    user: str
    assistant: str
    followup_user: str | None = None
    followup_assistant: str | None = None


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    system_template: str
    user_templates: Mapping[str, str]
    strategy_instructions: Mapping[str, str]
    shots: Mapping[str, tuple[Shot, ...]]
    rewrite_instruction: str | None = None
    preamble: tuple[str, str] | None = None

    @property
    def strategies(self) -> tuple[str, ...]:
        return tuple(self.strategy_instructions)


def load_task(name_or_path: str | os.PathLike) -> TaskSpec:
    """Load a task by bundled id (e.g. "synthbio") or from a JSON file path."""
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        text = path.read_text("utf-8")
    else:
        ref = resources.files("symgen.assets").joinpath(f"tasks/{name_or_path}/task.json")
        try:
            text = ref.read_text("utf-8")
        except FileNotFoundError:
            raise MalformedInput(f"unknown task: {name_or_path!r}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"task file is not valid JSON: {exc}") from None

    instructions = raw["strategy_instructions"]
    if not instructions:
        raise MalformedInput("task defines no strategies")
    unknown = set(instructions) - set(STRATEGIES)
    if unknown:
        raise MalformedInput(f"unknown strategies in task: {sorted(unknown)}")

    user_template = raw["user_template"]
    if isinstance(user_template, str):
        user_templates = {strategy: user_template for strategy in instructions}
    else:
        user_templates = dict(user_template)
        if set(user_templates) != set(instructions):
            raise MalformedInput("user_template map must cover exactly the strategies")

    shots: dict[str, tuple[Shot, ...]] = {}
    for strategy, entries in raw["shots"].items():
        if strategy not in instructions:
            raise MalformedInput(f"shots given for undeclared strategy {strategy!r}")
        shots[strategy] = tuple(
            Shot(
                user=e["user"],
                assistant=e["assistant"],
                followup_user=e.get("followup_user"),
                followup_assistant=e.get("followup_assistant"),
            )
            for e in entries
        )

    if "indirect" in instructions and not raw.get("rewrite_instruction"):
        raise MalformedInput("indirect strategy requires a rewrite_instruction")

    preamble = None
    if raw.get("preamble"):
        preamble = (raw["preamble"]["user"], raw["preamble"]["assistant"])

    return TaskSpec(
        task_id=raw["task_id"],
        system_template=raw["system_template"],
        user_templates=user_templates,
        strategy_instructions=dict(instructions),
        shots=shots,
        rewrite_instruction=raw.get("rewrite_instruction"),
        preamble=preamble,
    )


def list_tasks() -> list[str]:
    """Ids of the bundled tasks."""
    root = resources.files("symgen.assets").joinpath("tasks")
    return sorted(entry.name for entry in root.iterdir() if entry.is_dir())


def build_prompt(
    task: TaskSpec,
    strategy: str,
    doc: DataDocument | None = None,
    n_shots: int = 0,
    question: str | None = None,
) -> list[Message]:
    """Assemble the full chat prompt for one item.

    The system message is the task template plus the strategy's
    instruction block.  Shots expand to their turn pairs (indirect shots
    to all four turns).  The final user message embeds the document
    serialized with 2-space indentation and, if the template asks for
    one, the question.
    """
    if strategy not in task.strategy_instructions:
        raise ValueError(f"task {task.task_id!r} does not define strategy {strategy!r}")
    available = task.shots.get(strategy, ())
    if n_shots < 0 or n_shots > len(available):
        raise ValueError(
            f"n_shots={n_shots} but task {task.task_id!r} has "
            f"{len(available)} shots for {strategy!r}"
        )

    messages = [Message("system", task.system_template + task.strategy_instructions[strategy])]
    if task.preamble is not None and n_shots > 0:
        messages.append(Message("user", task.preamble[0]))
        messages.append(Message("assistant", task.preamble[1]))
    for shot in available[:n_shots]:
        messages.append(Message("user", shot.user))
        messages.append(Message("assistant", shot.assistant))
        if strategy == "indirect":
            if shot.followup_user is None or shot.followup_assistant is None:
                raise ShotShapeMismatch(
                    "indirect strategy requires shots with rewrite follow-up turns"
                )
            messages.append(Message("user", shot.followup_user))
            messages.append(Message("assistant", shot.followup_assistant))

    template = task.user_templates[strategy]
    final = template
    if "{json}" in template:
        if doc is None:
            raise ValueError(f"task {task.task_id!r} requires a document")
        final = final.replace("{json}", serialize_document(doc))
    if "{question}" in template:
        if question is None:
            raise ValueError(f"task {task.task_id!r} requires a question")
        final = final.replace("{question}", question)
    elif question is not None:
        raise ValueError(f"task {task.task_id!r} does not accept a question")
    messages.append(Message("user", final))
    validate_message_list(messages)
    return messages


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.0
    max_tokens: int | None = None
    top_p: float | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    retries: int = 0


class ChatClient(Protocol):
    model_id: str

    def complete(self, messages: Sequence[Message], params: GenParams) -> CompletionResponse: ...


class MockChatClient:
    """Scripted client: returns (or raises) queued outputs in order."""

    def __init__(self, outputs: Iterable[str | Exception], model_id: str = "mock"):
        self.model_id = model_id
        self._outputs = list(outputs)
        self._lock = threading.Lock()
        self.calls: list[list[Message]] = []

    def complete(self, messages: Sequence[Message], params: GenParams) -> CompletionResponse:
        with self._lock:
            self.calls.append(list(messages))
            if not self._outputs:
                raise TransportError("mock client exhausted")
            item = self._outputs.pop(0)
        if isinstance(item, Exception):
            raise item
        prompt_tokens = sum(len(m.content.split()) for m in messages)
        return CompletionResponse(
            text=item,
            prompt_tokens=prompt_tokens,
            completion_tokens=len(item.split()),
        )


class HttpChatClient:
    """OpenAI-compatible chat-completions client with retry/backoff.

    Credentials come from the environment variable named by
    ``credential_env`` (sent as a bearer token when set).  Rate limits
    and server errors are retried with exponential backoff; context
    overflows are surfaced immediately.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        *,
        credential_env: str = "SYMGEN_API_KEY",
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.credential_env = credential_env
        self._session = session or requests.Session()
        self._sleep = sleep

    def complete(self, messages: Sequence[Message], params: GenParams) -> CompletionResponse:
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.credential_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body: dict = {
            "model": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
        }
        if params.max_tokens is not None:
            body["max_tokens"] = params.max_tokens
        if params.top_p is not None:
            body["top_p"] = params.top_p

        last_error: str = "request not attempted"
        rate_limited = False
        for attempt in range(params.max_retries + 1):
            if attempt:
                self._sleep(params.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=params.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                rate_limited = False
                continue
            if resp.status_code == 429:
                last_error = "rate limited"
                rate_limited = True
                continue
            if resp.status_code >= 500:
                last_error = f"server error {resp.status_code}"
                rate_limited = False
                continue
            payload = resp.json()
            if resp.status_code != 200:
                error = payload.get("error", {}) if isinstance(payload, dict) else {}
                message = str(error.get("message", resp.text))
                if error.get("code") == "context_length_exceeded" or "context length" in message:
                    raise ContextOverflow(message)
                raise TransportError(f"request failed ({resp.status_code}): {message}")
            choice = payload["choices"][0]
            usage = payload.get("usage", {})
            return CompletionResponse(
                text=choice["message"]["content"],
                prompt_tokens=usage.get("prompt_tokens", 0),
                completion_tokens=usage.get("completion_tokens", 0),
                retries=attempt,
            )
        if rate_limited:
            raise RateLimited(f"giving up after {params.max_retries} retries: {last_error}")
        raise TransportError(f"giving up after {params.max_retries} retries: {last_error}")


def utc_clock() -> str:
    return datetime.now(timezone.utc).isoformat()


def counter_clock(start: int = 0) -> Callable[[], str]:
    """Deterministic clock for reproducible offline runs."""
    state = {"n": start}
    lock = threading.Lock()

    def tick() -> str:
        with lock:
            n = state["n"]
            state["n"] += 1
        return datetime.fromtimestamp(n, tz=timezone.utc).isoformat()

    return tick


@dataclass(frozen=True)
class GenerationRecord:
    """One item's full transcript, outputs, and (optional) render."""

    id: str
    task_id: str
    strategy: str
    model_id: str
    n_shots: int
    question: str | None
    messages: tuple[Message, ...]
    raw_outputs: tuple[str, ...]
    render: RenderResult | None
    document: dict | None
    started_at: str
    finished_at: str
    token_usage: Mapping[str, int] = field(default_factory=dict)
    params: Mapping[str, object] = field(default_factory=dict)
    config: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy: {self.strategy!r}")
        if self.strategy == "indirect" and self.render is not None:
            if len(self.raw_outputs) != 2:
                raise ValueError("indirect records carry exactly two raw outputs")
        if self.strategy == "baseline" and self.render is not None:
            raise ValueError("plain-prose records have no render")


def run_strategy(
    client: ChatClient,
    task: TaskSpec,
    strategy: str,
    doc: DataDocument | None = None,
    n_shots: int = 0,
    question: str | None = None,
    *,
    record_id: str | None = None,
    params: GenParams | None = None,
    config: Mapping[str, object] | None = None,
    clock: Callable[[], str] = utc_clock,
) -> GenerationRecord:
    """Run one item end to end and return its replayable record.

    Baseline stops after one completion and has no render; direct
    renders its single completion; indirect asks for prose, then sends
    the rewrite instruction and renders the second completion.  If the
    client fails mid-run the raised error carries the partial record as
    ``partial_record``.
    """
    params = params or GenParams()
    started = clock()
    messages = build_prompt(task, strategy, doc, n_shots, question)
    transcript = list(messages)
    raw_outputs: list[str] = []
    usage = {"prompt_tokens": 0, "completion_tokens": 0, "retries": 0}

    def finish(render: RenderResult | None) -> GenerationRecord:
        return GenerationRecord(
            id=record_id or f"{task.task_id}-{strategy}",
            task_id=task.task_id,
            strategy=strategy,
            model_id=client.model_id,
            n_shots=n_shots,
            question=question,
            messages=tuple(transcript),
            raw_outputs=tuple(raw_outputs),
            render=render,
            document=dict(doc.root) if doc is not None else None,
            started_at=started,
            finished_at=clock(),
            token_usage=dict(usage),
            params=asdict(params),
            config=dict(config or {}),
        )

    def ask() -> str:
        try:
            response = client.complete(transcript, params)
        except TransportError as exc:
            exc.partial_record = finish(None)  # type: ignore[attr-defined]
            raise
        usage["prompt_tokens"] += response.prompt_tokens
        usage["completion_tokens"] += response.completion_tokens
        usage["retries"] += response.retries
        transcript.append(Message("assistant", response.text))
        raw_outputs.append(response.text)
        return response.text

    ask()
    if strategy == "indirect":
        assert task.rewrite_instruction is not None  # enforced by load_task
        transcript.append(Message("user", task.rewrite_instruction))
        ask()

    if strategy == "baseline":
        return finish(None)
    env = Env(document=doc if doc is not None else load_document({"data": {}}))
    return finish(render_or_fallback(raw_outputs[-1], env))


def replay_record(record: GenerationRecord) -> RenderResult | None:
    """Re-render the record's final output offline; None for plain prose."""
    if record.strategy == "baseline":
        return None
    root = record.document if record.document is not None else {"data": {}}
    env = Env(document=load_document(root))
    return render_or_fallback(record.raw_outputs[-1], env)


def record_to_json(record: GenerationRecord) -> dict:
    return {
        "id": record.id,
        "task_id": record.task_id,
        "strategy": record.strategy,
        "model_id": record.model_id,
        "n_shots": record.n_shots,
        "question": record.question,
        "messages": [{"role": m.role, "content": m.content} for m in record.messages],
        "raw_outputs": list(record.raw_outputs),
        "render": render_result_to_json(record.render) if record.render else None,
        "document": record.document,
        "started_at": record.started_at,
        "finished_at": record.finished_at,
        "token_usage": dict(record.token_usage),
        "params": dict(record.params),
        "config": dict(record.config),
    }


def record_from_json(payload: Mapping) -> GenerationRecord:
    return GenerationRecord(
        id=payload["id"],
        task_id=payload["task_id"],
        strategy=payload["strategy"],
        model_id=payload["model_id"],
        n_shots=payload["n_shots"],
        question=payload.get("question"),
        messages=tuple(Message(m["role"], m["content"]) for m in payload["messages"]),
        raw_outputs=tuple(payload["raw_outputs"]),
        render=render_result_from_json(payload["render"]) if payload.get("render") else None,
        document=payload.get("document"),
        started_at=payload["started_at"],
        finished_at=payload["finished_at"],
        token_usage=dict(payload.get("token_usage", {})),
        params=dict(payload.get("params", {})),
        config=dict(payload.get("config", {})),
    )


def write_records(path: str | os.PathLike, records: Iterable[GenerationRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), ensure_ascii=False))
            fh.write("\n")


def read_records(path: str | os.PathLike) -> list[GenerationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json(json.loads(line)))
    return records
