"""Text-generation metrics: BLEU, ROUGE, exact match, and error rates.

Own implementations with declared tokenization and smoothing — scores
are reproducible from this file alone, with no external scorer in the
loop.  Also hosts the question-answering evaluation loop for grounded
biography text and numeric answer scoring for word problems.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Mapping, Protocol, Sequence

from .errors import EmptyCandidate, MixedStrategies
from .render import RenderResult, extract_final_answer

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

#: Epsilon substituted for zero clipped-precision counts in BLEU.
BLEU_EPSILON = 1e-9


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs (underscore splits too)."""
    return _TOKEN_RE.findall(text.lower())


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Sentence BLEU in [0, 100].

    Geometric mean of clipped n-gram precisions for n = 1..max_n times
    the brevity penalty.  Orders for which the candidate has no n-grams
    at all are skipped; orders with n-grams but zero matches contribute
    an epsilon precision.  The reference length is the one closest to
    the candidate length (ties go to the shorter reference).
    """
    cand = list(candidate)
    if not cand:
        raise EmptyCandidate("BLEU candidate must be non-empty")
    refs = [list(ref) for ref in references]
    if not refs:
        raise ValueError("at least one reference is required")

    log_precisions: list[float] = []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        total = sum(cand_counts.values())
        if total == 0:
            continue
        max_ref_counts: Counter = Counter()
        for ref in refs:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_ref_counts[gram]:
                    max_ref_counts[gram] = count
        clipped = sum(min(count, max_ref_counts[gram]) for gram, count in cand_counts.items())
        precision = clipped / total if clipped else BLEU_EPSILON
        log_precisions.append(math.log(precision))

    geo_mean = math.exp(sum(log_precisions) / len(log_precisions))
    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda length: (abs(length - c), length))
    brevity = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * geo_mean * brevity


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(candidate: str, reference: str, variant: int | str = 1) -> float:
    """ROUGE F1 in [0, 1] for variant 1, 2, or "L".

    Tokenization lowercases and splits on non-alphanumeric runs; no
    stemming.  Empty inputs score 0.
    """
    key = str(variant).upper()
    if key not in ("1", "2", "L"):
        raise ValueError(f"unknown ROUGE variant: {variant!r}")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    if key == "L":
        lcs = _lcs_length(cand, ref)
        return _f1(lcs / len(cand), lcs / len(ref))
    n = int(key)
    cand_counts = _ngram_counts(cand, n)
    ref_counts = _ngram_counts(ref, n)
    cand_total = sum(cand_counts.values())
    ref_total = sum(ref_counts.values())
    if cand_total == 0 or ref_total == 0:
        return 0.0
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return _f1(overlap / cand_total, overlap / ref_total)


def normalize_answer(text: str) -> str:
    """Lowercase, trim, and strip one terminal period."""
    out = text.strip().lower()
    if out.endswith("."):
        out = out[:-1].rstrip()
    return out


def exact_match(pred: str, gold: str) -> int:
    """1 iff the normalized strings are equal, else 0."""
    return int(normalize_answer(pred) == normalize_answer(gold))


def is_unknown(answer: str) -> bool:
    """True iff the answer normalizes to "unknown" (abstention)."""
    return normalize_answer(answer) == "unknown"


class _RecordLike(Protocol):
    strategy: str
    render: RenderResult | None


def error_rates(records: Sequence[_RecordLike]) -> tuple[float, float]:
    """(ER%, GER%) over all records; the two buckets are disjoint.

    ER counts records with at least one local error and no global
    error; GER counts records whose render failed globally.  Records
    without a render (plain-prose strategy) are not admissible.
    """
    if not records:
        raise ValueError("no records to score")
    for record in records:
        if record.render is None:
            raise MixedStrategies(
                "records without a rendering stage cannot be error-rated"
            )
    n = len(records)
    n_global = sum(1 for r in records if r.render.global_error is not None)
    n_local = sum(
        1
        for r in records
        if r.render.global_error is None and r.render.local_errors
    )
    return 100.0 * n_local / n, 100.0 * n_global / n


@dataclass(frozen=True)
class QaItem:
    """One scored question against one rendered story."""

    entity_id: str
    property_id: str
    question: str
    gold: str
    predicted: str
    is_unknown: bool

    def __post_init__(self) -> None:
        if self.is_unknown != is_unknown(self.predicted):
            raise ValueError("is_unknown flag contradicts the predicted answer")


@dataclass
class MetricReport:
    """Per-item scores plus aggregate percentages and bucket counts."""

    per_item: list[dict] = field(default_factory=list)
    aggregates: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_item": self.per_item,
            "aggregates": self.aggregates,
            "counts": self.counts,
        }


class QuestionSource(Protocol):
    def question_for(self, property_id: str, entity_name: str) -> str: ...


def _load_qa_prompt() -> dict:
    text = resources.files("symgen.assets").joinpath("qa_prompt.json").read_text("utf-8")
    return json.loads(text)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def qa_evaluate(
    stories: Sequence[tuple[object, str]],
    qmap: QuestionSource,
    qa_client: Callable[[list[dict]], str],
    *,
    concurrency: int = 4,
) -> MetricReport:
    """Ask one question per present property of each entity and score answers.

    ``stories`` pairs an entity (anything with ``name`` and
    ``properties``: a map of property id to a non-empty list of values,
    whose first element is gold) with its rendered text.  ``qa_client``
    takes a chat message list and returns the reply text; client
    exceptions leave that item unscored and excluded from denominators.
    Aggregates are percentages; conditioned metrics cover only items
    where the client did not abstain and are absent if it always did.
    """
    prompt = _load_qa_prompt()
    tasks: list[tuple[str, str, str, str]] = []
    messages_per_task: list[list[dict]] = []
    for entity, story in stories:
        for property_id, values in entity.properties.items():
            if not values:
                continue
            question = qmap.question_for(property_id, entity.name)
            tasks.append((entity.name, property_id, question, str(values[0])))
            user = prompt["user"].replace("{story}", story).replace("{question}", question)
            messages_per_task.append(
                [
                    {"role": "system", "content": prompt["system"]},
                    {"role": "user", "content": user},
                ]
            )

    report = MetricReport()
    n_failed = 0
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [pool.submit(qa_client, messages) for messages in messages_per_task]
        for (entity_id, property_id, question, gold), future in zip(tasks, futures):
            try:
                predicted = future.result()
            except Exception:
                n_failed += 1
                continue
            item = QaItem(
                entity_id=entity_id,
                property_id=property_id,
                question=question,
                gold=gold,
                predicted=predicted,
                is_unknown=is_unknown(predicted),
            )
            report.per_item.append(
                {
                    "entity_id": item.entity_id,
                    "property_id": item.property_id,
                    "question": item.question,
                    "gold": item.gold,
                    "predicted": item.predicted,
                    "is_unknown": item.is_unknown,
                    "em": exact_match(predicted, gold),
                    "rouge_1": rouge(predicted, gold, 1),
                    "rouge_2": rouge(predicted, gold, 2),
                    "rouge_l": rouge(predicted, gold, "L"),
                }
            )

    scored = report.per_item
    report.counts = {
        "n_items": len(scored),
        "n_unknown": sum(1 for item in scored if item["is_unknown"]),
        "n_failed": n_failed,
        "n_local_error_items": 0,
        "n_global_error_items": 0,
    }
    if scored:
        report.aggregates["UR"] = 100.0 * report.counts["n_unknown"] / len(scored)
        report.aggregates["EM"] = 100.0 * _mean([i["em"] for i in scored])
        report.aggregates["ROUGE-1"] = 100.0 * _mean([i["rouge_1"] for i in scored])
        report.aggregates["ROUGE-2"] = 100.0 * _mean([i["rouge_2"] for i in scored])
        report.aggregates["ROUGE-L"] = 100.0 * _mean([i["rouge_l"] for i in scored])
        answered = [i for i in scored if not i["is_unknown"]]
        if answered:
            report.aggregates["cond-EM"] = 100.0 * _mean([i["em"] for i in answered])
            report.aggregates["cond-ROUGE-1"] = 100.0 * _mean([i["rouge_1"] for i in answered])
            report.aggregates["cond-ROUGE-2"] = 100.0 * _mean([i["rouge_2"] for i in answered])
            report.aggregates["cond-ROUGE-L"] = 100.0 * _mean([i["rouge_l"] for i in answered])
    return report


_NUMERIC_STRIP = re.compile(r"[,$]")


def parse_numeric_answer(text: str) -> int | float | None:
    """Parse a final answer as a number; None if it is not one.

    Commas and dollar signs are stripped, as is one trailing period.
    """
    s = _NUMERIC_STRIP.sub("", text.strip())
    if s.endswith("."):
        s = s[:-1]
    s = s.strip()
    if not s:
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        value = float(s)
    except ValueError:
        return None
    if math.isnan(value) or math.isinf(value):
        return None
    return value


def _answers_equal(pred: int | float, gold: int | float) -> bool:
    if isinstance(pred, int) and isinstance(gold, int):
        return pred == gold
    return math.isclose(pred, gold, rel_tol=1e-6, abs_tol=1e-9)


def gsm_score(records: Sequence[_RecordLike], gold_answers: Sequence[str]) -> float:
    """Accuracy% of final numeric answers against gold answer strings.

    The answer is whatever follows the last "Answer:" marker in the
    rendered text; missing markers, global failures, and unparseable
    numbers all count as wrong.
    """
    if len(records) != len(gold_answers):
        raise ValueError("records and gold answers must align")
    if not records:
        raise ValueError("no records to score")
    correct = 0
    for record, gold_text in zip(records, gold_answers):
        if record.render is None:
            continue
        extracted = extract_final_answer(record.render)
        if extracted is None:
            continue
        pred = parse_numeric_answer(extracted)
        gold = parse_numeric_answer(gold_text)
        if pred is None or gold is None:
            continue
        if _answers_equal(pred, gold):
            correct += 1
    return 100.0 * correct / len(records)


#: Canonical column order for score tables.
TABLE_COLUMNS = (
    "BLEU",
    "ROUGE-1",
    "ROUGE-2",
    "ROUGE-L",
    "EM",
    "UR",
    "ER",
    "GER",
)


def format_table(
    rows: Sequence[tuple[str, Mapping[str, float | None]]],
    columns: Sequence[str] | None = None,
) -> str:
    """Aligned text table of metric rows; missing cells render as "-".

    Columns default to the canonical order filtered to keys that appear
    in at least one row, followed by any extra keys in first-seen order.
    """
    if columns is None:
        seen: dict[str, None] = {}
        for _, aggregates in rows:
            for key in aggregates:
                seen[key] = None
        columns = [c for c in TABLE_COLUMNS if c in seen]
        columns += [c for c in seen if c not in TABLE_COLUMNS]

    def cell(aggregates: Mapping[str, float | None], key: str) -> str:
        value = aggregates.get(key)
        if value is None:
            return "-"
        return f"{value:.2f}"

    table = [["strategy", *columns]]
    for label, aggregates in rows:
        table.append([label, *(cell(aggregates, key) for key in columns)])
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for row in table:
        lines.append("  ".join(text.ljust(width) for text, width in zip(row, widths)).rstrip())
    return "\n".join(lines)
