"""symgen: symbolically grounded text generation with span-level provenance.

The package splits into a document model (:mod:`symgen.data`), a small
reference language (:mod:`symgen.template`), a provenance-tracking renderer
(:mod:`symgen.render`), prompt/transport plumbing (:mod:`symgen.generate`),
dataset builders (:mod:`symgen.datasets`), metrics (:mod:`symgen.metrics`),
and a command-line front end (:mod:`symgen.cli`).
"""

from .data import (
    DataDocument,
    Path,
    SlugRules,
    coerce_numeric_fields,
    keyify_records,
    load_document,
    resolve_path,
    serialize_document,
    slugify,
)
from .datasets import (
    CorpusItem,
    CorruptionSpec,
    EntityDict,
    FinancialItem,
    FixtureSource,
    PropertyQuestionMap,
    WikidataApiSource,
    build_obituary_corpus,
    corrupt_entities,
    entity_to_document,
    fetch_scientists,
    load_financial_fixture,
    load_property_questions,
    read_corpus,
    write_corpus,
)
from .errors import SymgenError
from .generate import (
    GenParams,
    GenerationRecord,
    HttpChatClient,
    Message,
    MockChatClient,
    Shot,
    TaskSpec,
    build_prompt,
    list_tasks,
    load_task,
    read_records,
    replay_record,
    run_strategy,
    write_records,
)
from .metrics import (
    MetricReport,
    QaItem,
    bleu,
    error_rates,
    exact_match,
    format_table,
    gsm_score,
    qa_evaluate,
    rouge,
)
from .render import (
    Env,
    RenderPolicy,
    RenderResult,
    evaluate_expr,
    extract_final_answer,
    render,
    render_or_fallback,
    render_result_from_json,
    render_result_to_json,
)
from .template import (
    TemplateAst,
    collect_references,
    format_template,
    parse_template,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "CorpusItem",
    "CorruptionSpec",
    "DataDocument",
    "EntityDict",
    "Env",
    "FinancialItem",
    "FixtureSource",
    "GenParams",
    "GenerationRecord",
    "HttpChatClient",
    "Message",
    "MetricReport",
    "MockChatClient",
    "Path",
    "PropertyQuestionMap",
    "QaItem",
    "RenderPolicy",
    "RenderResult",
    "Shot",
    "SlugRules",
    "SymgenError",
    "TaskSpec",
    "TemplateAst",
    "WikidataApiSource",
    "__version__",
    "bleu",
    "build_obituary_corpus",
    "build_prompt",
    "coerce_numeric_fields",
    "collect_references",
    "corrupt_entities",
    "entity_to_document",
    "error_rates",
    "evaluate_expr",
    "exact_match",
    "extract_final_answer",
    "fetch_scientists",
    "format_table",
    "format_template",
    "gsm_score",
    "keyify_records",
    "list_tasks",
    "load_document",
    "load_financial_fixture",
    "load_property_questions",
    "load_task",
    "parse_template",
    "qa_evaluate",
    "read_corpus",
    "read_records",
    "render",
    "render_or_fallback",
    "render_result_from_json",
    "render_result_to_json",
    "replay_record",
    "resolve_path",
    "rouge",
    "run_strategy",
    "serialize_document",
    "slugify",
    "tokenize",
    "write_corpus",
    "write_records",
]
