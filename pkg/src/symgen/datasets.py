"""Evaluation datasets: scientist ingestion, counterfactual corruption,
the property/question config, and the financial question fixture.

Scientist entities come from a frozen fixture bundled with the package
(or live from a Wikidata SPARQL endpoint); counterfactual copies replace
property values with other values observed in the corpus, so corrupted
documents stay in-distribution while diverging from world knowledge.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
from dataclasses import dataclass, replace
from datetime import date
from importlib import resources
from typing import Iterable, Iterator, Mapping, Protocol, Sequence

import requests

from .data import DataDocument, Value, coerce_numeric_fields, load_document, slugify
from .errors import MalformedFixture, SchemaDrift, TransportError

logger = logging.getLogger(__name__)

#: Fields of an entity document that corruption never touches.
PROTECTED_FIELDS = frozenset({"name", "age", "gender"})

#: Company-overview fields that are numeric in nature and arrive as strings
#: from the API; date fields are listed so their "None" sentinel becomes
#: Null (real dates stay strings and are reported as coercion issues).
FINANCIAL_NUMERIC_FIELDS = (
    "CIK",
    "MarketCapitalization",
    "EBITDA",
    "PERatio",
    "PEGRatio",
    "BookValue",
    "DividendPerShare",
    "DividendYield",
    "EPS",
    "RevenuePerShareTTM",
    "ProfitMargin",
    "OperatingMarginTTM",
    "ReturnOnAssetsTTM",
    "ReturnOnEquityTTM",
    "RevenueTTM",
    "GrossProfitTTM",
    "DilutedEPSTTM",
    "QuarterlyEarningsGrowthYOY",
    "QuarterlyRevenueGrowthYOY",
    "AnalystTargetPrice",
    "TrailingPE",
    "ForwardPE",
    "PriceToSalesRatioTTM",
    "PriceToBookRatio",
    "EVToRevenue",
    "EVToEBITDA",
    "Beta",
    "52WeekHigh",
    "52WeekLow",
    "50DayMovingAverage",
    "200DayMovingAverage",
    "SharesOutstanding",
    "DividendDate",
    "ExDividendDate",
)


# --------------------------------------------------------------------------
# Property/question config
# --------------------------------------------------------------------------

N_OBITUARY_PROPERTIES = 26


@dataclass(frozen=True)
class PropertyQuestionMap:
    """The 26 entity properties with their names and QA question templates."""

    entries: Mapping[str, Mapping[str, str]]

    def __post_init__(self) -> None:
        if len(self.entries) != N_OBITUARY_PROPERTIES:
            raise MalformedFixture(
                f"property map must list exactly {N_OBITUARY_PROPERTIES} "
                f"properties, got {len(self.entries)}"
            )
        for pid, entry in self.entries.items():
            if not (pid.startswith("P") and pid[1:].isdigit()):
                raise MalformedFixture(f"bad property id: {pid!r}")
            if not entry.get("name"):
                raise MalformedFixture(f"{pid}: missing property name")
            if entry.get("question", "").count("X") != 1:
                raise MalformedFixture(f"{pid}: question needs one X placeholder")

    @property
    def property_ids(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def name_for(self, property_id: str) -> str:
        return self.entries[property_id]["name"]

    def key_for(self, property_id: str) -> str:
        """The document key for a property (its name, slugified)."""
        return slugify(self.name_for(property_id))

    def question_for(self, property_id: str, entity_name: str) -> str:
        return self.entries[property_id]["question"].replace("X", entity_name, 1)


def load_property_questions(path: str | os.PathLike | None = None) -> PropertyQuestionMap:
    if path is None:
        text = resources.files("symgen.assets").joinpath("obituary_properties.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return PropertyQuestionMap(json.loads(text))


# --------------------------------------------------------------------------
# Entities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EntityDict:
    """One person: the protected trio plus single-valued properties."""

    id: str
    name: str
    age: int
    gender: str
    properties: Mapping[str, Value]

    def __post_init__(self) -> None:
        if not self.name or not self.gender:
            raise ValueError("name and gender must be non-empty")
        if type(self.age) is not int or self.age < 0:
            raise ValueError(f"age must be a non-negative int, got {self.age!r}")
        for pid, value in self.properties.items():
            if type(value) not in (str, int, float) or value == "":
                raise ValueError(f"{pid}: property values must be scalars, got {value!r}")


class EntitySource(Protocol):
    """Yields raw entity payloads (fixture rows or API responses)."""

    def entities(self, property_ids: Sequence[str]) -> Iterable[Mapping]: ...


class FixtureSource:
    """Reads raw entity payloads from a JSONL fixture (bundled by default)."""

    def __init__(self, path: str | os.PathLike | None = None):
        self._path = path

    def entities(self, property_ids: Sequence[str]) -> Iterator[Mapping]:
        if self._path is None:
            text = resources.files("symgen.assets").joinpath("scientists_fixture.jsonl").read_text("utf-8")
        else:
            with open(self._path, encoding="utf-8") as fh:
                text = fh.read()
        for line in text.splitlines():
            if line.strip():
                yield json.loads(line)


class WikidataApiSource:
    """Live SPARQL source: people whose occupation is a scientist subtype.

    One query returns (entity, property, value) rows with labels; rows are
    grouped into the same payload shape the fixture uses.
    """

    QUERY = """\
SELECT ?item ?itemLabel ?genderLabel ?birth ?death ?sitelinks ?prop ?valueLabel WHERE {{
  ?item wdt:P106/wdt:P279* wd:Q901 .
  ?item wikibase:sitelinks ?sitelinks .
  ?item wdt:P569 ?birth .
  ?item wdt:P570 ?death .
  ?item wdt:P21 ?gender .
  ?item ?prop ?value .
  VALUES ?prop {{ {props} }}
  FILTER(?sitelinks >= {min_sitelinks})
  SERVICE wikibase:label {{ bd:serviceParam wikibase:language "en" . }}
}}"""
    PROP_PREFIX = "http://www.wikidata.org/prop/direct/"
    ENTITY_PREFIX = "http://www.wikidata.org/entity/"

    def __init__(
        self,
        base_url: str = "https://query.wikidata.org",
        *,
        min_sitelinks: int = 0,
        session: requests.Session | None = None,
        timeout: float = 120.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.min_sitelinks = min_sitelinks
        self._session = session or requests.Session()
        self._timeout = timeout

    def entities(self, property_ids: Sequence[str]) -> Iterator[Mapping]:
        query = self.QUERY.format(
            props=" ".join(f"wdt:{pid}" for pid in property_ids),
            min_sitelinks=self.min_sitelinks,
        )
        try:
            resp = self._session.get(
                f"{self.base_url}/sparql",
                params={"query": query, "format": "json"},
                timeout=self._timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(f"sparql endpoint returned {resp.status_code}")
        try:
            bindings = resp.json()["results"]["bindings"]
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaDrift(f"unexpected sparql response shape: {exc}") from None

        payloads: dict[str, dict] = {}
        for row in bindings:
            try:
                qid = row["item"]["value"].removeprefix(self.ENTITY_PREFIX)
                payload = payloads.setdefault(
                    qid,
                    {
                        "id": qid,
                        "name": row["itemLabel"]["value"],
                        "gender": row["genderLabel"]["value"],
                        "birth_date": row["birth"]["value"][:10],
                        "death_date": row["death"]["value"][:10],
                        "sitelinks": int(row["sitelinks"]["value"]),
                        "claims": {},
                    },
                )
                pid = row["prop"]["value"].removeprefix(self.PROP_PREFIX)
                values = payload["claims"].setdefault(pid, [])
                label = row["valueLabel"]["value"]
                if label not in values:
                    values.append(label)
            except (KeyError, TypeError, ValueError) as exc:
                logger.warning("skipping malformed sparql row: %s", exc)
        yield from payloads.values()


def _age_at_death(birth: str, death: str) -> int:
    born = date.fromisoformat(birth)
    died = date.fromisoformat(death)
    if died < born:
        raise ValueError("death precedes birth")
    return died.year - born.year - ((died.month, died.day) < (born.month, born.day))


def _parse_payload(payload: Mapping, property_ids: Sequence[str]) -> EntityDict:
    for key in ("id", "name", "gender", "birth_date", "death_date", "sitelinks", "claims"):
        if key not in payload:
            raise SchemaDrift(f"payload missing {key!r}")
    claims = payload["claims"]
    if not isinstance(claims, Mapping):
        raise SchemaDrift("claims must be an object")
    try:
        age = _age_at_death(payload["birth_date"], payload["death_date"])
    except ValueError as exc:
        raise SchemaDrift(f"bad dates: {exc}") from None

    wanted = set(property_ids)
    # keep only the first value of each claim, in ascending P-code order
    properties: dict[str, Value] = {}
    for pid in sorted(claims, key=lambda p: int(p[1:]) if p[1:].isdigit() else -1):
        if pid not in wanted:
            continue
        values = claims[pid]
        if not isinstance(values, list) or not values:
            raise SchemaDrift(f"{pid}: claim values must be a non-empty list")
        properties[pid] = values[0]
    try:
        return EntityDict(
            id=str(payload["id"]),
            name=payload["name"],
            age=age,
            gender=payload["gender"],
            properties=properties,
        )
    except ValueError as exc:
        raise SchemaDrift(str(exc)) from None


def fetch_scientists(
    source: EntitySource,
    min_sitelinks: int = 75,
    property_ids: Sequence[str] | None = None,
) -> list[EntityDict]:
    """Parse and filter raw payloads into entities.

    Entities below the sitelink threshold are dropped; payloads that do
    not match the expected shape are logged and skipped.
    """
    if property_ids is None:
        property_ids = load_property_questions().property_ids
    entities = []
    for payload in source.entities(property_ids):
        try:
            sitelinks = payload["sitelinks"]
            if not (isinstance(sitelinks, int) and not isinstance(sitelinks, bool)):
                raise SchemaDrift(f"sitelinks must be an int, got {sitelinks!r}")
            if sitelinks < min_sitelinks:
                continue
            entities.append(_parse_payload(payload, property_ids))
        except (SchemaDrift, KeyError, TypeError) as exc:
            logger.warning("skipping entity %s: %s", payload.get("id", "?"), exc)
    return entities


def entity_to_document(entity: EntityDict, qmap: PropertyQuestionMap) -> DataDocument:
    """The entity as a renderable document: protected trio, then properties."""
    data: dict[str, Value] = {
        "name": entity.name,
        "age": entity.age,
        "gender": entity.gender,
    }
    for pid, value in entity.properties.items():
        data[qmap.key_for(pid)] = value
    return load_document({"data": data}, source_id=entity.id)


# --------------------------------------------------------------------------
# Counterfactual corruption
# --------------------------------------------------------------------------

ALLOWED_FRACTIONS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class CorruptionSpec:
    fraction: float
    seed: int
    protected_fields: frozenset[str] = PROTECTED_FIELDS

    def __post_init__(self) -> None:
        if self.fraction not in ALLOWED_FRACTIONS:
            raise ValueError(f"fraction must be one of {ALLOWED_FRACTIONS}")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.protected_fields != PROTECTED_FIELDS:
            raise ValueError("name, age and gender are always protected")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _derived_rng(*parts: object) -> random.Random:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _shuffled(items: Iterable[str], rng: random.Random) -> list[str]:
    # Fisher-Yates on top of rng.random(), the one generator primitive with
    # a cross-version stability guarantee, so seeds reproduce anywhere.
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def _pick(values: Sequence[Value], rng: random.Random) -> Value:
    return values[int(rng.random() * len(values))]


def value_pool(entities: Sequence[EntityDict]) -> dict[str, list[Value]]:
    """Corpus-wide multiset of observed values per property."""
    pool: dict[str, list[Value]] = {}
    for entity in entities:
        for pid, value in entity.properties.items():
            pool.setdefault(pid, []).append(value)
    return pool


def corrupt_entities(
    entities: Sequence[EntityDict],
    spec: CorruptionSpec,
    report: list | None = None,
) -> list[EntityDict]:
    """One corrupted copy per entity, protected fields untouched.

    Per entity, a seeded permutation of its properties picks the subset
    to corrupt; replacements are drawn uniformly from the corpus-wide
    multiset of that property's values with the original filtered out
    (one draw, equivalent to resampling until different).  The
    permutation and the per-property draws are seeded independently of
    the fraction, so a 50% copy corrupts a prefix of the 100% copy's
    properties and shared corruptions pick identical replacements.
    Properties without two distinct corpus values are skipped and noted
    in the report.
    """
    pool = value_pool(entities)
    copies = []
    for entity in entities:
        pids = _shuffled(entity.properties, _derived_rng(spec.seed, entity.name))
        k = _round_half_up(spec.fraction * len(pids))
        new_properties = dict(entity.properties)
        for pid in pids[:k]:
            original = entity.properties[pid]
            candidates = [v for v in pool[pid] if v != original]
            if not candidates:
                logger.warning(
                    "cannot corrupt %s of %s: fewer than 2 distinct corpus values",
                    pid,
                    entity.id,
                )
                if report is not None:
                    report.append(
                        {"entity_id": entity.id, "property_id": pid,
                         "reason": "fewer than 2 distinct values"}
                    )
                continue
            new_properties[pid] = _pick(candidates, _derived_rng(spec.seed, entity.name, pid))
        copies.append(replace(entity, properties=new_properties))
    return copies


# --------------------------------------------------------------------------
# Corpus assembly
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusItem:
    source_id: str
    fraction: float
    corrupted_properties: tuple[str, ...]
    entity: EntityDict


def build_obituary_corpus(
    entities: Sequence[EntityDict],
    fractions: Sequence[float],
    seed: int = 0,
) -> list[CorpusItem]:
    """Originals plus one corrupted copy per fraction, grouped per entity."""
    copies_by_fraction = {
        fraction: corrupt_entities(entities, CorruptionSpec(fraction=fraction, seed=seed))
        for fraction in fractions
    }
    corpus = []
    for i, entity in enumerate(entities):
        corpus.append(CorpusItem(f"{entity.id}:orig", 0.0, (), entity))
        for fraction in fractions:
            copy = copies_by_fraction[fraction][i]
            corrupted = tuple(
                pid for pid in entity.properties
                if copy.properties[pid] != entity.properties[pid]
            )
            corpus.append(
                CorpusItem(
                    f"{entity.id}:c{int(round(fraction * 100)):03d}",
                    fraction,
                    corrupted,
                    copy,
                )
            )
    return corpus


def entity_to_json(entity: EntityDict) -> dict:
    return {
        "id": entity.id,
        "name": entity.name,
        "age": entity.age,
        "gender": entity.gender,
        "properties": dict(entity.properties),
    }


def entity_from_json(payload: Mapping) -> EntityDict:
    return EntityDict(
        id=payload["id"],
        name=payload["name"],
        age=payload["age"],
        gender=payload["gender"],
        properties=dict(payload["properties"]),
    )


def corpus_to_jsonl(corpus: Sequence[CorpusItem]) -> str:
    lines = []
    for item in corpus:
        lines.append(
            json.dumps(
                {
                    "source_id": item.source_id,
                    "fraction": item.fraction,
                    "corrupted_properties": list(item.corrupted_properties),
                    "entity": entity_to_json(item.entity),
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n" if lines else ""


def write_corpus(path: str | os.PathLike, corpus: Sequence[CorpusItem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(corpus_to_jsonl(corpus))


def read_corpus(path: str | os.PathLike) -> list[CorpusItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            items.append(
                CorpusItem(
                    source_id=row["source_id"],
                    fraction=row["fraction"],
                    corrupted_properties=tuple(row["corrupted_properties"]),
                    entity=entity_from_json(row["entity"]),
                )
            )
    return items


# --------------------------------------------------------------------------
# Financial questions
# --------------------------------------------------------------------------

N_FINANCIAL_QUESTIONS = 32
MULTI_TICKER_COUNT = 7


@dataclass(frozen=True)
class FinancialItem:
    question: str
    doc: DataDocument
    question_code: str
    source_id: str


def load_financial_fixture(path: str | os.PathLike | None = None) -> list[FinancialItem]:
    """The 32 comparison questions with their per-question documents.

    Pair questions carry the two named tickers; multi questions carry
    all seven.  Records are coerced so numeric fields are numbers and
    "None" date sentinels become nulls.
    """
    if path is None:
        text = resources.files("symgen.assets").joinpath("financial_questions.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
        tickers = raw["tickers"]
        questions = raw["questions"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedFixture(f"unreadable financial fixture: {exc}") from None
    if len(questions) != N_FINANCIAL_QUESTIONS:
        raise MalformedFixture(
            f"expected {N_FINANCIAL_QUESTIONS} questions, got {len(questions)}"
        )

    items = []
    for i, entry in enumerate(questions):
        try:
            code = entry["code"]
            question = entry["question"]
            codes = entry["tickers"]
        except (KeyError, TypeError) as exc:
            raise MalformedFixture(f"question {i}: missing {exc}") from None
        kind = code.split("_", 1)[0]
        expected = {"pair": 2, "multi": MULTI_TICKER_COUNT}.get(kind)
        if expected is None:
            raise MalformedFixture(f"question {i}: unknown code kind {code!r}")
        if len(codes) != expected:
            raise MalformedFixture(
                f"question {i}: {code!r} needs {expected} tickers, got {len(codes)}"
            )
        missing = [t for t in codes if t not in tickers]
        if missing:
            raise MalformedFixture(f"question {i}: unknown tickers {missing}")
        source_id = f"financial:{i:02d}:{code}"
        doc = load_document(
            {"data": {t: tickers[t] for t in codes}}, source_id=source_id
        )
        doc, issues = coerce_numeric_fields(doc, FINANCIAL_NUMERIC_FIELDS)
        for issue in issues:
            logger.debug("left as string: %s (%r)", issue.path.text(), issue.value)
        items.append(FinancialItem(question, doc, code, source_id))
    return items
