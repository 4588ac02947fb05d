"""Benchmark record generation: queries, cardinality, questions, context.

The generator walks tuple x dependency x relation, builds one query per
combination (base SELECT from the dependency, temporal constraint from
a sampled reference interval), executes it to classify answer
cardinality, and packages everything into QAItem records. Multi-hop
items come from temporal joins plus dependency chaining.

All randomness derives from one seed through named sub-seeds, so a run
is byte-reproducible and re-running with refreshed data keeps unchanged
question ids stable (ids hash the query, not its answers).
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Sequence

from .allen import (
    CURRENT_TAG,
    ReferenceInterval,
    RelationTag,
    SamplerConfig,
    criteria_for,
    sample_miss,
    sample_reference,
)
from .errors import GatewayError, ManifestError, SamplerError
from .gateway import ChatRequest, Gateway, SQL_TO_TEXT_TEMPERATURE
from .query import KeyPredicate, Provenance, QueryAst, ast_signature, execute, print_sql, strip_temporal
from .store import TFDecl, TemporalRelation, infer_joined_tfd, temporal_natural_join
from .timepoints import Granularity, Interval, TimePoint

log = logging.getLogger(__name__)

CARD_MULTIPLE, CARD_UNIQUE, CARD_NONE = "multiple", "unique", "none"

_COUNT_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five",
    6: "six", 7: "seven", 8: "eight", 9: "nine", 10: "ten",
}

DEFAULT_TEMPLATES: dict[str, str] = {
    "before": "Which {y} for {x} ended before {b_start}?",
    "after": "Which {y} for {x} started after {b_end}?",
    "meet": "Which {y} for {x} ended exactly {b_length} before {b_end}?",
    "met_by": "Which {y} for {x} started exactly {b_length} after {b_start}?",
    "overlap": "Which {y} for {x} started before {b_start} and ended between {b_start} and {b_end}?",
    "overlap-current": "Which {y} for {x} is currently in effect?",
    "overlapped_by": "Which {y} for {x} started between {b_start} and {b_end} and ended after {b_end}?",
    "equal": "Which {y} for {x} started in {b_start} and ended in {b_end}?",
    "start": "Which {y} for {x} started in {b_start} and ended before {b_end}?",
    "started_by": "Which {y} for {x} started in {b_start}?",
    "finish": "Which {y} for {x} started after {b_start} and ended in {b_end}?",
    "finished_by": "Which {y} for {x} ended in {b_end}?",
    "during": "Which {y} for {x} started after {b_start} and ended before {b_end}?",
    "contain": "Which {y} for {x} started before {b_start} and ended after {b_end}?",
    "base": "Which {y} for {x}?",
}


def derive_seed(root: int, *labels: Any) -> int:
    """Stable 63-bit sub-seed named by the labels."""
    text = json.dumps([root, *[str(l) for l in labels]], ensure_ascii=False)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class HopGold:
    index: int  # 1-based, contiguous
    description: str
    gold: tuple[str, ...]


@dataclass(frozen=True)
class Answer:
    values: dict[str, str]
    interval: Interval


@dataclass(frozen=True)
class Context:
    relevant: tuple[tuple[str, ...], ...]
    irrelevant: tuple[tuple[str, ...], ...]


@dataclass
class QAItem:
    id: str
    questions: list[str]
    sql: str
    relation: RelationTag | None
    cardinality: str
    answers: list[Answer]
    time_refs: list[dict[str, TimePoint]]
    hops: list[HopGold] | None
    context: Context | None
    granularity: Granularity
    provenance: dict[str, Any]


@dataclass(frozen=True)
class Skip:
    dataset: str
    relation_name: str
    tuple_index: int
    tag: str
    reason: str


@dataclass
class GenResult:
    queries: list[QueryAst] = field(default_factory=list)
    skips: list[Skip] = field(default_factory=list)


@dataclass(frozen=True)
class QuestionSettings:
    """How questions are produced: offline templates or a model gateway."""

    mode: str = "template"  # "template" | "llm"
    paraphrases: int = 3
    templates: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in ("template", "llm"):
            raise ManifestError(f"unknown question mode {self.mode!r}")
        if self.paraphrases < 1:
            raise ManifestError("paraphrase count must be >= 1")


@dataclass(frozen=True)
class GenConfig:
    sampler: SamplerConfig
    question: QuestionSettings = QuestionSettings()
    paper_literal: bool = False
    answer_extensions: tuple[str, ...] = ()
    context_rows: int = 2
    miss_attempts: int = 8


def _select_attrs(
    store: TemporalRelation, tfd: TFDecl, extensions: Sequence[str], relation: RelationTag | None
) -> tuple[str, ...]:
    attrs = list(tfd.rhs) + [a for a in extensions if a not in tfd.rhs]
    refs = criteria_for(relation)
    if "start" in refs:
        attrs.append(store.start_attr)
    if "end" in refs:
        attrs.append(store.end_attr)
    return tuple(attrs)


def genqueries(
    store: TemporalRelation,
    tfds: Sequence[TFDecl],
    relations: Sequence[RelationTag],
    seed: int,
    config: GenConfig,
    dataset: str = "",
) -> GenResult:
    """One query per tuple x dependency x relation.

    Each combination gets its own derived seed, so adding relations or
    tuples never perturbs the others. Combinations whose reference
    cannot be sampled (the current variant on a closed row, intervals
    too short for interior points) are skipped and reported.
    """
    if not relations:
        raise ManifestError("genqueries needs a non-empty relation list")
    dataset = dataset or store.name
    result = GenResult()
    for tuple_index, row in enumerate(store.tuples):
        for tfd in tfds:
            for tag in relations:
                sub_seed = derive_seed(seed, dataset, store.name, tuple_index, tfd.describe(), tag.tag)
                rng = random.Random(sub_seed)
                miss = rng.random() < config.sampler.miss_probability
                try:
                    ast = _build_query(store, row.interval, tuple_index, tfd, tag, rng, config, dataset, sub_seed, miss)
                except SamplerError as exc:
                    result.skips.append(Skip(dataset, store.name, tuple_index, tag.tag, str(exc)))
                    continue
                result.queries.append(ast)
    return result


def _build_query(
    store: TemporalRelation,
    a: Interval,
    tuple_index: int,
    tfd: TFDecl,
    tag: RelationTag,
    rng: random.Random,
    config: GenConfig,
    dataset: str,
    sub_seed: int,
    miss: bool,
) -> QueryAst:
    row = store.tuples[tuple_index]
    keys = tuple(KeyPredicate(attr, row.values[attr]) for attr in tfd.lhs)
    base = QueryAst(
        relation_name=store.name,
        select_attrs=_select_attrs(store, tfd, config.answer_extensions, tag),
        key_predicates=keys,
    )
    from .allen import condition_for  # local import keeps module init light

    if miss:
        reference = _sample_empty(rng, a, tag, store, base, config)
        mode = "miss"
    else:
        reference = sample_reference(rng, a, tag, config.sampler, store.granularity)
        mode = "satisfying"
    condition = condition_for(tag, reference, config.paper_literal)
    return QueryAst(
        relation_name=base.relation_name,
        select_attrs=base.select_attrs,
        key_predicates=base.key_predicates,
        condition=condition,
        provenance=Provenance(
            dataset=dataset,
            relation_name=store.name,
            tuple_index=tuple_index,
            tfd_lhs=tfd.lhs,
            tfd_rhs=tfd.rhs,
            relation=tag,
            reference=reference,
            seed=sub_seed,
            mode=mode,
        ),
    )


def _sample_empty(
    rng: random.Random,
    a: Interval,
    tag: RelationTag,
    store: TemporalRelation,
    base: QueryAst,
    config: GenConfig,
) -> ReferenceInterval:
    """A reference that misses the source row, preferring zero matches."""
    from .allen import condition_for

    last = None
    for _ in range(config.miss_attempts):
        last = sample_miss(rng, a, tag, config.sampler, store.granularity, config.paper_literal)
        probe = QueryAst(
            relation_name=base.relation_name,
            select_attrs=base.select_attrs,
            key_predicates=base.key_predicates,
            condition=condition_for(tag, last, config.paper_literal),
        )
        if not execute(probe, store):
            return last
    log.warning("miss-mode reference for %s still matches other rows", tag.tag)
    return last


def classify_cardinality(
    ast: QueryAst, store: TemporalRelation, relation: RelationTag | None
) -> tuple[str, list[Answer], list[dict[str, TimePoint]]]:
    """Execute and map the result count to multiple/unique/none.

    Time references are extracted per answer and restricted to the
    relation's criteria; no-answer items carry none.
    """
    rows = execute(ast, store)
    if not rows:
        return CARD_NONE, [], []
    answers = [Answer(values=r.values, interval=r.interval) for r in rows]
    refs = [_time_refs(r.interval, relation) for r in rows]
    cardinality = CARD_UNIQUE if len(rows) == 1 else CARD_MULTIPLE
    return cardinality, answers, refs


def _time_refs(interval: Interval, relation: RelationTag | None) -> dict[str, TimePoint]:
    refs: dict[str, TimePoint] = {}
    wanted = criteria_for(relation)
    if "start" in wanted:
        refs["start"] = interval.start
    if "end" in wanted and interval.end is not None:
        refs["end"] = interval.end
    return refs


def build_context(
    ast: QueryAst, store: TemporalRelation, rng: random.Random, k: int
) -> Context:
    """Relevant rows (temporal condition stripped) plus k seeded-random others."""
    relevant_rows = execute(strip_temporal(ast), store)
    relevant_idx = {r.source_index for r in relevant_rows}
    pool = [i for i in range(len(store.tuples)) if i not in relevant_idx]
    if k > len(pool):
        log.info(
            "requested %d irrelevant rows but only %d remain in %s", k, len(pool), store.name
        )
        chosen = list(pool)
    else:
        chosen = rng.sample(pool, k)
    relevant = tuple(tuple(store.row_cells(store.tuples[r.source_index])) for r in relevant_rows)
    irrelevant = tuple(tuple(store.row_cells(store.tuples[i])) for i in chosen)
    return Context(relevant=relevant, irrelevant=irrelevant)


# --- natural-language questions -------------------------------------------


class QuestionParseError(GatewayError):
    """The model's conversion output contained no Q: lines."""

    def __init__(self, raw: str):
        super().__init__(f"no 'Q:' lines in conversion output: {raw!r}")
        self.raw = raw


def parse_question_lines(text: str) -> list[str]:
    questions = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith("Q:"):
            body = stripped[2:].strip()
            if body:
                questions.append(body)
    return questions


def count_word(n: int) -> str:
    return _COUNT_WORDS.get(n, str(n))


def sql_to_text_prompt(template: str, store: TemporalRelation, n: int) -> str:
    return template.format(
        schema=store.schema_line(),
        start_attr=store.start_attr,
        end_attr=store.end_attr,
        n=count_word(n),
    )


def to_natural_language(
    ast: QueryAst,
    settings: QuestionSettings,
    store: TemporalRelation,
    gateway: Gateway | None = None,
    prompt_template: str | None = None,
) -> list[str]:
    """Render questions for a query: deterministic template or model call.

    Template mode is fully offline and yields one question. Model mode
    sends the conversion prompt at temperature 0.3 and returns exactly
    the parsed Q: lines; a parse failure is retried once uncached.
    """
    if settings.mode == "template":
        return [_render_template(ast, settings, store)]
    if gateway is None or prompt_template is None:
        raise ManifestError("llm question mode needs a configured gateway and prompt")
    request = ChatRequest(
        model=gateway.provider.model,
        system=sql_to_text_prompt(prompt_template, store, settings.paraphrases),
        user=print_sql(ast, store.start_attr, store.end_attr),
        temperature=SQL_TO_TEXT_TEMPERATURE,
    )
    text = gateway.cached_complete(request)
    questions = parse_question_lines(text)
    if not questions:
        text = gateway.complete(request)
        questions = parse_question_lines(text)
        if not questions:
            raise QuestionParseError(text)
    return questions


def _render_template(ast: QueryAst, settings: QuestionSettings, store: TemporalRelation) -> str:
    prov = ast.provenance
    tag = prov.relation.tag if prov and prov.relation else "base"
    template = settings.templates.get(tag) or DEFAULT_TEMPLATES[tag]
    slots: dict[str, str] = {p.attr: p.value for p in ast.key_predicates}
    slots["x"] = ", ".join(f"{p.attr} {p.value}" for p in ast.key_predicates)
    answer_attrs = [a for a in ast.select_attrs if not store.is_timestamp(a)]
    slots["y"] = ", ".join(answer_attrs)
    if prov and prov.reference is not None:
        ref = prov.reference
        slots["b_start"] = ref.start.iso()
        slots["b_end"] = ref.end.iso()
        plural = "s" if abs(ref.length.count) != 1 else ""
        slots["b_length"] = f"{ref.length.count} {ref.length.unit}{plural}"
    try:
        return template.format(**slots)
    except KeyError as exc:
        raise ManifestError(f"question template for {tag!r} uses unknown slot {exc}") from exc


# --- item assembly ---------------------------------------------------------


def item_id(dataset: str, ast: QueryAst, seed: int) -> str:
    payload = json.dumps(
        {"dataset": dataset, "ast": ast_signature(ast), "seed": seed},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_item(
    ast: QueryAst,
    store: TemporalRelation,
    config: GenConfig,
    seed: int,
    gateway: Gateway | None = None,
    prompt_template: str | None = None,
    hops: list[HopGold] | None = None,
    answer_override: list[Answer] | None = None,
) -> QAItem:
    """Assemble the full benchmark record for one query."""
    prov = ast.provenance
    relation = prov.relation if prov else None
    cardinality, answers, refs = classify_cardinality(ast, store, relation)
    if answer_override is not None and cardinality != CARD_NONE:
        answers = answer_override
        refs = [_time_refs(a.interval, relation) for a in answers]
    ctx_rng = random.Random(derive_seed(seed, "context", prov.dataset if prov else "", item_seed(ast)))
    context = build_context(ast, store, ctx_rng, config.context_rows)
    questions = to_natural_language(ast, config.question, store, gateway, prompt_template)
    if hops:
        final = HopGold(
            index=len(hops) + 1,
            description="final answer",
            gold=tuple(v for a in answers for v in a.values.values()),
        )
        hops = [*hops, final]
    return QAItem(
        id=item_id(prov.dataset if prov else store.name, ast, seed),
        questions=questions,
        sql=print_sql(ast, store.start_attr, store.end_attr),
        relation=relation,
        cardinality=cardinality,
        answers=answers,
        time_refs=refs,
        hops=hops,
        context=context,
        granularity=store.granularity,
        provenance=_provenance_dict(prov),
    )


def item_seed(ast: QueryAst) -> int:
    return ast.provenance.seed if ast.provenance else 0


def _provenance_dict(prov: Provenance | None) -> dict[str, Any]:
    if prov is None:
        return {}
    ref = prov.reference
    return {
        "dataset": prov.dataset,
        "relation_name": prov.relation_name,
        "tuple_index": prov.tuple_index,
        "tfd": {"lhs": list(prov.tfd_lhs), "rhs": list(prov.tfd_rhs)},
        "relation": prov.relation.tag if prov.relation else None,
        "reference": None
        if ref is None
        else {"start": ref.start.iso(), "end": ref.end.iso(), "length": ref.length.text()},
        "seed": prov.seed,
        "mode": prov.mode,
    }


# --- multi-hop -------------------------------------------------------------


@dataclass(frozen=True)
class HopSpec:
    attrs: tuple[str, ...]
    description: str = ""


@dataclass(frozen=True)
class JoinSpec:
    name: str
    left: str
    right: str
    fd: TFDecl
    tfd: TFDecl
    relations: tuple[RelationTag, ...] = ()
    include_base: bool = True
    hops: tuple[HopSpec, ...] = ()
    template: str | None = None


def gen_multihop(
    stores: dict[str, TemporalRelation],
    spec: JoinSpec,
    seed: int,
    config: GenConfig,
    aliases: dict[str, list[str]] | None = None,
    gateway: Gateway | None = None,
    prompt_template: str | None = None,
) -> tuple[list[QAItem], list[Skip], TemporalRelation]:
    """Join two relations, chain dependencies, and emit hop-annotated items.

    Base items (no extra temporal constraint, the join already fixes
    the time) report the answer's validity from the dependency-side
    source tuple, mirroring how role-holder terms are cited; items that
    add a temporal constraint use the joined (clipped) interval, like
    any single-hop query.
    """
    aliases = aliases or {}
    left, right = stores[spec.left], stores[spec.right]
    for attr in (*spec.fd.lhs, *spec.fd.rhs):
        if not left.has_attr(attr):
            raise ManifestError(f"join {spec.name}: fd attribute {attr!r} not in {left.name}")
    for attr in (*spec.tfd.lhs, *spec.tfd.rhs):
        if not right.has_attr(attr):
            raise ManifestError(f"join {spec.name}: tfd attribute {attr!r} not in {right.name}")
    joined = temporal_natural_join(left, right, spec.name)
    chained = infer_joined_tfd(spec.fd, spec.tfd, joined)
    items: list[QAItem] = []
    skips: list[Skip] = []

    question = config.question
    if spec.template:
        merged = dict(question.templates)
        merged["base"] = spec.template
        question = QuestionSettings(mode=question.mode, paraphrases=question.paraphrases, templates=merged)
    join_config = GenConfig(
        sampler=config.sampler,
        question=question,
        paper_literal=config.paper_literal,
        answer_extensions=(),
        context_rows=config.context_rows,
        miss_attempts=config.miss_attempts,
    )

    for tuple_index in range(len(joined.tuples)):
        if spec.include_base:
            ast = _base_join_query(joined, tuple_index, chained, spec, seed)
            rows = execute(ast, joined)
            hops = _hop_golds(spec, rows, joined, aliases)
            override = _source_answers(ast, joined, right)
            items.append(
                build_item(ast, joined, join_config, seed, gateway, prompt_template, hops, override)
            )
    if spec.relations:
        gen = genqueries(joined, [chained], list(spec.relations), seed, join_config, dataset=spec.name)
        skips.extend(gen.skips)
        for ast in gen.queries:
            rows = execute(ast, joined)
            hops = _hop_golds(spec, rows, joined, aliases)
            items.append(build_item(ast, joined, join_config, seed, gateway, prompt_template, hops))
    return items, skips, joined


def _base_join_query(
    joined: TemporalRelation, tuple_index: int, tfd: TFDecl, spec: JoinSpec, seed: int
) -> QueryAst:
    row = joined.tuples[tuple_index]
    keys = tuple(KeyPredicate(attr, row.values[attr]) for attr in tfd.lhs)
    return QueryAst(
        relation_name=joined.name,
        select_attrs=_select_attrs(joined, tfd, (), None),
        key_predicates=keys,
        condition=None,
        provenance=Provenance(
            dataset=spec.name,
            relation_name=joined.name,
            tuple_index=tuple_index,
            tfd_lhs=tfd.lhs,
            tfd_rhs=tfd.rhs,
            relation=None,
            reference=None,
            seed=derive_seed(seed, spec.name, tuple_index, "base"),
            mode="base",
        ),
    )


def _hop_golds(spec: JoinSpec, rows, joined: TemporalRelation, aliases: dict[str, list[str]]) -> list[HopGold]:
    hops: list[HopGold] = []
    for index, hop in enumerate(spec.hops, start=1):
        gold: list[str] = []
        for row in rows:
            source = joined.tuples[row.source_index]
            for attr in hop.attrs:
                value = source.values[attr]
                for form in (value, *aliases.get(value, [])):
                    if form not in gold:
                        gold.append(form)
        description = hop.description or f"hop {index}: {', '.join(hop.attrs)}"
        hops.append(HopGold(index=index, description=description, gold=tuple(gold)))
    return hops


def _source_answers(ast: QueryAst, joined: TemporalRelation, right: TemporalRelation) -> list[Answer]:
    """Answers for base join items, with the dependency-side term interval."""
    answers = []
    for row in execute(ast, joined):
        source = joined.tuples[row.source_index]
        interval = row.interval
        if source.sources is not None:
            interval = right.tuples[source.sources[1]].interval
        answers.append(Answer(values=row.values, interval=interval))
    return answers


# --- JSONL records ----------------------------------------------------------


def item_to_record(item: QAItem) -> dict[str, Any]:
    return {
        "id": item.id,
        "questions": item.questions,
        "sql": item.sql,
        "relation": item.relation.tag if item.relation else None,
        "cardinality": item.cardinality,
        "answers": [
            {
                "values": a.values,
                "interval": {
                    "start": a.interval.start.iso(),
                    "end": a.interval.end.iso() if a.interval.end else None,
                },
            }
            for a in item.answers
        ],
        "time_refs": [{k: v.iso() for k, v in refs.items()} for refs in item.time_refs],
        "hops": None
        if item.hops is None
        else [{"index": h.index, "description": h.description, "gold": list(h.gold)} for h in item.hops],
        "context": None
        if item.context is None
        else {
            "relevant": [list(r) for r in item.context.relevant],
            "irrelevant": [list(r) for r in item.context.irrelevant],
        },
        "granularity": item.granularity.value,
        "provenance": item.provenance,
    }


def item_from_record(record: dict[str, Any]) -> QAItem:
    answers = [
        Answer(
            values=dict(a["values"]),
            interval=Interval(
                TimePoint.parse(a["interval"]["start"]),
                TimePoint.parse(a["interval"]["end"]) if a["interval"]["end"] else None,
            ),
        )
        for a in record["answers"]
    ]
    refs = [{k: TimePoint.parse(v) for k, v in r.items()} for r in record["time_refs"]]
    hops = record.get("hops")
    return QAItem(
        id=record["id"],
        questions=list(record["questions"]),
        sql=record["sql"],
        relation=RelationTag.parse(record["relation"]) if record.get("relation") else None,
        cardinality=record["cardinality"],
        answers=answers,
        time_refs=refs,
        hops=None
        if hops is None
        else [HopGold(h["index"], h["description"], tuple(h["gold"])) for h in hops],
        context=None
        if record.get("context") is None
        else Context(
            relevant=tuple(tuple(r) for r in record["context"]["relevant"]),
            irrelevant=tuple(tuple(r) for r in record["context"]["irrelevant"]),
        ),
        granularity=Granularity(record["granularity"]),
        provenance=dict(record.get("provenance") or {}),
    )


def write_jsonl(records: list[dict[str, Any]], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")


def read_jsonl(path) -> list[dict[str, Any]]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
