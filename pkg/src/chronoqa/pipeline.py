"""Stage orchestration: validate, generate, ask, score.

Stages communicate only via files (JSONL in, JSONL/CSV out), so any
stage can be rerun or swapped. Each stage draws its randomness from the
manifest seed through named sub-seeds.
"""
from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import httpx

from .allen import ALL_BASE_TAGS, RelationTag
from .errors import ChronoqaError, GatewayError, ScoreError
from .evaluate import AggregateReport, ScoreRecord, aggregate, score_response
from .gateway import ChatRequest, EVALUATED_TEMPERATURE, Gateway
from .manifest import RunManifest
from .prompts import load_prompt
from .qagen import (
    GenConfig,
    QAItem,
    QuestionSettings,
    Skip,
    build_item,
    gen_multihop,
    genqueries,
)
from .store import TemporalRelation, check_tfd, infer_joined_tfd, temporal_natural_join

log = logging.getLogger(__name__)


@dataclass
class ValidationEntry:
    subject: str
    ok: bool
    detail: str


@dataclass
class ValidationReport:
    entries: list[ValidationEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def add(self, subject: str, ok: bool, detail: str) -> None:
        self.entries.append(ValidationEntry(subject, ok, detail))


def validate_manifest(manifest: RunManifest) -> tuple[ValidationReport, dict[str, TemporalRelation]]:
    """Load every relation, verify every declared dependency and join."""
    report = ValidationReport()
    stores: dict[str, TemporalRelation] = {}
    for decl in manifest.relations:
        store = decl.load()
        stores[decl.name] = store
        report.add(f"relation {decl.name}", True, f"{len(store.tuples)} rows loaded")
        for tfd in store.tfds:
            result = check_tfd(store, tfd)
            if result.holds:
                report.add(f"{decl.name}: {tfd.describe()}", True, "holds")
            else:
                witnesses = "; ".join(v.describe() for v in result.violations[:5])
                report.add(f"{decl.name}: {tfd.describe()}", False, f"violated: {witnesses}")
    for join in manifest.joins:
        try:
            joined = temporal_natural_join(stores[join.left], stores[join.right], join.name)
            chained = infer_joined_tfd(join.fd, join.tfd, joined)
        except (KeyError, ChronoqaError) as exc:
            report.add(f"join {join.name}", False, str(exc))
            continue
        report.add(
            f"join {join.name}",
            True,
            f"{len(joined.tuples)} joined rows, inferred {chained.describe()}",
        )
    return report, stores


@dataclass
class GenerateOutcome:
    items: list[QAItem] = field(default_factory=list)
    skips: list[Skip] = field(default_factory=list)

    def counts(self) -> Counter:
        return Counter(
            (item.relation.tag if item.relation else "(base)", item.cardinality)
            for item in self.items
        )


def _question_settings(manifest: RunManifest, mode: str, paraphrases: int, templates: dict[str, str]) -> QuestionSettings:
    merged = dict(manifest.question.templates)
    merged.update(templates)
    return QuestionSettings(mode=mode, paraphrases=paraphrases, templates=merged)


def generate_items(
    manifest: RunManifest,
    relation_filter: Sequence[RelationTag] | None = None,
    mode: str | None = None,
    paraphrases: int | None = None,
    gateway: Gateway | None = None,
) -> GenerateOutcome:
    """Run the full generation pipeline over every relation and join.

    A relation filter narrows both single-hop tags and join tags (join
    base items are kept only for unfiltered runs). Generation refuses
    to run when validation fails.
    """
    report, stores = validate_manifest(manifest)
    if not report.ok:
        bad = "; ".join(e.subject for e in report.entries if not e.ok)
        raise ChronoqaError(f"generation requires a valid manifest, failures: {bad}")

    mode = mode or manifest.question.mode
    paraphrases = paraphrases or manifest.question.paraphrases
    sql_prompt = load_prompt("sql_to_text") if mode == "llm" else None
    default_tags = (
        tuple(RelationTag.parse(t) for t in manifest.sampler.allowed_relations)
        if manifest.sampler.allowed_relations
        else ALL_BASE_TAGS
    )
    tags = tuple(relation_filter) if relation_filter else default_tags

    outcome = GenerateOutcome()
    for decl in manifest.relations:
        store = stores[decl.name]
        temporal_tfds = [t for t in store.tfds if t.temporal]
        if not temporal_tfds:
            continue
        config = GenConfig(
            sampler=manifest.sampler,
            question=_question_settings(manifest, mode, paraphrases, decl.templates),
            paper_literal=manifest.paper_literal,
            answer_extensions=decl.answer_extensions,
            context_rows=manifest.context_rows,
        )
        gen = genqueries(store, temporal_tfds, list(tags), manifest.seed, config, dataset=decl.name)
        outcome.skips.extend(gen.skips)
        for ast in gen.queries:
            try:
                outcome.items.append(
                    build_item(ast, store, config, manifest.seed, gateway, sql_prompt)
                )
            except GatewayError as exc:
                log.warning("skipping item for %s: %s", decl.name, exc)
    for join in manifest.joins:
        join_tags = tuple(t for t in join.relations if relation_filter is None or t in tags)
        spec = join
        if relation_filter is not None or join_tags != tuple(join.relations):
            from dataclasses import replace

            spec = replace(
                join,
                relations=join_tags,
                include_base=join.include_base and relation_filter is None,
            )
        if not spec.include_base and not spec.relations:
            continue
        config = GenConfig(
            sampler=manifest.sampler,
            question=_question_settings(manifest, mode, paraphrases, {}),
            paper_literal=manifest.paper_literal,
            context_rows=manifest.context_rows,
        )
        items, skips, _ = gen_multihop(
            stores, spec, manifest.seed, config,
            aliases=manifest.evaluation.aliases, gateway=gateway, prompt_template=sql_prompt,
        )
        outcome.items.extend(items)
        outcome.skips.extend(skips)
    return outcome


# --- asking -----------------------------------------------------------------


def build_ask_prompt(item: QAItem, prompt_name: str, book_mode: str) -> tuple[str, str]:
    """(system, user) for one item under the named prompt and book mode."""
    question = item.questions[0]
    if prompt_name in ("cot", "time_cot"):
        system = load_prompt("reasoning")
        user = f"{load_prompt(prompt_name).rstrip()}\n\nQ: {question}\nA:"
    else:
        system = load_prompt(prompt_name)
        user = question
    if book_mode == "open":
        if item.context is None:
            raise ScoreError(f"item {item.id} has no context rows for open-book mode")
        rows = sorted([*item.context.relevant, *item.context.irrelevant])
        listing = "\n".join("- (" + ", ".join(cells) + ")" for cells in rows)
        user = f"{user}\n\nContext rows:\n{listing}"
    elif book_mode != "closed":
        raise ScoreError(f"unknown book mode {book_mode!r}")
    return system, user


def ask_items(
    items: Sequence[QAItem],
    gateway: Gateway,
    prompt_name: str,
    book_mode: str,
) -> list[dict[str, Any]]:
    """Query the evaluated model for every item, bounded concurrency.

    Failures are recorded per item and the run continues; successful
    records carry the verbatim response text.
    """

    def one(item: QAItem) -> dict[str, Any]:
        system, user = build_ask_prompt(item, prompt_name, book_mode)
        request = ChatRequest(
            model=gateway.provider.model,
            system=system,
            user=user,
            temperature=EVALUATED_TEMPERATURE,
        )
        record: dict[str, Any] = {
            "qa_id": item.id,
            "model_id": gateway.provider.model,
            "prompt": prompt_name,
            "mode": book_mode,
        }
        try:
            record["response"] = gateway.cached_complete(request)
        except GatewayError as exc:
            log.warning("ask failed for %s: %s", item.id, exc)
            record["error"] = str(exc)
        return record

    workers = max(1, gateway.provider.max_concurrency)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))


# --- scoring ----------------------------------------------------------------


def _domain_values(stores: dict[str, TemporalRelation], item: QAItem) -> list[str]:
    """Distinct answer-attribute values of the item's source relation."""
    relation_name = str(item.provenance.get("relation_name", ""))
    rhs = list((item.provenance.get("tfd") or {}).get("rhs", []))
    store = stores.get(relation_name)
    if store is None or not rhs:
        return []
    values: list[str] = []
    for row in store.tuples:
        for attr in rhs:
            if attr in row.values and row.values[attr] not in values:
                values.append(row.values[attr])
    return values


def score_responses(
    items: dict[str, QAItem],
    responses: Sequence[dict[str, Any]],
    mode: str,
    manifest: RunManifest,
    gateway: Gateway | None = None,
    stores: dict[str, TemporalRelation] | None = None,
) -> tuple[list[ScoreRecord], AggregateReport]:
    """Score each response against its item and aggregate.

    Every response must resolve to a known item; unknown ids abort with
    the orphan list. Rows recorded as ask-time failures are skipped.
    """
    if not responses:
        raise ScoreError("responses file is empty; refusing to emit a zero report")
    orphans = sorted({r["qa_id"] for r in responses if r.get("qa_id") not in items})
    if orphans:
        raise ScoreError(f"responses reference unknown item ids: {', '.join(orphans)}")
    judge_template = load_prompt("judge") if mode == "judge" else None
    needs_domain = any(items[r["qa_id"]].cardinality == "none" for r in responses if "response" in r)
    if stores is None and needs_domain:
        stores = manifest.load_all()
    records: list[ScoreRecord] = []
    for row in responses:
        if "response" not in row:
            log.warning("skipping failed ask record for %s", row.get("qa_id"))
            continue
        item = items[row["qa_id"]]
        domain = _domain_values(stores or {}, item) if item.cardinality == "none" else None
        records.append(
            score_response(
                item,
                row["response"],
                model_id=row.get("model_id", ""),
                mode=mode,
                config=manifest.evaluation,
                gateway=gateway,
                judge_template=judge_template,
                domain_values=domain,
                response_ref=row.get("response_ref", ""),
            )
        )
    if not records:
        raise ScoreError("no scorable responses (all rows recorded errors)")
    report = aggregate(records, items)
    return records, report
