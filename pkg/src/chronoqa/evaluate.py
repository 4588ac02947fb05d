"""Scoring: date extraction, answer/time/hop correctness, aggregation.

Deterministic scoring is pure text processing; judge mode delegates the
time check to a model behind the gateway. Answer matching is
substring containment after Unicode normalization, case folding, and
diacritic folding, with optional alias lists. Time matching is
presence-based: a date mention anywhere in the response that equals the
gold reference at the evaluation granularity counts (an optional strict
mode additionally demands a start/end cue word near the mention).
"""
from __future__ import annotations

import csv
import io
import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .allen import criteria_for
from .errors import ScoreError
from .gateway import ChatRequest, Gateway, JUDGE_TEMPERATURE
from .qagen import CARD_NONE, QAItem
from .timepoints import DateError, Granularity, TimePoint

DEFAULT_NO_ANSWER_MARKERS = ("no answer", "no valid answer", "no such", "does not exist", "none")

_MONTHS = {
    "jan": 1, "january": 1, "feb": 2, "february": 2, "mar": 3, "march": 3,
    "apr": 4, "april": 4, "may": 5, "jun": 6, "june": 6, "jul": 7, "july": 7,
    "aug": 8, "august": 8, "sep": 9, "sept": 9, "september": 9, "oct": 10,
    "october": 10, "nov": 11, "november": 11, "dec": 12, "december": 12,
}
_MONTH_RE = "|".join(sorted(_MONTHS, key=len, reverse=True))

# Ordered patterns; finer-granularity formats listed first so the
# longest-first resolution prefers full dates over embedded years.
_PATTERNS: list[tuple[re.Pattern, str]] = [
    (re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b"), "ymd"),
    (re.compile(r"\b(\d{4})/(\d{1,2})/(\d{1,2})\b"), "ymd"),
    (re.compile(rf"\b(\d{{1,2}})(?:st|nd|rd|th)?\s+({_MONTH_RE})\.?,?\s+(\d{{4}})\b", re.IGNORECASE), "dmy"),
    (re.compile(rf"\b({_MONTH_RE})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?\s*,?\s+(\d{{4}})\b", re.IGNORECASE), "mdy"),
    (re.compile(rf"\b({_MONTH_RE})\.?,?\s+(\d{{4}})\b", re.IGNORECASE), "my"),
    (re.compile(r"\b(\d{4})-(\d{2})\b(?!-\d)"), "ym"),
    (re.compile(r"\b([12]\d{3})\b"), "y"),
]


@dataclass(frozen=True)
class DateMention:
    value: TimePoint
    span: tuple[int, int]

    @property
    def granularity(self) -> Granularity:
        return self.value.granularity


def _mention_from(kind: str, match: re.Match) -> TimePoint | None:
    try:
        if kind == "ymd":
            return TimePoint(int(match.group(1)), int(match.group(2)), int(match.group(3)))
        if kind == "dmy":
            return TimePoint(int(match.group(3)), _MONTHS[match.group(2).lower()], int(match.group(1)))
        if kind == "mdy":
            return TimePoint(int(match.group(3)), _MONTHS[match.group(1).lower()], int(match.group(2)))
        if kind == "my":
            return TimePoint(int(match.group(2)), _MONTHS[match.group(1).lower()])
        if kind == "ym":
            return TimePoint(int(match.group(1)), int(match.group(2)))
        return TimePoint(int(match.group(1)))
    except DateError:
        return None


def extract_dates(text: str) -> list[DateMention]:
    """All date mentions, overlapping matches resolved longest-first.

    Recognizes D Mon YYYY, Month D, YYYY, YYYY/MM/DD, YYYY-MM-DD,
    YYYY-MM, Month YYYY, and bare years 1000-2999, each normalized to a
    TimePoint at its own granularity. Calendar-invalid fragments are
    ignored.
    """
    candidates: list[tuple[int, int, TimePoint]] = []
    for pattern, kind in _PATTERNS:
        for match in pattern.finditer(text):
            value = _mention_from(kind, match)
            if value is not None:
                candidates.append((match.start(), match.end(), value))
    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0]))
    taken: list[tuple[int, int]] = []
    mentions: list[DateMention] = []
    for start, end, value in candidates:
        if any(start < t_end and t_start < end for t_start, t_end in taken):
            continue
        taken.append((start, end))
        mentions.append(DateMention(value=value, span=(start, end)))
    mentions.sort(key=lambda m: m.span)
    return mentions


def fold_text(text: str) -> str:
    """Casefold and strip diacritics for tolerant containment checks."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.casefold()


@dataclass(frozen=True)
class EvalConfig:
    aliases: dict[str, list[str]] = field(default_factory=dict)
    no_answer_markers: tuple[str, ...] = DEFAULT_NO_ANSWER_MARKERS
    granularity_override: dict[str, str] = field(default_factory=dict)  # dataset -> granularity
    strict_time: bool = False

    def surface_forms(self, value: str) -> list[str]:
        return [value, *self.aliases.get(value, [])]

    def scoring_granularity(self, qa: QAItem) -> Granularity:
        dataset = str(qa.provenance.get("dataset", ""))
        override = self.granularity_override.get(dataset)
        return Granularity(override) if override else qa.granularity


def _contains(response_folded: str, value: str, config: EvalConfig) -> bool:
    return any(fold_text(form) in response_folded for form in config.surface_forms(value))


def score_answer(
    qa: QAItem,
    response: str,
    config: EvalConfig = EvalConfig(),
    domain_values: Sequence[str] | None = None,
) -> bool:
    """Answer accuracy for one response.

    Unique/multiple: every gold value (or an alias) must appear.
    None: the response must carry a no-answer marker and must not name
    any entity from the relation's answer-value domain.
    """
    folded = fold_text(response)
    if qa.cardinality == CARD_NONE:
        if not any(fold_text(marker) in folded for marker in config.no_answer_markers):
            return False
        for value in domain_values or ():
            if _contains(folded, value, config):
                return False
        return True
    for answer in qa.answers:
        for value in answer.values.values():
            if not _contains(folded, value, config):
                return False
    return True


_START_CUES = ("since", "from", "start", "started", "starting", "began", "begin", "begun")
_END_CUES = ("until", "till", "to", "end", "ended", "ending", "through", "finish", "finished")


def _cue_near(text: str, span: tuple[int, int], cues: tuple[str, ...], window: int = 40) -> bool:
    lead = text[max(0, span[0] - window) : span[0]].lower()
    return any(cue in lead for cue in cues)


def _ref_matched(
    ref_kind: str,
    gold: TimePoint,
    mentions: Iterable[DateMention],
    granularity: Granularity,
    response: str,
    strict: bool,
) -> bool:
    if gold.granularity.rank < granularity.rank:
        return False
    target = gold.truncate(granularity)
    for mention in mentions:
        if mention.granularity.rank < granularity.rank:
            continue
        if mention.value.truncate(granularity) != target:
            continue
        if strict:
            cues = _START_CUES if ref_kind == "start" else _END_CUES
            if not _cue_near(response, mention.span, cues):
                continue
        return True
    return False


def _snap(value: float) -> int:
    # nearest of {0, 50, 100}; exact midpoints snap downward
    best = 0
    best_gap = abs(value - 0)
    for candidate in (50, 100):
        gap = abs(value - candidate)
        if gap < best_gap:
            best, best_gap = candidate, gap
    return best


def deterministic_time_score(qa: QAItem, response: str, config: EvalConfig = EvalConfig()) -> int:
    """Fraction of required time references present, as 0/50/100.

    Per answer, each reference demanded by the relation's criteria must
    appear as a date mention equal to the gold value at the scoring
    granularity. Multi-answer scores are averaged then snapped.
    """
    if qa.cardinality == CARD_NONE:
        raise ScoreError("time accuracy is undefined for no-answer items")
    granularity = config.scoring_granularity(qa)
    mentions = extract_dates(response)
    per_answer: list[float] = []
    for refs in qa.time_refs:
        if not refs:
            continue
        hit = sum(
            1
            for kind, gold in refs.items()
            if _ref_matched(kind, gold, mentions, granularity, response, config.strict_time)
        )
        per_answer.append(100.0 * hit / len(refs))
    if not per_answer:
        return 0
    return _snap(sum(per_answer) / len(per_answer))


JUDGE_VERDICTS = ("Yes", "Half", "No")
_VERDICT_RE = re.compile(r"\b(yes|half|no)\b", re.IGNORECASE)
_VERDICT_SCORE = {"yes": 100, "half": 50, "no": 0}


def format_judge_dates(refs: dict[str, TimePoint]) -> str:
    lines = []
    if "start" in refs:
        lines.append(f"**Start date:** {refs['start'].iso()}")
    if "end" in refs:
        lines.append(f"**End date:** {refs['end'].iso()}")
    return "\n".join(lines)


def parse_verdict(text: str) -> str | None:
    match = _VERDICT_RE.search(text)
    if not match:
        return None
    return match.group(1).capitalize()


def judge_time_score(
    qa: QAItem,
    response: str,
    gateway: Gateway,
    judge_template: str,
) -> tuple[int, str]:
    """Ask the judge model per answer; returns (score, last verdict).

    A verdict outside Yes/Half/No is retried once uncached, then fails.
    """
    if qa.cardinality == CARD_NONE:
        raise ScoreError("time accuracy is undefined for no-answer items")
    scores: list[int] = []
    verdict = ""
    for refs in qa.time_refs:
        prompt = judge_template.format(entity_date=format_judge_dates(refs), response=response)
        request = ChatRequest(
            model=gateway.provider.model,
            system=prompt,
            user="",
            temperature=JUDGE_TEMPERATURE,
        )
        text = gateway.cached_complete(request)
        parsed = parse_verdict(text)
        if parsed is None:
            text = gateway.complete(request)
            parsed = parse_verdict(text)
            if parsed is None:
                raise ScoreError(f"judge verdict not in {JUDGE_VERDICTS}: {text!r}")
        verdict = parsed
        scores.append(_VERDICT_SCORE[parsed.lower()])
    if not scores:
        return 0, verdict
    return _snap(sum(scores) / len(scores)), verdict


def score_time(
    qa: QAItem,
    response: str,
    mode: str = "deterministic",
    config: EvalConfig = EvalConfig(),
    gateway: Gateway | None = None,
    judge_template: str | None = None,
) -> tuple[int, str | None]:
    if mode == "deterministic":
        return deterministic_time_score(qa, response, config), None
    if mode == "judge":
        if gateway is None or judge_template is None:
            raise ScoreError("judge mode needs a gateway and the judge prompt")
        return judge_time_score(qa, response, gateway, judge_template)
    raise ScoreError(f"unknown time-scoring mode {mode!r}")


def score_hops(
    qa: QAItem, response: str, config: EvalConfig = EvalConfig(),
    domain_values: Sequence[str] | None = None,
) -> list[bool]:
    """Per-hop correctness: any gold surface form present, in order.

    The final hop additionally requires full answer correctness.
    """
    if not qa.hops:
        raise ScoreError(f"item {qa.id} carries no hop metadata")
    folded = fold_text(response)
    results: list[bool] = []
    for hop in qa.hops:
        hit = any(_contains(folded, gold, config) for gold in hop.gold)
        results.append(hit)
    results[-1] = results[-1] and score_answer(qa, response, config, domain_values)
    return results


@dataclass
class ScoreRecord:
    qa_id: str
    model_id: str
    answer_correct: bool
    time_score: int | None  # None: not applicable (no-answer items)
    at_correct: bool
    hop_correct: list[bool] | None = None
    judge_verdict: str | None = None
    response_ref: str = ""

    def to_record(self) -> dict[str, Any]:
        return {
            "qa_id": self.qa_id,
            "model_id": self.model_id,
            "answer_correct": self.answer_correct,
            "time_score": self.time_score,
            "at_correct": self.at_correct,
            "hop_correct": self.hop_correct,
            "judge_verdict": self.judge_verdict,
            "response_ref": self.response_ref,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "ScoreRecord":
        return cls(
            qa_id=record["qa_id"],
            model_id=record.get("model_id", ""),
            answer_correct=record["answer_correct"],
            time_score=record["time_score"],
            at_correct=record["at_correct"],
            hop_correct=record.get("hop_correct"),
            judge_verdict=record.get("judge_verdict"),
            response_ref=record.get("response_ref", ""),
        )


def score_response(
    qa: QAItem,
    response: str,
    model_id: str = "",
    mode: str = "deterministic",
    config: EvalConfig = EvalConfig(),
    gateway: Gateway | None = None,
    judge_template: str | None = None,
    domain_values: Sequence[str] | None = None,
    response_ref: str = "",
) -> ScoreRecord:
    """Full scoring of one response against one benchmark item."""
    answer_ok = score_answer(qa, response, config, domain_values)
    if qa.cardinality == CARD_NONE:
        time_score: int | None = None
        verdict = None
        at_ok = answer_ok
    else:
        time_score, verdict = score_time(qa, response, mode, config, gateway, judge_template)
        at_ok = answer_ok and time_score == 100
    hops = score_hops(qa, response, config, domain_values) if qa.hops else None
    return ScoreRecord(
        qa_id=qa.id,
        model_id=model_id,
        answer_correct=answer_ok,
        time_score=time_score,
        at_correct=at_ok,
        hop_correct=hops,
        judge_verdict=verdict,
        response_ref=response_ref,
    )


# --- aggregation ------------------------------------------------------------

SPAN_BASE = 1985
SPAN_WIDTH = 5


def span_bucket(year: int) -> str:
    start = SPAN_BASE + SPAN_WIDTH * ((year - SPAN_BASE) // SPAN_WIDTH)
    return f"{start}-{start + SPAN_WIDTH - 1}"


@dataclass
class SliceStats:
    slice_type: str
    slice_value: str
    count: int
    answer_mean: float
    time_mean: float | None
    at_mean: float
    delta: float
    hallucination: dict[int, float] = field(default_factory=dict)  # H_i, percent


@dataclass
class AggregateReport:
    slices: list[SliceStats]


def _slice_keys(qa: QAItem) -> list[tuple[str, str]]:
    keys = [("overall", "all")]
    keys.append(("relation", qa.relation.tag if qa.relation else "(none)"))
    keys.append(("cardinality", qa.cardinality))
    dataset = str(qa.provenance.get("dataset", "")) or "(unknown)"
    keys.append(("domain", dataset))
    if qa.answers:
        keys.append(("span", span_bucket(qa.answers[0].interval.start.year)))
    if qa.hops:
        keys.append(("hops", str(len(qa.hops))))
    return keys


def aggregate(
    records: Sequence[ScoreRecord],
    items: dict[str, QAItem],
    slice_types: Sequence[str] | None = None,
) -> AggregateReport:
    """Slice means of A, T, AT, their gap, and per-hop hallucination rates.

    H_i is computed among records correct through hop i: the fraction
    that go wrong at hop i+1. An empty denominator leaves H_i absent
    rather than zero.
    """
    groups: dict[tuple[str, str], list[ScoreRecord]] = {}
    for record in records:
        if record.qa_id not in items:
            raise ScoreError(f"score record references unknown item {record.qa_id}")
        for key in _slice_keys(items[record.qa_id]):
            groups.setdefault(key, []).append(record)

    slices: list[SliceStats] = []
    for (slice_type, slice_value), members in sorted(groups.items()):
        if slice_types and slice_type not in slice_types and slice_type != "overall":
            continue
        n = len(members)
        a_mean = 100.0 * sum(r.answer_correct for r in members) / n
        timed = [r.time_score for r in members if r.time_score is not None]
        t_mean = sum(timed) / len(timed) if timed else None
        at_mean = 100.0 * sum(r.at_correct for r in members) / n
        halluc: dict[int, float] = {}
        max_hops = max((len(r.hop_correct) for r in members if r.hop_correct), default=0)
        for i in range(1, max_hops):
            reached = [r for r in members if r.hop_correct and len(r.hop_correct) > i and all(r.hop_correct[:i])]
            if reached:
                failed = sum(1 for r in reached if not r.hop_correct[i])
                halluc[i] = 100.0 * failed / len(reached)
        slices.append(
            SliceStats(
                slice_type=slice_type,
                slice_value=slice_value,
                count=n,
                answer_mean=a_mean,
                time_mean=t_mean,
                at_mean=at_mean,
                delta=a_mean - at_mean,
                hallucination=halluc,
            )
        )
    return AggregateReport(slices=slices)


def report_csv(report: AggregateReport) -> str:
    max_h = max((max(s.hallucination, default=0) for s in report.slices), default=0)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["slice_type", "slice_value", "n", "A", "T", "AT", "delta"]
    header += [f"H_{i}" for i in range(1, max_h + 1)]
    writer.writerow(header)
    for s in report.slices:
        row = [
            s.slice_type,
            s.slice_value,
            s.count,
            f"{s.answer_mean:.1f}",
            "" if s.time_mean is None else f"{s.time_mean:.1f}",
            f"{s.at_mean:.1f}",
            f"{s.delta:.1f}",
        ]
        row += ["" if i not in s.hallucination else f"{s.hallucination[i]:.1f}" for i in range(1, max_h + 1)]
        writer.writerow(row)
    return buffer.getvalue()


def report_text(report: AggregateReport) -> str:
    """Aligned table with A, AT, and their gap per slice."""
    max_h = max((max(s.hallucination, default=0) for s in report.slices), default=0)
    headers = ["slice", "n", "A", "T", "AT", "delta"] + [f"H_{i}" for i in range(1, max_h + 1)]
    rows = []
    for s in report.slices:
        row = [
            f"{s.slice_type}:{s.slice_value}",
            str(s.count),
            f"{s.answer_mean:.1f}",
            "-" if s.time_mean is None else f"{s.time_mean:.1f}",
            f"{s.at_mean:.1f}",
            f"{s.delta:.1f}",
        ]
        row += ["-" if i not in s.hallucination else f"{s.hallucination[i]:.1f}" for i in range(1, max_h + 1)]
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"


def write_scores(records: Sequence[ScoreRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_record(), ensure_ascii=False))
            handle.write("\n")
