"""The thirteen interval relations: predicates, conditions, criteria, sampling.

Between two fully-specified, non-degenerate intervals exactly one of
the thirteen relations holds. ``classify`` decides which; ``holds``
tests a named relation between a candidate interval ``a`` and a
sampled reference interval ``b``; ``condition_for`` emits the same
test as a symbolic condition over ``a.start``/``a.end`` that the query
executor can evaluate, so predicate and condition agree by
construction.

The ``current`` variant handles facts that are still valid: it is an
overlap whose second conjunct is an IS NULL test on the end timestamp.

One published rendering of the finished-by condition (both endpoints
strictly earlier) breaks the mutual-exclusivity of the thirteen
relations and contradicts its own end-only verification criteria; the
default here uses end-equality, and ``paper_literal=True`` reproduces
the looser form for side-by-side comparison.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .errors import SamplerError
from .timepoints import (
    Duration,
    Granularity,
    Interval,
    TimePoint,
    apply_duration,
    diff_units,
    eq,
    gt,
    lt,
    shift,
)


class AllenRelation(str, Enum):
    BEFORE = "before"
    AFTER = "after"
    MEET = "meet"
    MET_BY = "met_by"
    OVERLAP = "overlap"
    OVERLAPPED_BY = "overlapped_by"
    EQUAL = "equal"
    START = "start"
    STARTED_BY = "started_by"
    FINISH = "finish"
    FINISHED_BY = "finished_by"
    DURING = "during"
    CONTAIN = "contain"


@dataclass(frozen=True)
class RelationTag:
    """An Allen relation plus the current-variant flag (overlap only)."""

    base: AllenRelation
    current: bool = False

    def __post_init__(self) -> None:
        if self.current and self.base is not AllenRelation.OVERLAP:
            raise ValueError("the current variant only applies to overlap")

    @property
    def tag(self) -> str:
        return "overlap-current" if self.current else self.base.value

    @classmethod
    def parse(cls, text: str) -> "RelationTag":
        text = text.strip().lower().replace("-", "_")
        if text in ("overlap_current", "current"):
            return cls(AllenRelation.OVERLAP, current=True)
        return cls(AllenRelation(text))


ALL_BASE_TAGS = tuple(RelationTag(r) for r in AllenRelation)
CURRENT_TAG = RelationTag(AllenRelation.OVERLAP, current=True)

# Which time references a response must state, per relation.
_CRITERIA: dict[str, frozenset[str]] = {
    "before": frozenset({"end"}),
    "after": frozenset({"start"}),
    "meet": frozenset({"end"}),
    "met_by": frozenset({"start"}),
    "overlap": frozenset({"start", "end"}),
    "overlap-current": frozenset({"start"}),
    "overlapped_by": frozenset({"start", "end"}),
    "equal": frozenset({"start", "end"}),
    "start": frozenset({"start", "end"}),
    "started_by": frozenset({"start"}),
    "finish": frozenset({"start", "end"}),
    "finished_by": frozenset({"end"}),
    "during": frozenset({"start", "end"}),
    "contain": frozenset({"start", "end"}),
}

BOTH_REFS = frozenset({"start", "end"})


def criteria_for(relation: RelationTag | None) -> frozenset[str]:
    """Time references to verify; base queries without a relation need both."""
    if relation is None:
        return BOTH_REFS
    return _CRITERIA[relation.tag]


@dataclass(frozen=True)
class ReferenceInterval:
    """The sampled constraint interval b, with its derived length."""

    start: TimePoint
    end: TimePoint
    length: Duration

    def __post_init__(self) -> None:
        if self.start.first_day() > self.end.first_day():
            raise ValueError("reference interval start after end")


class DegenerateIntervalError(ValueError):
    """start == end at the working granularity: several relations collapse."""


def classify(a: Interval, b: Interval) -> AllenRelation:
    """The unique relation between two closed, non-degenerate intervals."""
    if a.end is None or b.end is None:
        raise ValueError("classify requires closed intervals")
    if eq(a.start, a.end) or eq(b.start, b.end):
        raise DegenerateIntervalError("degenerate interval (start == end)")
    if lt(a.end, b.start):
        return AllenRelation.BEFORE
    if gt(a.start, b.end):
        return AllenRelation.AFTER
    if eq(a.end, b.start):
        return AllenRelation.MEET
    if eq(a.start, b.end):
        return AllenRelation.MET_BY
    starts = eq(a.start, b.start)
    ends = eq(a.end, b.end)
    if starts and ends:
        return AllenRelation.EQUAL
    if starts:
        return AllenRelation.START if lt(a.end, b.end) else AllenRelation.STARTED_BY
    if ends:
        return AllenRelation.FINISH if gt(a.start, b.start) else AllenRelation.FINISHED_BY
    if lt(a.start, b.start):
        return AllenRelation.CONTAIN if gt(a.end, b.end) else AllenRelation.OVERLAP
    return AllenRelation.DURING if lt(a.end, b.end) else AllenRelation.OVERLAPPED_BY


# --- symbolic conditions -------------------------------------------------

LT, GT, EQ, BETWEEN, IS_NULL, EQ_SHIFTED = "lt", "gt", "eq", "between", "is_null", "eq_shifted"


@dataclass(frozen=True)
class Atom:
    """One comparison of a.start or a.end against reference literals.

    * lt/gt/eq compare against ``value``.
    * between requires value < field < hi (strict bounds; the printed
      BETWEEN keyword is documented as strict in this dialect).
    * is_null matches only open-ended rows.
    * eq_shifted compares against ``value`` shifted by ``shift_by``
      (the date-arithmetic form used for meet and met-by).
    """

    field: str  # "start" | "end"
    op: str
    value: TimePoint | None = None
    hi: TimePoint | None = None
    shift_by: Duration | None = None

    def resolved(self) -> TimePoint | None:
        """The literal to compare with, after applying any shift."""
        if self.op == EQ_SHIFTED:
            return apply_duration(self.value, self.shift_by)
        return self.value


@dataclass(frozen=True)
class TemporalCondition:
    atoms: tuple[Atom, ...]

    def __iter__(self):
        return iter(self.atoms)


def _point(field: str, point: TimePoint) -> TimePoint | None:
    return point


def condition_for(
    relation: RelationTag, b: ReferenceInterval, paper_literal: bool = False
) -> TemporalCondition:
    """Substitute b's fields into the relation's condition as literals."""
    base = relation.base
    if relation.current:
        atoms = (Atom("start", LT, b.start), Atom("end", IS_NULL))
    elif base is AllenRelation.BEFORE:
        atoms = (Atom("end", LT, b.start),)
    elif base is AllenRelation.AFTER:
        atoms = (Atom("start", GT, b.end),)
    elif base is AllenRelation.MEET:
        atoms = (Atom("end", EQ_SHIFTED, b.end, shift_by=Duration(-b.length.count, b.length.unit)),)
    elif base is AllenRelation.MET_BY:
        atoms = (Atom("start", EQ_SHIFTED, b.start, shift_by=b.length),)
    elif base is AllenRelation.OVERLAP:
        atoms = (Atom("start", LT, b.start), Atom("end", BETWEEN, b.start, hi=b.end))
    elif base is AllenRelation.OVERLAPPED_BY:
        atoms = (Atom("end", GT, b.end), Atom("start", BETWEEN, b.start, hi=b.end))
    elif base is AllenRelation.EQUAL:
        atoms = (Atom("start", EQ, b.start), Atom("end", EQ, b.end))
    elif base is AllenRelation.START:
        atoms = (Atom("start", EQ, b.start), Atom("end", LT, b.end))
    elif base is AllenRelation.STARTED_BY:
        atoms = (Atom("start", EQ, b.start), Atom("end", GT, b.end))
    elif base is AllenRelation.FINISH:
        atoms = (Atom("start", GT, b.start), Atom("end", EQ, b.end))
    elif base is AllenRelation.FINISHED_BY:
        if paper_literal:
            atoms = (Atom("start", LT, b.start), Atom("end", LT, b.end))
        else:
            atoms = (Atom("start", LT, b.start), Atom("end", EQ, b.end))
    elif base is AllenRelation.DURING:
        atoms = (Atom("start", GT, b.start), Atom("end", LT, b.end))
    elif base is AllenRelation.CONTAIN:
        atoms = (Atom("start", LT, b.start), Atom("end", GT, b.end))
    else:  # pragma: no cover
        raise ValueError(f"unhandled relation {base}")
    return TemporalCondition(atoms)


def eval_atom(atom: Atom, interval: Interval) -> bool:
    """Evaluate one condition atom against a row's interval.

    Ordering and equality tests on an open end are false (the value is
    unknown); only IS NULL matches open ends.
    """
    point = interval.start if atom.field == "start" else interval.end
    if atom.op == IS_NULL:
        return point is None
    if point is None:
        return False
    if atom.op == LT:
        return lt(point, atom.value)
    if atom.op == GT:
        return gt(point, atom.value)
    if atom.op == EQ:
        return eq(point, atom.value)
    if atom.op == EQ_SHIFTED:
        return eq(point, atom.resolved())
    if atom.op == BETWEEN:
        return gt(point, atom.value) and lt(point, atom.hi)
    raise ValueError(f"unknown atom op {atom.op!r}")


def eval_condition(condition: TemporalCondition | None, interval: Interval) -> bool:
    if condition is None:
        return True
    return all(eval_atom(atom, interval) for atom in condition)


def holds(
    relation: RelationTag, a: Interval, b: ReferenceInterval, paper_literal: bool = False
) -> bool:
    """True iff ``a`` stands in the relation to ``b``.

    Defined as evaluating the relation's condition, so it agrees with
    the executor bit-for-bit, including the date-arithmetic forms of
    meet and met-by.
    """
    return eval_condition(condition_for(relation, b, paper_literal), a)


# --- reference sampling ---------------------------------------------------

_UNIT_FOR = {Granularity.YEAR: "year", Granularity.MONTH: "month", Granularity.DAY: "day"}


@dataclass(frozen=True)
class SamplerConfig:
    """Bounds for reference sampling, per calendar unit.

    offsets drive how far outside ``a`` the reference may sit; lengths
    drive the reference's own extent. Units finer than the working
    granularity are skipped. miss_probability is consumed by the
    generator, not the sampler itself.
    """

    offsets: dict[str, tuple[int, int]]
    lengths: dict[str, tuple[int, int]]
    miss_probability: float = 0.0
    allowed_relations: tuple[str, ...] | None = None

    def usable_units(self, table: dict[str, tuple[int, int]], granularity: Granularity) -> list[str]:
        limit = _UNIT_FOR[granularity]
        ranked = {"year": 0, "month": 1, "day": 2}
        return sorted(
            (u for u in table if ranked[u] <= ranked[limit]),
            key=lambda u: ranked[u],
        )


DEFAULT_SAMPLER = SamplerConfig(
    offsets={"year": (1, 4), "month": (1, 18), "day": (20, 600)},
    lengths={"year": (1, 6), "month": (1, 11), "day": (10, 400)},
)

_NEEDS_CLOSED_A = {
    AllenRelation.BEFORE,
    AllenRelation.MEET,
    AllenRelation.OVERLAP,
    AllenRelation.OVERLAPPED_BY,
    AllenRelation.EQUAL,
    AllenRelation.START,
    AllenRelation.STARTED_BY,
    AllenRelation.FINISH,
    AllenRelation.FINISHED_BY,
    AllenRelation.DURING,
    AllenRelation.CONTAIN,
}


def _pick(rng: random.Random, cfg: SamplerConfig, table: str, granularity: Granularity) -> tuple[int, str]:
    ranges = cfg.offsets if table == "offsets" else cfg.lengths
    units = cfg.usable_units(ranges, granularity)
    if not units:
        raise SamplerError(f"no usable {table} units at {granularity.value} granularity")
    unit = units[rng.randrange(len(units))]
    lo, hi = ranges[unit]
    return rng.randint(lo, hi), unit


def _exact_add(point: TimePoint, count: int, unit: str) -> TimePoint | None:
    """Shift such that shifting back recovers the original, or None.

    Month/year arithmetic clamps days, which can make the round trip
    inexact near month ends; those samples are rejected.
    """
    moved = shift(point, count, unit)
    if shift(moved, -count, unit) != point:
        return None
    return moved


def _interior(rng: random.Random, a: Interval, granularity: Granularity, needed: int = 1) -> list[TimePoint]:
    """``needed`` distinct interior points of a, in order, at base units."""
    unit = _UNIT_FOR[granularity]
    span = diff_units(a.start, a.end, unit)
    if span < needed + 1:
        raise SamplerError(f"interval {a.start.iso()}..{a.end.iso()} too short at {unit} granularity")
    picks = sorted(rng.sample(range(1, span), needed))
    return [shift(a.start, k, unit) for k in picks]


def _length_of(b_start: TimePoint, b_end: TimePoint, granularity: Granularity) -> Duration:
    unit = _UNIT_FOR[granularity]
    return Duration(diff_units(b_start, b_end, unit), unit)


def sample_reference(
    rng: random.Random,
    a: Interval,
    relation: RelationTag,
    config: SamplerConfig = DEFAULT_SAMPLER,
    granularity: Granularity | None = None,
) -> ReferenceInterval:
    """Sample b such that holds(relation, a, b) is true.

    Deterministic given the generator state. Raises SamplerError when no
    satisfying reference exists within the configured bounds (the
    current variant on a closed row, or an interval too short to host
    interior points).
    """
    granularity = granularity or a.start.granularity
    base_unit = _UNIT_FOR[granularity]

    if relation.current:
        if a.end is not None:
            raise SamplerError("current variant requires an open-ended interval")
        o, unit = _pick(rng, config, "offsets", granularity)
        b_start = shift(a.start, o, unit)
        length, lunit = _pick(rng, config, "lengths", granularity)
        b_end = shift(b_start, length, lunit)
        return ReferenceInterval(b_start, b_end, _length_of(b_start, b_end, granularity))

    if a.end is None and relation.base in _NEEDS_CLOSED_A:
        raise SamplerError(f"{relation.tag} needs a closed interval")

    base = relation.base
    if base is AllenRelation.BEFORE:
        o, unit = _pick(rng, config, "offsets", granularity)
        b_start = shift(a.end, o, unit)
        length, lunit = _pick(rng, config, "lengths", granularity)
        b_end = shift(b_start, length, lunit)
    elif base is AllenRelation.AFTER:
        o, unit = _pick(rng, config, "offsets", granularity)
        b_end = shift(a.start, -o, unit)
        length, lunit = _pick(rng, config, "lengths", granularity)
        b_start = shift(b_end, -length, lunit)
    elif base in (AllenRelation.MEET, AllenRelation.MET_BY):
        anchor = a.end if base is AllenRelation.MEET else a.start
        for _ in range(8):
            length, lunit = _pick(rng, config, "lengths", granularity)
            moved = _exact_add(anchor, length if base is AllenRelation.MEET else -length, lunit)
            if moved is not None:
                break
        else:
            # day-unit arithmetic never clamps; fall back when available
            if a.start.granularity is not Granularity.DAY:
                raise SamplerError(f"no clamp-free length for {relation.tag} at {anchor.iso()}")
            length, lunit = config.lengths.get("day", (30, 30))[0], "day"
            moved = shift(anchor, length if base is AllenRelation.MEET else -length, "day")
        if base is AllenRelation.MEET:
            b_start, b_end = anchor, moved
        else:
            b_start, b_end = moved, anchor
        return ReferenceInterval(b_start, b_end, Duration(length, lunit))
    elif base is AllenRelation.OVERLAP:
        (b_start,) = _interior(rng, a, granularity)
        o, unit = _pick(rng, config, "offsets", granularity)
        b_end = shift(a.end, o, unit)
    elif base is AllenRelation.OVERLAPPED_BY:
        o, unit = _pick(rng, config, "offsets", granularity)
        b_start = shift(a.start, -o, unit)
        (b_end,) = _interior(rng, a, granularity)
    elif base is AllenRelation.EQUAL:
        b_start, b_end = a.start, a.end
    elif base is AllenRelation.START:
        b_start = a.start
        o, unit = _pick(rng, config, "offsets", granularity)
        b_end = shift(a.end, o, unit)
    elif base is AllenRelation.STARTED_BY:
        b_start = a.start
        (b_end,) = _interior(rng, a, granularity)
    elif base is AllenRelation.FINISH:
        o, unit = _pick(rng, config, "offsets", granularity)
        b_start = shift(a.start, -o, unit)
        b_end = a.end
    elif base is AllenRelation.FINISHED_BY:
        (b_start,) = _interior(rng, a, granularity)
        b_end = a.end
    elif base is AllenRelation.DURING:
        o1, u1 = _pick(rng, config, "offsets", granularity)
        o2, u2 = _pick(rng, config, "offsets", granularity)
        b_start = shift(a.start, -o1, u1)
        b_end = shift(a.end, o2, u2)
    elif base is AllenRelation.CONTAIN:
        b_start, b_end = _interior(rng, a, granularity, needed=2)
    else:  # pragma: no cover
        raise SamplerError(f"unhandled relation {base}")

    return ReferenceInterval(b_start, b_end, _length_of(b_start, b_end, granularity))


def sample_miss(
    rng: random.Random,
    a: Interval,
    relation: RelationTag,
    config: SamplerConfig = DEFAULT_SAMPLER,
    granularity: Granularity | None = None,
    paper_literal: bool = False,
) -> ReferenceInterval:
    """Sample b such that holds(relation, a, b) is deliberately false.

    A satisfying reference is shifted until the predicate fails; the
    generator layer additionally retries until the whole relation
    yields no rows where possible.
    """
    granularity = granularity or a.start.granularity
    satisfying = sample_reference(rng, a, relation, config, granularity)
    unit = _UNIT_FOR[granularity]
    # geometric deltas: equalities flip at +-1, wide inequalities need the
    # reference pushed past the whole candidate interval
    for exponent in range(17):
        for delta in (2**exponent, -(2**exponent)):
            try:
                b = ReferenceInterval(
                    shift(satisfying.start, delta, unit),
                    shift(satisfying.end, delta, unit),
                    satisfying.length,
                )
            except ValueError:
                continue
            if not holds(relation, a, b, paper_literal):
                return b
    raise SamplerError(f"could not construct a missing reference for {relation.tag}")
