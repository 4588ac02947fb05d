"""Uni-temporal relations: loading, timeslices, dependency checks, joins.

A relation is a named table whose rows each carry one valid-time
interval. Relations are immutable after load; every operation here is a
pure read. Rows are never coalesced on load: adjacent duplicates are
the user's data as-is, because merging them would silently change
answer cardinality downstream.
"""
from __future__ import annotations

import csv
import unicodedata
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .errors import InferenceError, LoadError
from .timepoints import (
    Granularity,
    Interval,
    TimePoint,
    DateError,
    finer,
    intersect,
    overlaps,
    valid_at,
)

JOIN_START = "start"
JOIN_END = "end"


def clean_value(raw: str) -> str:
    """Normalize a cell for comparisons: NFC plus trimming, no case folding."""
    return unicodedata.normalize("NFC", raw).strip()


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    kind: str = "text"  # "text" | "date"


@dataclass(frozen=True)
class TFDecl:
    """X -> Y; temporal=True additionally requires overlap of valid times."""

    lhs: tuple[str, ...]
    rhs: tuple[str, ...]
    temporal: bool = True

    def __post_init__(self) -> None:
        if set(self.lhs) & set(self.rhs):
            raise LoadError(f"dependency sides overlap: {self.describe()}")

    def describe(self) -> str:
        arrow = "-T>" if self.temporal else "->"
        return f"{', '.join(self.lhs)} {arrow} {', '.join(self.rhs)}"


@dataclass(frozen=True)
class Row:
    values: dict[str, str]
    interval: Interval
    sources: tuple[int, int] | None = None  # (left idx, right idx) for joined rows

    def project(self, attrs: Sequence[str]) -> tuple[str, ...]:
        return tuple(self.values[a] for a in attrs)


@dataclass
class TemporalRelation:
    name: str
    schema: list[AttributeSchema]
    start_attr: str
    end_attr: str
    granularity: Granularity
    tuples: list[Row] = field(default_factory=list)
    tfds: list[TFDecl] = field(default_factory=list)

    @property
    def value_attrs(self) -> list[str]:
        """Schema attribute names minus the two timestamp attributes."""
        return [a.name for a in self.schema if a.name not in (self.start_attr, self.end_attr)]

    @property
    def attr_names(self) -> list[str]:
        return [a.name for a in self.schema]

    def has_attr(self, name: str) -> bool:
        return name in self.attr_names

    def is_timestamp(self, name: str) -> bool:
        return name in (self.start_attr, self.end_attr)

    def schema_line(self) -> str:
        """Human-readable schema, e.g. Leader(country, role, name, start, end)."""
        return f"{self.name}({', '.join(self.attr_names)})"

    def row_cells(self, row: Row) -> list[str]:
        """Serialize one row in schema order; open ends render as NULL."""
        cells = []
        for attr in self.attr_names:
            if attr == self.start_attr:
                cells.append(row.interval.start.iso())
            elif attr == self.end_attr:
                cells.append("NULL" if row.interval.end is None else row.interval.end.iso())
            else:
                cells.append(row.values[attr])
        return cells


def _validate_tfd_attrs(relation: TemporalRelation, tfd: TFDecl) -> None:
    for attr in (*tfd.lhs, *tfd.rhs):
        if not relation.has_attr(attr):
            raise LoadError(f"{relation.name}: dependency names unknown attribute {attr!r}")
        if relation.is_timestamp(attr):
            raise LoadError(f"{relation.name}: dependency must not use timestamp attribute {attr!r}")


def _parse_point(cell: str, granularity: Granularity, where: str) -> TimePoint:
    try:
        point = TimePoint.parse(cell)
    except DateError as exc:
        raise LoadError(f"{where}: {exc}") from exc
    if point.granularity is not granularity:
        raise LoadError(
            f"{where}: date {cell!r} is {point.granularity.value}-granularity, "
            f"relation declares {granularity.value}"
        )
    return point


def load_relation(
    name: str,
    schema: Sequence[AttributeSchema],
    start_attr: str,
    end_attr: str,
    granularity: Granularity,
    rows: Iterable[Sequence[str]] | Iterator[Sequence[str]],
    header: Sequence[str],
    tfds: Sequence[TFDecl] = (),
) -> TemporalRelation:
    """Build a validated relation from already-split CSV rows.

    The header must match the declared schema exactly (order included).
    An empty cell or the literal NULL in the end column marks an
    open-ended row. Errors name the offending row and column.
    """
    names = [a.name for a in schema]
    if len(set(names)) != len(names):
        raise LoadError(f"{name}: duplicate attribute names in schema")
    if start_attr not in names or end_attr not in names:
        raise LoadError(f"{name}: start/end attributes must appear in the schema")
    if list(header) != names:
        raise LoadError(f"{name}: CSV header {list(header)} does not match schema {names}")

    relation = TemporalRelation(
        name=name,
        schema=list(schema),
        start_attr=start_attr,
        end_attr=end_attr,
        granularity=granularity,
        tfds=list(tfds),
    )
    start_idx = names.index(start_attr)
    end_idx = names.index(end_attr)

    for lineno, raw in enumerate(rows, start=2):  # header is line 1
        if len(raw) != len(names):
            raise LoadError(f"{name} row {lineno}: expected {len(names)} cells, got {len(raw)}")
        cells = [clean_value(c) for c in raw]
        start = _parse_point(cells[start_idx], granularity, f"{name} row {lineno} column {start_attr!r}")
        end_cell = cells[end_idx]
        end: TimePoint | None
        if end_cell == "" or end_cell.upper() == "NULL":
            end = None
        else:
            end = _parse_point(end_cell, granularity, f"{name} row {lineno} column {end_attr!r}")
        if end is not None and start.first_day() > end.first_day():
            raise LoadError(
                f"{name} row {lineno}: start {start.iso()} after end {end.iso()}"
            )
        values = {
            attr: cells[i]
            for i, attr in enumerate(names)
            if attr not in (start_attr, end_attr)
        }
        relation.tuples.append(Row(values=values, interval=Interval(start, end)))

    for tfd in relation.tfds:
        _validate_tfd_attrs(relation, tfd)
    return relation


def load_relation_csv(
    name: str,
    schema: Sequence[AttributeSchema],
    start_attr: str,
    end_attr: str,
    granularity: Granularity,
    csv_path,
    tfds: Sequence[TFDecl] = (),
) -> TemporalRelation:
    with open(csv_path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{name}: {csv_path} is empty, expected a header row") from None
        return load_relation(name, schema, start_attr, end_attr, granularity, reader, header, tfds)


def timeslice(relation: TemporalRelation, t: TimePoint) -> list[Row]:
    """Rows whose interval contains ``t``; open ends contain every later t."""
    return [row for row in relation.tuples if valid_at(row.interval, t)]


@dataclass(frozen=True)
class TfdViolation:
    first_index: int
    second_index: int
    lhs_values: tuple[str, ...]
    first_rhs: tuple[str, ...]
    second_rhs: tuple[str, ...]

    def describe(self) -> str:
        return (
            f"rows {self.first_index} and {self.second_index} agree on {self.lhs_values} "
            f"but disagree: {self.first_rhs} vs {self.second_rhs}"
        )


@dataclass(frozen=True)
class TfdReport:
    tfd: TFDecl
    holds: bool
    violations: tuple[TfdViolation, ...]


def check_tfd(relation: TemporalRelation, tfd: TFDecl) -> TfdReport:
    """Verify a (temporal) functional dependency on a relation instance.

    For temporal dependencies a violating pair must share at least one
    timepoint of validity; plain dependencies ignore intervals entirely
    (needed for join-side keys such as single-event tables).
    """
    _validate_tfd_attrs(relation, tfd)
    violations: list[TfdViolation] = []
    rows = relation.tuples
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if tfd.temporal and not overlaps(rows[i].interval, rows[j].interval):
                continue
            if rows[i].project(tfd.lhs) != rows[j].project(tfd.lhs):
                continue
            if rows[i].project(tfd.rhs) != rows[j].project(tfd.rhs):
                violations.append(
                    TfdViolation(
                        first_index=i,
                        second_index=j,
                        lhs_values=rows[i].project(tfd.lhs),
                        first_rhs=rows[i].project(tfd.rhs),
                        second_rhs=rows[j].project(tfd.rhs),
                    )
                )
    return TfdReport(tfd=tfd, holds=not violations, violations=tuple(violations))


def temporal_natural_join(
    left: TemporalRelation,
    right: TemporalRelation,
    name: str | None = None,
) -> TemporalRelation:
    """Join on shared non-timestamp attributes, intersecting intervals.

    Output rows agree on the shared attributes, carry the union of
    non-timestamp attributes, and carry the intersection of the two
    input intervals; empty intersections are dropped. The joined
    timestamps are always named ``start``/``end``.
    """
    shared = [a for a in left.value_attrs if a in right.value_attrs]
    if not shared:
        raise LoadError(f"no shared attributes between {left.name} and {right.name}")
    out_attrs = list(left.value_attrs) + [a for a in right.value_attrs if a not in shared]
    schema = [AttributeSchema(a, "text") for a in out_attrs]
    schema += [AttributeSchema(JOIN_START, "date"), AttributeSchema(JOIN_END, "date")]
    joined = TemporalRelation(
        name=name or f"{left.name}_join_{right.name}",
        schema=schema,
        start_attr=JOIN_START,
        end_attr=JOIN_END,
        granularity=finer(left.granularity, right.granularity),
    )
    for li, lrow in enumerate(left.tuples):
        for ri, rrow in enumerate(right.tuples):
            if lrow.project(shared) != rrow.project(shared):
                continue
            common = intersect(lrow.interval, rrow.interval)
            if common is None:
                continue
            values = dict(lrow.values)
            values.update({a: rrow.values[a] for a in right.value_attrs if a not in shared})
            joined.tuples.append(Row(values=values, interval=common, sources=(li, ri)))
    return joined


def infer_joined_tfd(fd: TFDecl, tfd: TFDecl, joined: TemporalRelation) -> TFDecl:
    """Chain an FD with a TFD across a join and confirm it empirically.

    Given fd: X -> Z on one side and tfd: Z' -T> Y on the other with
    Z subset of Z', the chained candidate is
    X union (Z' minus Z) -T> Y. The candidate is verified on the joined
    instance; a failure signals dirty data and aborts.
    """
    if not set(fd.rhs) <= set(tfd.lhs):
        raise InferenceError(
            f"cannot chain {fd.describe()} with {tfd.describe()}: "
            f"{fd.rhs} is not covered by the temporal dependency's left side"
        )
    carried = tuple(a for a in tfd.lhs if a not in fd.rhs)
    candidate = TFDecl(lhs=tuple(fd.lhs) + carried, rhs=tfd.rhs, temporal=True)
    report = check_tfd(joined, candidate)
    if not report.holds:
        detail = "; ".join(v.describe() for v in report.violations[:3])
        raise InferenceError(
            f"inferred dependency {candidate.describe()} fails on {joined.name}: {detail}"
        )
    return candidate


def with_open_end(relation: TemporalRelation, index: int) -> TemporalRelation:
    """Copy of the relation with one row's end blanked (testing helper)."""
    rows = list(relation.tuples)
    row = rows[index]
    rows[index] = replace(row, interval=Interval(row.interval.start, None))
    out = TemporalRelation(
        name=relation.name,
        schema=list(relation.schema),
        start_attr=relation.start_attr,
        end_attr=relation.end_attr,
        granularity=relation.granularity,
        tfds=list(relation.tfds),
    )
    out.tuples = rows
    return out
