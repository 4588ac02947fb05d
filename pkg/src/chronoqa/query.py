"""Query ASTs, the printed SQL dialect, and direct execution.

The executor evaluates the AST directly against a relation; no SQL
engine is embedded. Printed SQL exists for conversion prompts, records,
and human audit, and is a documented stable format:

    SELECT <attrs> FROM <relation> WHERE <key>='<value>' AND ... AND <temporal>

with temporal atoms rendered as one of

    <attr> < '<date>'            <attr> > '<date>'         <attr> = '<date>'
    <attr> BETWEEN '<lo>' AND '<hi>'        (strict bounds: lo < attr < hi)
    <attr> IS NULL
    date(<attr>) = date('<date>', '<signed count> <unit>')

Dates print in ISO order at their own granularity. String literals use
single quotes with doubled-quote escaping. The emitted dialect
round-trips through ``parse_sql``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Any

from .allen import (
    Atom,
    BETWEEN,
    EQ,
    EQ_SHIFTED,
    GT,
    IS_NULL,
    LT,
    ReferenceInterval,
    RelationTag,
    TemporalCondition,
    eval_condition,
)
from .errors import QueryError
from .store import Row, TemporalRelation, clean_value
from .timepoints import Duration, Interval, TimePoint


@dataclass(frozen=True)
class KeyPredicate:
    attr: str
    value: str


@dataclass(frozen=True)
class Provenance:
    """Where a generated query came from; carried for audit and ids."""

    dataset: str
    relation_name: str
    tuple_index: int
    tfd_lhs: tuple[str, ...]
    tfd_rhs: tuple[str, ...]
    relation: RelationTag | None
    reference: ReferenceInterval | None
    seed: int
    mode: str  # "satisfying" | "miss" | "base"


@dataclass(frozen=True)
class QueryAst:
    relation_name: str
    select_attrs: tuple[str, ...]
    key_predicates: tuple[KeyPredicate, ...]
    condition: TemporalCondition | None = None
    provenance: Provenance | None = None


@dataclass(frozen=True)
class ResultRow:
    values: dict[str, str]
    interval: Interval
    source_index: int


def _quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def _print_atom(atom: Atom, start_attr: str, end_attr: str) -> str:
    attr = start_attr if atom.field == "start" else end_attr
    if atom.op == IS_NULL:
        return f"{attr} IS NULL"
    if atom.op == LT:
        return f"{attr} < {_quote(atom.value.iso())}"
    if atom.op == GT:
        return f"{attr} > {_quote(atom.value.iso())}"
    if atom.op == EQ:
        return f"{attr} = {_quote(atom.value.iso())}"
    if atom.op == BETWEEN:
        return f"{attr} BETWEEN {_quote(atom.value.iso())} AND {_quote(atom.hi.iso())}"
    if atom.op == EQ_SHIFTED:
        sign = "+" if atom.shift_by.count >= 0 else "-"
        magnitude = abs(atom.shift_by.count)
        arith = _quote(f"{sign}{magnitude} {atom.shift_by.unit}")
        return f"date({attr}) = date({_quote(atom.value.iso())}, {arith})"
    raise QueryError(f"cannot print atom op {atom.op!r}")


def print_sql(ast: QueryAst, start_attr: str = "start", end_attr: str = "end") -> str:
    """Render the AST as a single SELECT statement, deterministically."""
    parts = [f"{p.attr}={_quote(p.value)}" for p in ast.key_predicates]
    if ast.condition is not None:
        parts += [_print_atom(a, start_attr, end_attr) for a in ast.condition]
    where = f" WHERE {' AND '.join(parts)}" if parts else ""
    return f"SELECT {', '.join(ast.select_attrs)} FROM {ast.relation_name}{where}"


_SHAPE_RE = re.compile(
    r"^SELECT\s+(?P<select>.+?)\s+FROM\s+(?P<rel>\S+)(?:\s+WHERE\s+(?P<where>.+))?$",
    re.DOTALL,
)
_DATE_FN_RE = re.compile(
    r"^date\((?P<attr>\w+)\)\s*=\s*date\('(?P<base>[^']+)',\s*'(?P<sign>[+-])(?P<count>\d+)\s+(?P<unit>\w+)'\)$"
)
_BETWEEN_RE = re.compile(r"^(?P<attr>\w+)\s+BETWEEN\s+'(?P<lo>[^']+)'\s+AND\s+'(?P<hi>[^']+)'$")
_NULL_RE = re.compile(r"^(?P<attr>\w+)\s+IS\s+NULL$", re.IGNORECASE)
_CMP_RE = re.compile(r"^(?P<attr>\w+)\s*(?P<op>[<>=])\s*'(?P<value>(?:[^']|'')*)'$")


_INCOMPLETE_BETWEEN = re.compile(r"^\w+\s+BETWEEN\s+'(?:[^']|'')*'$", re.IGNORECASE)


def _split_conjuncts(where: str) -> list[str]:
    """Split on AND outside quotes, keeping BETWEEN ... AND ... intact."""
    pieces: list[str] = []
    token: list[str] = []
    in_quote = False
    i = 0
    while i < len(where):
        ch = where[i]
        if ch == "'":
            in_quote = not in_quote
            token.append(ch)
            i += 1
            continue
        if not in_quote and where[i : i + 5].upper() == " AND ":
            pieces.append("".join(token).strip())
            token = []
            i += 5
            continue
        token.append(ch)
        i += 1
    pieces.append("".join(token).strip())
    merged: list[str] = []
    for piece in pieces:
        if merged and _INCOMPLETE_BETWEEN.match(merged[-1]):
            merged[-1] = f"{merged[-1]} AND {piece}"
        else:
            merged.append(piece)
    return merged


def parse_sql(text: str, start_attr: str = "start", end_attr: str = "end") -> QueryAst:
    """Parse a statement previously produced by ``print_sql``.

    Only the emitted dialect subset is supported; this exists so records
    can be audited and round-tripped, not as a general SQL parser.
    """
    m = _SHAPE_RE.match(text.strip())
    if not m:
        raise QueryError(f"unparsable statement: {text!r}")
    select = tuple(a.strip() for a in m.group("select").split(","))
    relation_name = m.group("rel")
    keys: list[KeyPredicate] = []
    atoms: list[Atom] = []
    where = m.group("where")
    if where:
        for piece in _split_conjuncts(where):
            fn = _DATE_FN_RE.match(piece)
            if fn:
                field = "start" if fn.group("attr") == start_attr else "end"
                count = int(fn.group("count"))
                if fn.group("sign") == "-":
                    count = -count
                atoms.append(
                    Atom(
                        field,
                        EQ_SHIFTED,
                        TimePoint.parse(fn.group("base")),
                        shift_by=Duration(count, fn.group("unit")),
                    )
                )
                continue
            bt = _BETWEEN_RE.match(piece)
            if bt and bt.group("attr") in (start_attr, end_attr):
                field = "start" if bt.group("attr") == start_attr else "end"
                atoms.append(
                    Atom(field, BETWEEN, TimePoint.parse(bt.group("lo")), hi=TimePoint.parse(bt.group("hi")))
                )
                continue
            nl = _NULL_RE.match(piece)
            if nl and nl.group("attr") in (start_attr, end_attr):
                field = "start" if nl.group("attr") == start_attr else "end"
                atoms.append(Atom(field, IS_NULL))
                continue
            cmp_m = _CMP_RE.match(piece)
            if cmp_m:
                attr = cmp_m.group("attr")
                literal = cmp_m.group("value").replace("''", "'")
                if attr in (start_attr, end_attr):
                    field = "start" if attr == start_attr else "end"
                    op = {"<": LT, ">": GT, "=": EQ}[cmp_m.group("op")]
                    atoms.append(Atom(field, op, TimePoint.parse(literal)))
                elif cmp_m.group("op") == "=":
                    keys.append(KeyPredicate(attr, literal))
                else:
                    raise QueryError(f"non-equality predicate on value attribute: {piece!r}")
                continue
            raise QueryError(f"unparsable conjunct: {piece!r}")
    condition = TemporalCondition(tuple(atoms)) if atoms else None
    return QueryAst(relation_name, select, tuple(keys), condition)


def execute(ast: QueryAst, store: TemporalRelation) -> list[ResultRow]:
    """Rows satisfying all key predicates and the temporal condition.

    Key comparisons are exact string equality after normalization and
    trimming; date comparisons happen at the dataset's granularity.
    Output order follows storage order.
    """
    if ast.relation_name != store.name:
        raise QueryError(f"query targets {ast.relation_name!r}, store is {store.name!r}")
    for attr in ast.select_attrs:
        if not store.has_attr(attr):
            raise QueryError(f"unknown attribute {attr!r} in SELECT")
    for pred in ast.key_predicates:
        if not store.has_attr(pred.attr):
            raise QueryError(f"unknown attribute {pred.attr!r} in predicate")
        if store.is_timestamp(pred.attr):
            raise QueryError(f"type mismatch: key predicate on date attribute {pred.attr!r}")

    results: list[ResultRow] = []
    for index, row in enumerate(store.tuples):
        if any(row.values[p.attr] != clean_value(p.value) for p in ast.key_predicates):
            continue
        if not eval_condition(ast.condition, row.interval):
            continue
        values = {a: row.values[a] for a in ast.select_attrs if not store.is_timestamp(a)}
        results.append(ResultRow(values=values, interval=row.interval, source_index=index))
    return results


def strip_temporal(ast: QueryAst) -> QueryAst:
    """The same query without its temporal condition (idempotent)."""
    if ast.condition is None:
        return ast
    return replace(ast, condition=None)


def ast_signature(ast: QueryAst) -> dict[str, Any]:
    """Canonical, JSON-ready view of the AST fields used for hashing."""
    atoms = []
    if ast.condition is not None:
        for atom in ast.condition:
            atoms.append(
                {
                    "field": atom.field,
                    "op": atom.op,
                    "value": atom.value.iso() if atom.value else None,
                    "hi": atom.hi.iso() if atom.hi else None,
                    "shift": atom.shift_by.text() if atom.shift_by else None,
                }
            )
    return {
        "relation_name": ast.relation_name,
        "select": list(ast.select_attrs),
        "keys": [[p.attr, p.value] for p in ast.key_predicates],
        "atoms": atoms,
    }
