import random

import pytest

from chronoqa.errors import InferenceError, LoadError
from chronoqa.store import (
    AttributeSchema,
    TFDecl,
    TemporalRelation,
    Row,
    check_tfd,
    infer_joined_tfd,
    load_relation,
    temporal_natural_join,
    timeslice,
    with_open_end,
)
from chronoqa.timepoints import Granularity, Interval, TimePoint

LEADER_SCHEMA = [
    AttributeSchema("country"),
    AttributeSchema("role"),
    AttributeSchema("gender"),
    AttributeSchema("name"),
    AttributeSchema("start", "date"),
    AttributeSchema("end", "date"),
]
LEADER_TFD = TFDecl(lhs=("country", "role"), rhs=("name",))


def make_leaders(extra_rows=()):
    rows = [
        ["USA", "President", "M", "Bush", "2001", "2009"],
        ["USA", "President", "M", "Obama", "2009", "2017"],
        ["U.K.", "Monarch", "F", "Elizabeth", "1952", "2022"],
        *extra_rows,
    ]
    return load_relation(
        "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
        rows, [a.name for a in LEADER_SCHEMA], [LEADER_TFD],
    )


def names(rows):
    return {r.values["name"] for r in rows}


class TestLoad:
    def test_three_row_fixture(self):
        rel = make_leaders()
        assert len(rel.tuples) == 3
        assert rel.granularity is Granularity.YEAR
        assert rel.tuples[0].interval == Interval(TimePoint(2001), TimePoint(2009))

    def test_empty_body(self):
        rel = load_relation(
            "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
            [], [a.name for a in LEADER_SCHEMA],
        )
        assert rel.tuples == []

    def test_inverted_interval_names_row(self):
        with pytest.raises(LoadError, match="row 2"):
            load_relation(
                "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
                [["USA", "President", "M", "Gore", "2017", "2009"]],
                [a.name for a in LEADER_SCHEMA],
            )

    def test_bad_date_names_row_and_column(self):
        with pytest.raises(LoadError, match=r"row 2 column 'start'"):
            load_relation(
                "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
                [["USA", "President", "M", "Bush", "20x1", "2009"]],
                [a.name for a in LEADER_SCHEMA],
            )

    def test_granularity_mismatch_rejected(self):
        with pytest.raises(LoadError, match="day-granularity"):
            load_relation(
                "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
                [["USA", "President", "M", "Bush", "2001-01-20", "2009"]],
                [a.name for a in LEADER_SCHEMA],
            )

    def test_header_mismatch(self):
        with pytest.raises(LoadError, match="header"):
            load_relation(
                "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
                [], ["country", "role", "name", "gender", "start", "end"],
            )

    def test_null_and_empty_mark_open_end(self):
        rel = load_relation(
            "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
            [
                ["NL", "King", "M", "Willem", "2013", "NULL"],
                ["ES", "King", "M", "Felipe", "2014", ""],
            ],
            [a.name for a in LEADER_SCHEMA],
        )
        assert all(r.interval.end is None for r in rel.tuples)


class TestTimeslice:
    def test_mid_period(self):
        assert names(timeslice(make_leaders(), TimePoint(2010))) == {"Obama", "Elizabeth"}

    def test_before_everything(self):
        assert timeslice(make_leaders(), TimePoint(1800)) == []

    def test_boundary_year_goes_to_successor(self):
        # half-open validity: a term recorded as ending in 2009 has handed
        # over by 2009, which is what lets adjacent terms satisfy the
        # role-holder dependency
        assert names(timeslice(make_leaders(), TimePoint(2009))) == {"Obama", "Elizabeth"}


class TestCheckTfd:
    def test_fixture_dependency_holds(self):
        report = check_tfd(make_leaders(), LEADER_TFD)
        assert report.holds
        assert report.violations == ()

    def test_conflicting_row_yields_two_witness_pairs(self):
        rel = make_leaders([["USA", "President", "M", "Gore", "2005", "2010"]])
        report = check_tfd(rel, LEADER_TFD)
        assert not report.holds
        pairs = {(v.first_index, v.second_index) for v in report.violations}
        assert pairs == {(0, 3), (1, 3)}  # (Bush, Gore) and (Obama, Gore)

    def test_single_tuple_always_holds(self):
        rel = load_relation(
            "leaders", LEADER_SCHEMA, "start", "end", Granularity.YEAR,
            [["USA", "President", "M", "Bush", "2001", "2009"]],
            [a.name for a in LEADER_SCHEMA],
        )
        assert check_tfd(rel, LEADER_TFD).holds

    def test_plain_fd_ignores_intervals(self):
        # same key, same value, disjoint periods: fine either way; same key,
        # different value in disjoint periods violates only the plain form
        rel = make_leaders([["USA", "President", "M", "Nixon", "1969", "1974"]])
        assert check_tfd(rel, LEADER_TFD).holds
        plain = TFDecl(lhs=("country", "role"), rhs=("name",), temporal=False)
        assert not check_tfd(rel, plain).holds

    def test_tfd_attrs_validated(self):
        with pytest.raises(LoadError, match="unknown attribute"):
            check_tfd(make_leaders(), TFDecl(lhs=("nation",), rhs=("name",)))
        with pytest.raises(LoadError, match="timestamp"):
            check_tfd(make_leaders(), TFDecl(lhs=("country",), rhs=("start",)))

    def test_equivalent_to_timeslice_enumeration(self):
        # the checker's verdict must match checking the plain dependency on
        # every timeslice in range
        rng = random.Random(404)
        for _ in range(120):
            rel = random_relation(rng)
            got = check_tfd(rel, TFDecl(lhs=("k",), rhs=("v",))).holds
            assert got == tfd_by_enumeration(rel), [
                (t.values, t.interval.start.iso(), t.interval.end and t.interval.end.iso())
                for t in rel.tuples
            ]


def random_relation(rng, max_tuples=8, span=30):
    schema = [AttributeSchema("k"), AttributeSchema("v"),
              AttributeSchema("start", "date"), AttributeSchema("end", "date")]
    rel = TemporalRelation("rand", schema, "start", "end", Granularity.YEAR)
    for _ in range(rng.randint(0, max_tuples)):
        start = 2000 + rng.randint(0, span - 1)
        end = None if rng.random() < 0.15 else start + rng.randint(0, span)
        rel.tuples.append(
            Row(
                values={"k": rng.choice("abc"), "v": rng.choice("xyz")},
                interval=Interval(TimePoint(start), TimePoint(end) if end else None),
            )
        )
    return rel


def tfd_by_enumeration(rel, lo=1990, hi=2070):
    for year in range(lo, hi + 1):
        seen = {}
        for row in timeslice(rel, TimePoint(year)):
            key = row.values["k"]
            if key in seen and seen[key] != row.values["v"]:
                return False
            seen[key] = row.values["v"]
    return True


OLYMPIC_SCHEMA = [
    AttributeSchema("game_edition"),
    AttributeSchema("country"),
    AttributeSchema("start", "date"),
    AttributeSchema("end", "date"),
]


def make_olympics(rows):
    return load_relation(
        "olympics", OLYMPIC_SCHEMA, "start", "end", Granularity.DAY,
        rows, [a.name for a in OLYMPIC_SCHEMA],
    )


def make_world_leaders(rows):
    schema = [
        AttributeSchema("country"), AttributeSchema("role"), AttributeSchema("name"),
        AttributeSchema("start", "date"), AttributeSchema("end", "date"),
    ]
    return load_relation(
        "world_leaders", schema, "start", "end", Granularity.DAY,
        rows, [a.name for a in schema],
    )


class TestTemporalJoin:
    def test_join_clips_to_overlap(self, stores):
        joined = temporal_natural_join(stores["olympics"], stores["world_leaders"])
        gronchi = [r for r in joined.tuples if r.values["name"] == "Giovanni Gronchi"]
        assert len(gronchi) == 1
        row = gronchi[0]
        assert row.values["game_edition"] == "7th Winter"
        assert row.interval == Interval(TimePoint.parse("1956-01-26"), TimePoint.parse("1956-02-06"))
        # only rows with genuinely overlapping validity survive
        assert names(joined.tuples) == {"Giovanni Gronchi", "Roh Tae-woo"}

    def test_empty_operand(self, stores):
        empty = make_olympics([])
        joined = temporal_natural_join(empty, stores["world_leaders"])
        assert joined.tuples == []

    def test_disjoint_intervals_dropped(self):
        left = make_olympics([["1st", "Atlantis", "1950-01-01", "1950-02-01"]])
        right = make_world_leaders([["Atlantis", "King", "Poseidon", "1960-01-01", "1970-01-01"]])
        assert temporal_natural_join(left, right).tuples == []

    def test_no_shared_attributes_is_an_error(self):
        left = make_olympics([])
        schema = [AttributeSchema("person"), AttributeSchema("start", "date"), AttributeSchema("end", "date")]
        right = load_relation("people", schema, "start", "end", Granularity.DAY, [], ["person", "start", "end"])
        with pytest.raises(LoadError, match="shared"):
            temporal_natural_join(left, right)

    def test_matches_nested_loop_oracle(self):
        rng = random.Random(17)
        for _ in range(60):
            left = random_relation(rng, max_tuples=6)
            right = random_relation(rng, max_tuples=6)
            right.name = "rand2"
            joined = temporal_natural_join(left, right)
            expected = join_oracle(left, right)
            got = {
                (tuple(sorted(r.values.items())), r.interval.start.iso(),
                 r.interval.end.iso() if r.interval.end else None)
                for r in joined.tuples
            }
            assert got == expected
            for r in joined.tuples:
                assert r.interval.end is None or r.interval.start.first_day() < r.interval.end.first_day()


def join_oracle(left, right):
    from chronoqa.timepoints import intersect

    shared = [a for a in left.value_attrs if a in right.value_attrs]
    out = set()
    for u in left.tuples:
        for v in right.tuples:
            if any(u.values[c] != v.values[c] for c in shared):
                continue
            common = intersect(u.interval, v.interval)
            if common is None:
                continue
            merged = dict(u.values)
            merged.update(v.values)
            out.add(
                (tuple(sorted(merged.items())), common.start.iso(),
                 common.end.iso() if common.end else None)
            )
    return out


class TestInference:
    def test_chained_dependency_verified(self, stores):
        joined = temporal_natural_join(stores["olympics"], stores["world_leaders"])
        fd = TFDecl(lhs=("game_edition",), rhs=("country",), temporal=False)
        tfd = TFDecl(lhs=("country", "role"), rhs=("name",))
        chained = infer_joined_tfd(fd, tfd, joined)
        assert chained.lhs == ("game_edition", "role")
        assert chained.rhs == ("name",)
        assert chained.temporal

    def test_round_key_variant(self, stores):
        joined = temporal_natural_join(stores["olympics"], stores["world_leaders"])
        fd = TFDecl(lhs=("game_round",), rhs=("country",), temporal=False)
        tfd = TFDecl(lhs=("country", "role"), rhs=("name",))
        assert infer_joined_tfd(fd, tfd, joined).lhs == ("game_round", "role")

    def test_chaining_precondition(self, stores):
        joined = temporal_natural_join(stores["olympics"], stores["world_leaders"])
        fd = TFDecl(lhs=("game_edition",), rhs=("city",), temporal=False)
        tfd = TFDecl(lhs=("country", "role"), rhs=("name",))
        with pytest.raises(InferenceError, match="cannot chain"):
            infer_joined_tfd(fd, tfd, joined)

    def test_dirty_data_fails_empirical_check(self):
        left = make_olympics([["1st", "Italy", "1956-01-01", "1956-02-01"]])
        right = make_world_leaders(
            [
                ["Italy", "President", "Gronchi", "1955-01-01", "1960-01-01"],
                ["Italy", "President", "Impostor", "1955-06-01", "1958-01-01"],
            ]
        )
        joined = temporal_natural_join(left, right)
        fd = TFDecl(lhs=("game_edition",), rhs=("country",), temporal=False)
        tfd = TFDecl(lhs=("country", "role"), rhs=("name",))
        with pytest.raises(InferenceError, match="fails"):
            infer_joined_tfd(fd, tfd, joined)

    def test_inferred_dependency_holds_by_construction(self, stores):
        joined = temporal_natural_join(stores["olympics"], stores["world_leaders"])
        fd = TFDecl(lhs=("game_edition",), rhs=("country",), temporal=False)
        tfd = TFDecl(lhs=("country", "role"), rhs=("name",))
        chained = infer_joined_tfd(fd, tfd, joined)
        assert check_tfd(joined, chained).holds


def test_with_open_end_helper():
    rel = make_leaders()
    blanked = with_open_end(rel, 2)
    assert blanked.tuples[2].interval.end is None
    assert rel.tuples[2].interval.end is not None
