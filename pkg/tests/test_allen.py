import datetime as dt
import random

import pytest
from hypothesis import given, settings, strategies as st

from chronoqa.allen import (
    ALL_BASE_TAGS,
    AllenRelation,
    Atom,
    CURRENT_TAG,
    DegenerateIntervalError,
    ReferenceInterval,
    RelationTag,
    SamplerConfig,
    classify,
    condition_for,
    criteria_for,
    eval_condition,
    holds,
    sample_miss,
    sample_reference,
)
from chronoqa.errors import SamplerError
from chronoqa.timepoints import Duration, Granularity, Interval, TimePoint

tp = TimePoint.parse


def iv(start, end=None):
    return Interval(tp(start), tp(end) if end else None)


def ref(start, end, count=None, unit=None):
    b_start, b_end = tp(start), tp(end)
    if count is None:
        unit = {Granularity.YEAR: "year", Granularity.MONTH: "month", Granularity.DAY: "day"}[
            b_start.granularity
        ]
        from chronoqa.timepoints import diff_units

        count = diff_units(b_start, b_end, unit)
    return ReferenceInterval(b_start, b_end, Duration(count, unit))


class TestClassify:
    def test_adjacent_terms_meet(self):
        assert classify(iv("2001", "2009"), iv("2009", "2017")) is AllenRelation.MEET

    def test_long_reign_contains_presidency(self):
        assert classify(iv("1952", "2022"), iv("2001", "2009")) is AllenRelation.CONTAIN

    def test_identical_intervals_equal(self):
        assert classify(iv("2005", "2010"), iv("2005", "2010")) is AllenRelation.EQUAL

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateIntervalError):
            classify(iv("2009", "2009"), iv("2001", "2005"))

    def test_open_interval_rejected(self):
        with pytest.raises(ValueError):
            classify(iv("2009"), iv("2001", "2005"))

    def test_converse_symmetry(self):
        converses = {
            AllenRelation.BEFORE: AllenRelation.AFTER,
            AllenRelation.MEET: AllenRelation.MET_BY,
            AllenRelation.OVERLAP: AllenRelation.OVERLAPPED_BY,
            AllenRelation.START: AllenRelation.STARTED_BY,
            AllenRelation.FINISH: AllenRelation.FINISHED_BY,
            AllenRelation.DURING: AllenRelation.CONTAIN,
            AllenRelation.EQUAL: AllenRelation.EQUAL,
        }
        converses.update({v: k for k, v in converses.items()})
        rng = random.Random(11)
        for _ in range(500):
            a, b = random_pair(rng), random_pair(rng)
            assert classify(b, a) is converses[classify(a, b)]


def random_pair(rng, lo=dt.date(1900, 1, 1), hi=dt.date(2100, 1, 1)):
    span = (hi - lo).days
    x, y = sorted(rng.sample(range(span), 2))
    to_tp = lambda d: TimePoint(d.year, d.month, d.day)
    return Interval(to_tp(lo + dt.timedelta(days=x)), to_tp(lo + dt.timedelta(days=y)))


class TestCriteria:
    def test_exact_mapping(self):
        end_only = {"before", "meet", "finished_by"}
        start_only = {"after", "met_by", "started_by"}
        for tag in ALL_BASE_TAGS:
            expected = (
                {"end"} if tag.tag in end_only
                else {"start"} if tag.tag in start_only
                else {"start", "end"}
            )
            assert criteria_for(tag) == frozenset(expected), tag.tag

    def test_current_variant_checks_start_only(self):
        assert criteria_for(CURRENT_TAG) == frozenset({"start"})

    def test_base_queries_require_both(self):
        assert criteria_for(None) == frozenset({"start", "end"})


class TestConditions:
    def test_meet_uses_date_arithmetic(self):
        b = ref("2019-01-01", "2019-05-01", 4, "month")
        (atom,) = condition_for(RelationTag(AllenRelation.MEET), b).atoms
        assert atom.field == "end"
        assert atom.op == "eq_shifted"
        assert atom.value == tp("2019-05-01")
        assert atom.shift_by == Duration(-4, "month")
        assert atom.resolved() == tp("2019-01-01")

    def test_current_variant_condition(self):
        b = ref("2003-09-30", "2007-06-30")
        atoms = condition_for(CURRENT_TAG, b).atoms
        assert [(a.field, a.op) for a in atoms] == [("start", "lt"), ("end", "is_null")]
        assert atoms[0].value == tp("2003-09-30")

    def test_contain_condition(self):
        b = ref("2019-10-01", "2024-08-26")
        atoms = condition_for(RelationTag(AllenRelation.CONTAIN), b).atoms
        assert [(a.field, a.op, a.value.iso()) for a in atoms] == [
            ("start", "lt", "2019-10-01"),
            ("end", "gt", "2024-08-26"),
        ]

    def test_finished_by_default_requires_end_equality(self):
        b = ref("2000-09-20", "2001-03-20")
        default = condition_for(RelationTag(AllenRelation.FINISHED_BY), b).atoms
        assert [(a.field, a.op) for a in default] == [("start", "lt"), ("end", "eq")]
        literal = condition_for(RelationTag(AllenRelation.FINISHED_BY), b, paper_literal=True).atoms
        assert [(a.field, a.op) for a in literal] == [("start", "lt"), ("end", "lt")]


class TestHolds:
    def test_meet_with_arithmetic_reference(self):
        a = iv("2015-01-01", "2019-01-01")
        b = ref("2019-01-01", "2019-05-01", 4, "month")
        assert holds(RelationTag(AllenRelation.MEET), a, b)

    def test_before_false_when_entirely_after(self):
        assert not holds(RelationTag(AllenRelation.BEFORE), iv("2001", "2009"), ref("1990", "1995"))

    def test_current_with_open_end(self):
        a = Interval(tp("2013-04-30"), None)
        b = ref("2020-01-01", "2021-01-01")
        assert holds(CURRENT_TAG, a, b)
        closed = iv("2013-04-30", "2019-01-01")
        assert not holds(CURRENT_TAG, closed, b)

    def test_open_end_fails_ordinary_comparisons(self):
        a = Interval(tp("2013-04-30"), None)
        assert not holds(RelationTag(AllenRelation.BEFORE), a, ref("2030-01-01", "2031-01-01"))
        assert not holds(RelationTag(AllenRelation.CONTAIN), a, ref("2015-01-01", "2016-01-01"))

    def test_agrees_with_classify(self):
        rng = random.Random(23)
        for _ in range(300):
            a, b_iv = random_pair(rng), random_pair(rng)
            b = ref(b_iv.start.iso(), b_iv.end.iso())
            relation = classify(a, b_iv)
            for tag in ALL_BASE_TAGS:
                assert holds(tag, a, b) == (tag.base is relation)


class TestPartition:
    def test_exactly_one_relation_holds(self):
        rng = random.Random(99)
        for _ in range(2000):
            a, b = random_pair(rng), random_pair(rng)
            matches = [t.tag for t in ALL_BASE_TAGS if holds(t, a, ref(b.start.iso(), b.end.iso()))]
            assert len(matches) == 1, (a, b, matches)

    def test_paper_literal_finished_by_breaks_the_partition(self):
        # the looser printed form collides with before/overlap/during,
        # which is why it is not the default
        a, b_iv = iv("2000", "2003"), iv("2005", "2010")
        b = ref("2005", "2010")
        assert classify(a, b_iv) is AllenRelation.BEFORE
        assert holds(RelationTag(AllenRelation.FINISHED_BY), a, b, paper_literal=True)


SMALL_SAMPLER = SamplerConfig(
    offsets={"year": (1, 4), "month": (1, 12), "day": (5, 90)},
    lengths={"year": (1, 5), "month": (1, 10), "day": (5, 60)},
)


class TestSampler:
    @pytest.mark.parametrize("tag", [t.tag for t in ALL_BASE_TAGS] + ["overlap-current"])
    def test_satisfying_mode_always_holds(self, tag):
        relation = RelationTag.parse(tag)
        rng = random.Random(hash(tag) & 0xFFFF)
        for trial in range(60):
            if relation.current:
                a = Interval(random_pair(rng).start, None)
            else:
                a = random_pair(rng)
            try:
                b = sample_reference(rng, a, relation, SMALL_SAMPLER)
            except SamplerError:
                continue  # interval too short for interior points
            assert holds(relation, a, b), (tag, trial, a, b)

    @pytest.mark.parametrize("tag", [t.tag for t in ALL_BASE_TAGS] + ["overlap-current"])
    def test_miss_mode_never_holds(self, tag):
        relation = RelationTag.parse(tag)
        rng = random.Random(hash(tag) & 0xFFF)
        for _ in range(40):
            a = Interval(random_pair(rng).start, None) if relation.current else random_pair(rng)
            try:
                b = sample_miss(rng, a, relation, SMALL_SAMPLER)
            except SamplerError:
                continue
            assert not holds(relation, a, b)

    def test_current_requires_open_interval(self):
        with pytest.raises(SamplerError):
            sample_reference(random.Random(0), iv("2001", "2009"), CURRENT_TAG, SMALL_SAMPLER)

    def test_closed_relations_require_closed_interval(self):
        with pytest.raises(SamplerError):
            sample_reference(
                random.Random(0), Interval(tp("2001"), None),
                RelationTag(AllenRelation.DURING), SMALL_SAMPLER,
            )

    def test_meet_reference_is_arithmetic_exact(self):
        rng = random.Random(5)
        a = iv("2015-01-31", "2019-01-31")  # month-end start exercises clamping
        for _ in range(40):
            b = sample_reference(rng, a, RelationTag(AllenRelation.MEET), SMALL_SAMPLER)
            from chronoqa.timepoints import apply_duration

            assert apply_duration(b.end, b.length, -1) == a.end

    def test_equal_reproduces_the_interval(self):
        a = iv("2000-09", "2001-03")
        b = sample_reference(random.Random(1), a, RelationTag(AllenRelation.EQUAL), SMALL_SAMPLER)
        assert b.start == tp("2000-09") and b.end == tp("2001-03")
        assert b.length == Duration(6, "month")

    def test_deterministic_given_seed(self):
        a = iv("2001", "2009")
        first = sample_reference(random.Random(42), a, RelationTag(AllenRelation.DURING), SMALL_SAMPLER)
        second = sample_reference(random.Random(42), a, RelationTag(AllenRelation.DURING), SMALL_SAMPLER)
        assert first == second


@settings(max_examples=200)
@given(st.data())
def test_condition_evaluation_matches_holds(data):
    rng = random.Random(data.draw(st.integers(0, 2**32)))
    a, b_iv = random_pair(rng), random_pair(rng)
    b = ref(b_iv.start.iso(), b_iv.end.iso())
    for tag in ALL_BASE_TAGS:
        condition = condition_for(tag, b)
        assert eval_condition(condition, a) == holds(tag, a, b)
