"""Calendar time points, valid-time intervals, and duration arithmetic.

Everything that touches dates flows through this module so the whole
package shares one comparison semantics:

* A ``TimePoint`` is a calendar position at year, month, or day
  granularity. Two points are compared after truncating both to the
  coarser of their granularities.
* An ``Interval`` is a valid-time span ``[start, end)``: the recorded
  end value is the first moment the fact no longer holds (successor
  conventions like "Temer ends 2019-01-01, Bolsonaro starts
  2019-01-01" are overlap-free). A missing end means the fact is still
  valid, and behaves like +infinity.
* Month and year arithmetic is calendar-aware with day clamping
  (Jan 31 + 1 month = Feb 28/29).
"""
from __future__ import annotations

import calendar
import datetime as dt
import re
from dataclasses import dataclass
from enum import Enum


class Granularity(str, Enum):
    YEAR = "year"
    MONTH = "month"
    DAY = "day"

    @property
    def rank(self) -> int:
        """0 = coarsest (year), 2 = finest (day)."""
        return _RANK[self]


_RANK = {Granularity.YEAR: 0, Granularity.MONTH: 1, Granularity.DAY: 2}

UNITS = ("day", "month", "year")

_POINT_RE = re.compile(r"^(\d{4})(?:-(\d{1,2})(?:-(\d{1,2}))?)?$")


def coarser(a: Granularity, b: Granularity) -> Granularity:
    return a if a.rank <= b.rank else b


def finer(a: Granularity, b: Granularity) -> Granularity:
    return a if a.rank >= b.rank else b


class DateError(ValueError):
    """An unparsable or calendar-invalid date value."""


@dataclass(frozen=True, order=False)
class TimePoint:
    """A calendar position; absent month/day mean coarser granularity."""

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.year <= 9999:
            raise DateError(f"year {self.year} outside the supported calendar")
        if self.day is not None and self.month is None:
            raise DateError(f"day without month in {self!r}")
        if self.month is not None and not 1 <= self.month <= 12:
            raise DateError(f"month out of range in {self!r}")
        if self.day is not None:
            try:
                dt.date(self.year, self.month, self.day)
            except ValueError as exc:
                raise DateError(f"invalid calendar date {self.iso()}") from exc

    @property
    def granularity(self) -> Granularity:
        if self.day is not None:
            return Granularity.DAY
        if self.month is not None:
            return Granularity.MONTH
        return Granularity.YEAR

    @classmethod
    def parse(cls, text: str) -> "TimePoint":
        """Parse an ISO-ordered date string: YYYY, YYYY-MM, or YYYY-MM-DD."""
        m = _POINT_RE.match(text.strip())
        if not m:
            raise DateError(f"unparsable date {text!r}")
        year, month, day = m.groups()
        return cls(int(year), int(month) if month else None, int(day) if day else None)

    def iso(self) -> str:
        if self.day is not None:
            return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"
        if self.month is not None:
            return f"{self.year:04d}-{self.month:02d}"
        return f"{self.year:04d}"

    def truncate(self, gran: Granularity) -> "TimePoint":
        """Drop fields finer than ``gran``. Total and idempotent."""
        if gran is Granularity.YEAR:
            return TimePoint(self.year)
        if gran is Granularity.MONTH:
            return TimePoint(self.year, self.month)
        return self

    def first_day(self) -> dt.date:
        return dt.date(self.year, self.month or 1, self.day or 1)

    def last_day(self) -> dt.date:
        if self.day is not None:
            return dt.date(self.year, self.month, self.day)
        if self.month is not None:
            return dt.date(self.year, self.month, calendar.monthrange(self.year, self.month)[1])
        return dt.date(self.year, 12, 31)

    def sort_key(self) -> tuple[int, int, int]:
        return (self.year, self.month or 0, self.day or 0)


def compare(a: TimePoint, b: TimePoint) -> int:
    """Three-way compare at the coarser of the two granularities.

    Returns -1, 0, or 1. A year point equals every day inside it; it is
    strictly before a finer point only when the years already differ.
    """
    g = coarser(a.granularity, b.granularity)
    ka = a.truncate(g).sort_key()
    kb = b.truncate(g).sort_key()
    return (ka > kb) - (ka < kb)


def eq(a: TimePoint, b: TimePoint) -> bool:
    return compare(a, b) == 0


def lt(a: TimePoint, b: TimePoint) -> bool:
    return compare(a, b) < 0


def gt(a: TimePoint, b: TimePoint) -> bool:
    return compare(a, b) > 0


@dataclass(frozen=True)
class Duration:
    """A signed calendar duration: a count of days, months, or years."""

    count: int
    unit: str

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise DateError(f"unknown duration unit {self.unit!r}")

    def text(self) -> str:
        return f"{self.count} {self.unit}"


def shift(point: TimePoint, count: int, unit: str) -> TimePoint:
    """Move ``point`` by a signed count of calendar units.

    The unit must be at least as coarse as the point's granularity
    (months cannot be added to a bare year). Month and year shifts
    clamp the day to the target month's length.
    """
    if unit == "year":
        year = point.year + count
        day = point.day
        if day is not None:
            day = min(day, calendar.monthrange(year, point.month)[1])
        return TimePoint(year, point.month, day)
    if unit == "month":
        if point.month is None:
            raise DateError("cannot shift a year-granularity point by months")
        total = point.year * 12 + (point.month - 1) + count
        year, month0 = divmod(total, 12)
        day = point.day
        if day is not None:
            day = min(day, calendar.monthrange(year, month0 + 1)[1])
        return TimePoint(year, month0 + 1, day)
    if unit == "day":
        if point.day is None:
            raise DateError("cannot shift a coarse point by days")
        moved = point.first_day() + dt.timedelta(days=count)
        return TimePoint(moved.year, moved.month, moved.day)
    raise DateError(f"unknown unit {unit!r}")


def apply_duration(point: TimePoint, duration: Duration, sign: int = 1) -> TimePoint:
    return shift(point, sign * duration.count, duration.unit)


def diff_units(a: TimePoint, b: TimePoint, unit: str) -> int:
    """Whole-unit distance b - a at the given unit.

    Exact for year/month points at their own granularity; day distances
    require day-granularity points.
    """
    if unit == "year":
        return b.year - a.year
    if unit == "month":
        if a.month is None or b.month is None:
            raise DateError("month distance needs month-granularity points")
        return (b.year * 12 + b.month) - (a.year * 12 + a.month)
    if a.day is None or b.day is None:
        raise DateError("day distance needs day-granularity points")
    return (b.first_day() - a.first_day()).days


@dataclass(frozen=True)
class Interval:
    """A valid-time span; a missing end means "still valid"."""

    start: TimePoint
    end: TimePoint | None = None

    def __post_init__(self) -> None:
        if self.end is not None and self.start.first_day() > self.end.first_day():
            raise DateError(
                f"interval start {self.start.iso()} after end {self.end.iso()}"
            )

    def is_open(self) -> bool:
        return self.end is None

    def cover_start(self) -> dt.date:
        """First covered day."""
        return self.start.first_day()

    def cover_stop(self) -> dt.date | None:
        """First day past the covered range (exclusive bound), None = open."""
        return None if self.end is None else self.end.first_day()


def valid_at(interval: Interval, t: TimePoint) -> bool:
    """True when the fact holds on at least one day of ``t``."""
    lo, hi = t.first_day(), t.last_day()
    if interval.cover_start() > hi:
        return False
    stop = interval.cover_stop()
    return stop is None or lo < stop


def intersect(a: Interval, b: Interval) -> Interval | None:
    """Intersection of two valid-time spans; None when empty.

    The result reuses the tighter bound's original TimePoint, so
    day-level values survive mixing with coarse intervals.
    """
    start = a.start if a.cover_start() >= b.cover_start() else b.start
    if a.end is None:
        end = b.end
    elif b.end is None:
        end = a.end
    else:
        end = a.end if a.cover_stop() <= b.cover_stop() else b.end
    if end is not None and start.first_day() >= end.first_day():
        return None
    return Interval(start, end)


def overlaps(a: Interval, b: Interval) -> bool:
    return intersect(a, b) is not None
