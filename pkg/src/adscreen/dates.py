"""Calendar arithmetic helpers used across cohort framing and generation."""

from __future__ import annotations

import datetime as dt


def add_years(d: dt.date, years: int) -> dt.date:
    """Shift a date by whole calendar years, clamping Feb 29 to Feb 28."""
    try:
        return d.replace(year=d.year + years)
    except ValueError:
        return d.replace(year=d.year + years, day=28)


def years_between(start: dt.date, end: dt.date) -> float:
    """Signed span in years, day-resolution (365.2425-day years)."""
    return (end - start).days / 365.2425


def whole_years_between(start: dt.date, end: dt.date) -> int:
    """Completed calendar years from start to end (an age, when start is a birth date)."""
    n = end.year - start.year
    if (end.month, end.day) < (start.month, start.day):
        n -= 1
    return n
