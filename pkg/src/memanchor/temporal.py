"""Rule-based temporal expression recognition and interval resolution."""
from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from datetime import date, timedelta

from .text import squash
from .timeutil import parse_date

MONTHS = {name.lower(): i for i, name in enumerate(calendar.month_name) if name}
MONTHS.update({name.lower(): i for i, name in enumerate(calendar.month_abbr) if name})
WEEKDAYS = [d.lower() for d in calendar.day_name]
PERIODS = ("week", "month", "year", "weekend", "summer", "winter", "spring", "fall")
UNITS = ("day", "week", "month", "year", "morning", "evening", "night", "weekend")
NUMBER_WORDS = {
    "a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
}
SEASON_MONTHS = {"spring": (3, 5), "summer": (6, 8), "fall": (9, 11), "winter": (12, 2)}

_MONTH_ALT = "|".join(sorted(MONTHS, key=len, reverse=True))
_NUM_ALT = r"\d+|" + "|".join(NUMBER_WORDS)

_PATTERNS = [
    ("absolute", re.compile(r"\b(\d{4})-(\d{1,2})-(\d{1,2})\b"), "iso"),
    ("absolute", re.compile(rf"\b({_MONTH_ALT})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?,?\s+(\d{{4}})\b"), "mdy"),
    ("absolute", re.compile(rf"\b(\d{{1,2}})(?:st|nd|rd|th)?\s+({_MONTH_ALT})\.?,?\s+(\d{{4}})\b"), "dmy"),
    ("absolute", re.compile(rf"\b({_MONTH_ALT})\.?,?\s+(\d{{4}})\b"), "my"),
    ("absolute", re.compile(r"\b(\d{4})-(\d{1,2})\b"), "iso_month"),
    ("absolute", re.compile(r"\b(19\d{2}|20\d{2})\b"), "year"),
    ("recurrence", re.compile(rf"\bevery\s+({'|'.join(WEEKDAYS + list(UNITS))})\b"), "every"),
    ("relative", re.compile(rf"\b(last|this|next)\s+({'|'.join(PERIODS)})\b"), "period"),
    ("relative", re.compile(rf"\b({_NUM_ALT})\s+(day|week|month|year)s?\s+ago\b"), "ago"),
    ("relative", re.compile(r"\b(today|yesterday|tomorrow|recently)\b"), "word"),
]


@dataclass(frozen=True)
class TemporalExpression:
    raw: str
    kind: str
    normalized: str


def _valid_day(y, m, d):
    try:
        return date(y, m, d)
    except ValueError:
        return None


def _normalize(tag, groups):
    if tag == "iso":
        day = _valid_day(int(groups[0]), int(groups[1]), int(groups[2]))
        return day.isoformat() if day else None
    if tag == "mdy":
        day = _valid_day(int(groups[2]), MONTHS[groups[0]], int(groups[1]))
        return day.isoformat() if day else None
    if tag == "dmy":
        day = _valid_day(int(groups[2]), MONTHS[groups[1]], int(groups[0]))
        return day.isoformat() if day else None
    if tag == "my":
        return f"{int(groups[1]):04d}-{MONTHS[groups[0]]:02d}"
    if tag == "iso_month":
        month = int(groups[1])
        return f"{int(groups[0]):04d}-{month:02d}" if 1 <= month <= 12 else None
    if tag == "year":
        return groups[0]
    if tag == "every":
        return f"every:{groups[0]}"
    if tag == "period":
        return f"{groups[0]}_{groups[1]}"
    if tag == "ago":
        n = int(groups[0]) if groups[0].isdigit() else NUMBER_WORDS[groups[0]]
        return f"{n}_{groups[1]}s_ago"
    return groups[0]


def detect_temporal(query: str) -> list[TemporalExpression]:
    """Temporal expressions in ``query`` in order of appearance.

    Spans are claimed greedily in pattern order, so "May 1, 2022" yields a
    single absolute date rather than an additional bare year.
    """
    text = (query or "").lower()
    claimed = [False] * len(text)
    found = []
    for kind, pattern, tag in _PATTERNS:
        for m in pattern.finditer(text):
            if any(claimed[m.start():m.end()]):
                continue
            norm = _normalize(tag, m.groups())
            if not norm:
                continue
            for i in range(m.start(), m.end()):
                claimed[i] = True
            found.append((m.start(), TemporalExpression(query[m.start():m.end()], kind, norm)))
    return [expr for _, expr in sorted(found, key=lambda p: p[0])]


def normalize_field(value: str | None, kind: str) -> str | None:
    """Normalize a stored when sub-field into the recognizer's vocabulary.

    Falls back to the lowercased, whitespace-squashed string when no
    expression of ``kind`` is recognized.
    """
    if not value:
        return None
    for expr in detect_temporal(value):
        if expr.kind == kind:
            return expr.normalized
    return squash(value).lower()


def absolute_interval(normalized: str) -> tuple[date, date] | None:
    """Inclusive date interval for a normalized absolute expression."""
    parts = normalized.split("-")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        return None
    if len(nums) == 3:
        day = _valid_day(*nums)
        return (day, day) if day else None
    if len(nums) == 2 and 1 <= nums[1] <= 12:
        return _month_interval(nums[0], nums[1])
    if len(nums) == 1:
        return date(nums[0], 1, 1), date(nums[0], 12, 31)
    return None


def _month_interval(year, month):
    return date(year, month, 1), date(year, month, calendar.monthrange(year, month)[1])


def _shift_month(year, month, delta):
    idx = year * 12 + (month - 1) + delta
    return idx // 12, idx % 12 + 1


def _season(year, name):
    start_m, end_m = SEASON_MONTHS[name]
    if name == "winter":
        # winter of year Y runs from December Y-1 through February Y
        start = date(year - 1, 12, 1)
        end = date(year, 2, calendar.monthrange(year, 2)[1])
        return start, end
    return date(year, start_m, 1), date(year, end_m, calendar.monthrange(year, end_m)[1])


def resolve_relative(normalized: str, anchor) -> tuple[date, date] | None:
    """Resolve a normalized relative expression against an anchor date."""
    ref = anchor if isinstance(anchor, date) else parse_date(anchor)
    if ref is None or not normalized:
        return None
    if normalized == "today":
        return ref, ref
    if normalized == "yesterday":
        d = ref - timedelta(days=1)
        return d, d
    if normalized == "tomorrow":
        d = ref + timedelta(days=1)
        return d, d
    if normalized == "recently":
        return ref - timedelta(days=30), ref
    m = re.fullmatch(r"(\d+)_(day|week|month|year)s_ago", normalized)
    if m:
        n, unit = int(m.group(1)), m.group(2)
        if unit == "day":
            d = ref - timedelta(days=n)
            return d, d
        if unit == "week":
            monday = ref - timedelta(days=ref.weekday() + 7 * n)
            return monday, monday + timedelta(days=6)
        if unit == "month":
            return _month_interval(*_shift_month(ref.year, ref.month, -n))
        return date(ref.year - n, 1, 1), date(ref.year - n, 12, 31)
    m = re.fullmatch(r"(last|this|next)_(\w+)", normalized)
    if not m or m.group(2) not in PERIODS:
        return None
    which, period = m.group(1), m.group(2)
    step = {"last": -1, "this": 0, "next": 1}[which]
    if period == "week":
        monday = ref - timedelta(days=ref.weekday()) + timedelta(weeks=step)
        return monday, monday + timedelta(days=6)
    if period == "weekend":
        saturday = ref - timedelta(days=ref.weekday()) + timedelta(days=5)
        if which == "last":
            # most recent weekend that ended before the anchor day
            while saturday + timedelta(days=1) >= ref:
                saturday -= timedelta(weeks=1)
        elif which == "next":
            saturday += timedelta(weeks=1)
        return saturday, saturday + timedelta(days=1)
    if period == "month":
        return _month_interval(*_shift_month(ref.year, ref.month, step))
    if period == "year":
        return date(ref.year + step, 1, 1), date(ref.year + step, 12, 31)
    # seasons: "this" is the occurrence labelled with the anchor's year,
    # "last" the most recent one that ended before the anchor,
    # "next" the first one that starts after it
    if which == "this":
        return _season(ref.year, period)
    year = ref.year + 1 if which == "last" else ref.year - 1
    while True:
        start, end = _season(year, period)
        if which == "last" and end < ref:
            return start, end
        if which == "next" and start > ref:
            return start, end
        year += -1 if which == "last" else 1


def intervals_intersect(a, b) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]
