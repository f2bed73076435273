"""Lenient timestamp parsing.

Conversation timestamps are stored verbatim and parsed lazily. Anything that
fails to parse yields ``None`` and callers fall back to sequence order.
"""
from datetime import date, datetime, timezone

_EXTRA_FORMATS = (
    "%Y/%m/%d",
    "%Y/%m/%d %H:%M",
    "%Y/%m/%d %H:%M:%S",
    "%d %B %Y",
    "%d %B, %Y",
    "%B %d, %Y",
    "%B %d %Y",
    "%I:%M %p on %d %B, %Y",
    "%I:%M %p on %d %b, %Y",
)


def parse_timestamp(value):
    """Return a naive ``datetime`` (UTC if the input had an offset) or None."""
    if not value or not isinstance(value, str):
        return None
    s = value.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        dt = None
        for fmt in _EXTRA_FORMATS:
            try:
                dt = datetime.strptime(s, fmt)
                break
            except ValueError:
                continue
        if dt is None:
            return None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return dt


def parse_date(value):
    dt = parse_timestamp(value)
    return dt.date() if dt is not None else None


def weekday_name(value):
    dt = parse_timestamp(value)
    return dt.strftime("%A") if dt is not None else None


def chrono_sort(items, timestamp_of, seq_of):
    """Sort by (timestamp, seq); if any timestamp is unparseable, by seq only."""
    items = list(items)
    parsed = [parse_timestamp(timestamp_of(it)) for it in items]
    if any(p is None for p in parsed):
        return sorted(items, key=seq_of)
    order = sorted(range(len(items)), key=lambda i: (parsed[i], seq_of(items[i])))
    return [items[i] for i in order]


def as_date(value):
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    return parse_date(value)
