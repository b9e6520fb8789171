"""Core data model for windowed graph streams.

The engine works over two kinds of records:

* ``EdgeEvent``: a raw input edge ``(src, trg, label)`` stamped with the time
  it arrived, optionally signed (``-1`` undoes a prior insertion).
* ``StreamTuple``: an edge or path fact annotated with a half-open validity
  interval ``[start, end)`` and a payload listing the input edges (or derived
  hops) that produced it.

A snapshot of a stream at instant ``t`` is the set of tuples whose interval
contains ``t``.  Two tuples are value-equivalent when they agree on
``(src, trg, label)``; set semantics are restored by coalescing
value-equivalent tuples with overlapping or adjacent intervals into one tuple
spanning their union.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from typing import Callable, Hashable, Iterable

Triple = tuple[str, str, str]  # (src, label, trg)


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open validity interval [start, end); end may be math.inf."""

    start: int
    end: float

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"empty interval [{self.start}, {self.end})")

    def contains(self, t: int) -> bool:
        return self.start <= t < self.end

    def intersect(self, other: Interval) -> Interval | None:
        start = max(self.start, other.start)
        end = min(self.end, other.end)
        return Interval(start, end) if start < end else None

    def overlaps_or_adjacent(self, other: Interval) -> bool:
        return self.start <= other.end and other.start <= self.end

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.start, other.start), max(self.end, other.end))


@dataclass(frozen=True)
class EdgeEvent:
    """One line of an input edge stream.

    ``uid`` is the event's position in the stream and doubles as its lineage
    id.  A deletion (``sign == -1``) carries the uid of the insertion it
    undoes in ``ref``; its own ``ts`` is the deletion time.
    """

    src: str
    trg: str
    label: str
    ts: int
    sign: int = 1
    uid: int = 0
    ref: int | None = None


@dataclass(frozen=True)
class StreamTuple:
    src: str
    trg: str
    label: str
    interval: Interval
    payload: tuple[Triple, ...] = ()
    sign: int = 1
    origin: Hashable = field(default=None, compare=False)

    @property
    def key(self) -> Triple:
        return (self.src, self.trg, self.label)

    @property
    def ts(self) -> int:
        return self.interval.start

    @property
    def exp(self) -> float:
        return self.interval.end

    def negated(self) -> StreamTuple:
        return replace(self, sign=-self.sign)


def intern_name(name: str) -> str:
    """Intern vertex/label names so tuple keys hash and compare fast."""
    return sys.intern(name)


def value_equivalent(a: StreamTuple, b: StreamTuple) -> bool:
    return a.key == b.key


def _default_agg(tuples: list[StreamTuple]) -> tuple[Triple, ...]:
    # Keep the payload of the widest surviving contributor: largest end,
    # ties by largest start, then earliest position in the argument order.
    best = tuples[0]
    for t in tuples[1:]:
        if (t.exp, t.ts) > (best.exp, best.ts):
            best = t
    return best.payload


def coalesce(
    tuples: Iterable[StreamTuple],
    agg: Callable[[list[StreamTuple]], tuple[Triple, ...]] | None = None,
) -> StreamTuple:
    """Merge value-equivalent tuples whose intervals chain into one tuple.

    Every pair of inputs must be value-equivalent and the intervals must form
    a single contiguous block (each interval overlaps or touches the union of
    the others); otherwise ValueError is raised.
    """
    items = list(tuples)
    if not items:
        raise ValueError("coalesce of no tuples")
    key = items[0].key
    for t in items[1:]:
        if t.key != key:
            raise ValueError(f"coalesce across distinct keys {key} and {t.key}")
    merged = sorted(items, key=lambda t: (t.ts, t.exp))
    span = merged[0].interval
    for t in merged[1:]:
        if not span.overlaps_or_adjacent(t.interval):
            raise ValueError(
                f"coalesce over disjoint intervals {span} and {t.interval}"
            )
        span = span.hull(t.interval)
    payload = (_default_agg if agg is None else agg)(items)
    return StreamTuple(key[0], key[1], key[2], span, payload)


def snapshot(tuples: Iterable[StreamTuple], t: int) -> list[StreamTuple]:
    """Tuples of a (positive) stream whose validity interval contains t."""
    return [x for x in tuples if x.interval.contains(t)]


def partition_by_label(tuples: Iterable[StreamTuple]) -> dict[str, list[StreamTuple]]:
    out: dict[str, list[StreamTuple]] = {}
    for t in tuples:
        out.setdefault(t.label, []).append(t)
    return out


def window_interval(ts: int, size: int, slide: int) -> Interval:
    """Validity interval assigned to an input edge arriving at ts.

    The edge is valid from its arrival until the window that starts with the
    slide containing it has fully passed: end = (ts // slide) * slide + size.
    """
    if not (size >= slide >= 1):
        raise ValueError(f"window size {size} must be >= slide {slide} >= 1")
    return Interval(ts, (ts // slide) * slide + size)
