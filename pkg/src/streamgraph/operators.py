"""Incremental physical operators over signed streams of graph tuples.

Every emission carries an internal `origin`, an opaque lineage token that
is stable across re-emissions of the same logical contribution.  A
negative tuple with origin o exactly cancels the latest positive with
origin o.  Operators therefore keep their state keyed by origin, which
makes deletion cascades and interval corrections purely mechanical:

    scan      origin = input event id
    join      origin = tuple of child origins
    path      origin = (op, root, vertex, state)
    coalesce  origin = fresh per advertised interval

The coalesce stage restores set semantics after stateful operators: it
tracks one interval per upstream origin and (src, trg, label) key,
merges overlapping-or-adjacent contributions, and republishes the merged
intervals, retracting stale ones.  Contributions that fall inside an
already-advertised interval cause no downstream traffic.

Expiry is handled directly: probes skip and drop entries that can no
longer intersect new input, and slide-boundary watermarks purge the
rest.  Expired state vanishes silently, deletions emit negatives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from streamgraph.algebra import Comparison, JoinCondition, Pos
from streamgraph.model import EdgeEvent, Interval, StreamTuple, window_interval

log = logging.getLogger(__name__)


def wscan_apply(e: EdgeEvent, size: int, slide: int) -> StreamTuple:
    """Stamp one input edge with its window validity interval."""
    iv = window_interval(e.ts, size, slide)
    return StreamTuple(
        e.src, e.trg, e.label, iv, payload=((e.src, e.label, e.trg),), sign=e.sign,
        origin=e.uid if e.sign > 0 else e.ref,
    )


class WindowScan:
    """Leaf stage: edges in, windowed signed tuples out.

    Remembers the interval of each live insertion so that a deletion can
    be re-stamped with the interval of the tuple it undoes.
    """

    def __init__(self, size: int, slide: int):
        self.size = size
        self.slide = slide
        self.live: dict[int, Interval] = {}

    def on_tuple(self, port: int, e: EdgeEvent, now: int) -> list[StreamTuple]:
        if e.sign > 0:
            t = wscan_apply(e, self.size, self.slide)
            self.live[e.uid] = t.interval
            return [t]
        iv = self.live.pop(e.ref, None)
        if iv is None:
            log.warning("deletion of unknown or expired edge %s ignored", e)
            return []
        return [
            StreamTuple(
                e.src, e.trg, e.label, iv,
                payload=((e.src, e.label, e.trg),), sign=-1, origin=e.ref,
            )
        ]

    def on_watermark(self, w: int) -> None:
        self.live = {u: iv for u, iv in self.live.items() if iv.end > w}


class WindowAssign:
    """Replaces intervals of already-scanned tuples; used when a window
    has been hoisted above a filter by a plan rewrite."""

    def __init__(self, size: int, slide: int):
        self.size = size
        self.slide = slide

    def on_tuple(self, port: int, t: StreamTuple, now: int) -> list[StreamTuple]:
        iv = window_interval(t.ts, self.size, self.slide)
        return [
            StreamTuple(t.src, t.trg, t.label, iv, t.payload, t.sign, origin=t.origin)
        ]

    def on_watermark(self, w: int) -> None:
        pass


class RawScan:
    """Unwindowed leaf: tuples stay valid forever until a window stage
    (or nothing) bounds them."""

    def on_tuple(self, port: int, e: EdgeEvent, now: int) -> list[StreamTuple]:
        iv = Interval(e.ts, float("inf"))
        return [
            StreamTuple(
                e.src, e.trg, e.label, iv,
                payload=((e.src, e.label, e.trg),),
                sign=e.sign, origin=e.uid if e.sign > 0 else e.ref,
            )
        ]

    def on_watermark(self, w: int) -> None:
        pass


def eval_predicate(t: StreamTuple, predicate: tuple[Comparison, ...]) -> bool:
    def attr(name: str):
        return {"src": t.src, "trg": t.trg, "label": t.label}[name]

    for c in predicate:
        lhs = attr(c.lhs)
        rhs = attr(c.rhs[1]) if c.rhs[0] == "attr" else c.rhs[1]
        ok = lhs == rhs if c.op == "=" else lhs != rhs
        if not ok:
            return False
    return True


class FilterStage:
    def __init__(self, predicate: tuple[Comparison, ...]):
        self.predicate = predicate

    def on_tuple(self, port: int, t: StreamTuple, now: int) -> list[StreamTuple]:
        return [t] if eval_predicate(t, self.predicate) else []

    def on_watermark(self, w: int) -> None:
        pass


class UnionStage:
    """Merges any number of inputs, optionally relabeling them."""

    def __init__(self, label: str | None):
        self.label = label

    def on_tuple(self, port: int, t: StreamTuple, now: int) -> list[StreamTuple]:
        if self.label is None or t.label == self.label:
            return [t]
        return [
            StreamTuple(
                t.src, t.trg, self.label, t.interval, t.payload, t.sign, origin=t.origin
            )
        ]

    def on_watermark(self, w: int) -> None:
        pass


def merge_contributions(entries):
    """Group (interval, payload) entries into maximal contiguous intervals.

    Returns [(hull, payload)] sorted by start; the payload of a group is
    the one of its widest contributor (largest exp, then largest ts, then
    first seen).
    """
    entries = sorted(enumerate(entries), key=lambda e: (e[1][0].start, e[1][0].end))
    groups: list[tuple[Interval, tuple]] = []
    best: tuple | None = None
    for idx, (iv, payload) in entries:
        if groups and groups[-1][0].overlaps_or_adjacent(iv):
            hull = groups[-1][0].hull(iv)
            if (iv.end, iv.start, -idx) > best[0]:
                best = ((iv.end, iv.start, -idx), payload)
            groups[-1] = (hull, best[1])
        else:
            best = ((iv.end, iv.start, -idx), payload)
            groups.append((iv, payload))
    return groups


class CoalesceStage:
    """Keeps at most one live advertised tuple per key and instant.

    Contributions are tracked per upstream origin; re-emission with the
    same origin replaces the old interval, a negative drops it.  The
    merged intervals are diffed against what was previously advertised,
    and only the difference is emitted (retract, then replace).
    """

    def __init__(self, op_id: int):
        self.op_id = op_id
        self.contribs: dict[tuple, dict[object, tuple[Interval, tuple]]] = {}
        self.advertised: dict[tuple, list[tuple[object, Interval, tuple]]] = {}
        self.counter = 0

    def _fresh(self) -> tuple:
        self.counter += 1
        return ("c", self.op_id, self.counter)

    def on_tuple(self, port: int, t: StreamTuple, now: int) -> list[StreamTuple]:
        key = t.key
        per_key = self.contribs.setdefault(key, {})
        if t.sign > 0:
            per_key[t.origin] = (t.interval, t.payload)
        elif per_key.pop(t.origin, None) is None:
            log.warning("retraction for unknown contribution %r ignored", t.origin)
            return []
        return self._republish(key)

    def _republish(self, key: tuple) -> list[StreamTuple]:
        merged = merge_contributions(list(self.contribs.get(key, {}).values()))
        old = self.advertised.get(key, [])
        wanted = {(iv, payload) for iv, payload in merged}
        out: list[StreamTuple] = []
        kept = []
        src, trg, label = key
        for origin, iv, payload in old:
            if (iv, payload) in wanted:
                wanted.discard((iv, payload))
                kept.append((origin, iv, payload))
            else:
                out.append(StreamTuple(src, trg, label, iv, payload, -1, origin=origin))
        for iv, payload in merged:
            if (iv, payload) in wanted:
                origin = self._fresh()
                kept.append((origin, iv, payload))
                out.append(StreamTuple(src, trg, label, iv, payload, 1, origin=origin))
        kept.sort(key=lambda e: e[1])
        if kept:
            self.advertised[key] = kept
        else:
            self.advertised.pop(key, None)
        if not self.contribs.get(key):
            self.contribs.pop(key, None)
        return out

    def on_watermark(self, w: int) -> None:
        # Expired state disappears without emissions.
        for key in list(self.contribs):
            live = {o: e for o, e in self.contribs[key].items() if e[0].end > w}
            if live:
                self.contribs[key] = live
            else:
                del self.contribs[key]
        for key in list(self.advertised):
            live = [e for e in self.advertised[key] if e[1].end > w]
            if live:
                self.advertised[key] = live
            else:
                del self.advertised[key]


def pos_value(tuples: tuple[StreamTuple, ...], pos: Pos):
    t = tuples[pos.atom]
    return t.src if pos.field == "src" else t.trg


@dataclass(frozen=True)
class Row:
    """A partial join result: one tuple per already-joined input."""

    tuples: tuple[StreamTuple, ...]
    interval: Interval
    origins: tuple


class PatternStage:
    """Left-deep multiway symmetric hash join.

    Input i joins at level i against the table of rows spanning inputs
    0..i-1; every equality of the condition lands either on the single
    level where both its sides first meet or, for same-input equalities,
    on a per-port entry filter.  Output intervals are the intersection of
    all inputs (ts = max, exp = min) and must be non-empty.
    """

    def __init__(self, n: int, condition: JoinCondition, label: str):
        self.n = n
        self.cond = condition
        self.label = label
        self.local: dict[int, list[tuple[str, str]]] = {}
        self.level_eqs: dict[int, list[tuple[Pos, str]]] = {i: [] for i in range(1, n)}
        for a, b in condition.equalities:
            if a.atom == b.atom:
                self.local.setdefault(a.atom, []).append((a.field, b.field))
            else:
                lo, hi = (a, b) if a.atom < b.atom else (b, a)
                self.level_eqs[hi.atom].append((lo, hi.field))
        # left[k]: rows over inputs 0..k-1; right[k]: tuples of input k
        self.left: dict[int, dict[tuple, dict[tuple, Row]]] = {
            k: {} for k in range(1, n)
        }
        self.right: dict[int, dict[tuple, dict[object, StreamTuple]]] = {
            k: {} for k in range(1, n)
        }

    def _passes_local(self, port: int, t: StreamTuple) -> bool:
        vals = {"src": t.src, "trg": t.trg}
        return all(vals[a] == vals[b] for a, b in self.local.get(port, ()))

    def _left_key(self, level: int, tuples: tuple[StreamTuple, ...]) -> tuple:
        return tuple(pos_value(tuples, pos) for pos, _ in self.level_eqs[level])

    def _right_key(self, level: int, t: StreamTuple) -> tuple:
        vals = {"src": t.src, "trg": t.trg}
        return tuple(vals[f] for _, f in self.level_eqs[level])

    def _project(self, row: Row, sign: int) -> StreamTuple:
        payload = tuple(p for t in row.tuples for p in t.payload)
        return StreamTuple(
            pos_value(row.tuples, self.cond.out_src),
            pos_value(row.tuples, self.cond.out_trg),
            self.label,
            row.interval,
            payload,
            sign,
            origin=row.origins,
        )

    def on_tuple(self, port: int, t: StreamTuple, now: int) -> list[StreamTuple]:
        if not self._passes_local(port, t):
            return []
        if self.n == 1:
            row = Row((t,), t.interval, (t.origin,))
            return [self._project(row, t.sign)]
        out: list[StreamTuple] = []
        if t.sign > 0:
            self._insert(port, t, now, out)
        else:
            self._delete(port, t, now, out)
        return out

    # Positive flow: store, probe the opposite table, cascade upward.

    def _insert(self, port: int, t: StreamTuple, now: int, out: list[StreamTuple]) -> None:
        if port == 0:
            self._insert_row(1, Row((t,), t.interval, (t.origin,)), now, out)
            return
        key = self._right_key(port, t)
        self.right[port].setdefault(key, {})[t.origin] = t
        for row in self._probe_left(port, key, now):
            self._extend(row, t, port, now, out)

    def _insert_row(self, level: int, row: Row, now: int, out: list[StreamTuple]) -> None:
        if level == self.n:
            out.append(self._project(row, 1))
            return
        key = self._left_key(level, row.tuples)
        self.left[level].setdefault(key, {})[row.origins] = row
        for t in self._probe_right(level, key, now):
            self._extend(row, t, level, now, out)

    def _extend(self, row: Row, t: StreamTuple, level: int, now: int, out) -> None:
        iv = row.interval.intersect(t.interval)
        if iv is None:
            return
        bigger = Row(row.tuples + (t,), iv, row.origins + (t.origin,))
        self._insert_row(level + 1, bigger, now, out)

    # Negative flow mirrors the positive one with removals and sign -1.

    def _delete(self, port: int, t: StreamTuple, now: int, out: list[StreamTuple]) -> None:
        if port == 0:
            self._delete_row(1, Row((t,), t.interval, (t.origin,)), now, out)
            return
        key = self._right_key(port, t)
        found = self.right[port].get(key, {}).pop(t.origin, None)
        if found is None:
            log.warning("join deletion of absent tuple %r ignored", t.origin)
            return
        for row in self._probe_left(port, key, now):
            iv = row.interval.intersect(found.interval)
            if iv is not None:
                self._delete_row(
                    port + 1,
                    Row(row.tuples + (found,), iv, row.origins + (t.origin,)),
                    now,
                    out,
                )

    def _delete_row(self, level: int, row: Row, now: int, out: list[StreamTuple]) -> None:
        if level == self.n:
            out.append(self._project(row, -1))
            return
        key = self._left_key(level, row.tuples)
        stored = self.left[level].get(key, {}).pop(row.origins, None)
        if stored is None and level == 1:
            log.warning("join deletion of absent tuple %r ignored", row.origins)
            return
        for t in self._probe_right(level, key, now):
            iv = row.interval.intersect(t.interval)
            if iv is not None:
                self._delete_row(
                    level + 1,
                    Row(row.tuples + (t,), iv, row.origins + (t.origin,)),
                    now,
                    out,
                )

    # Probes drop entries that can no longer match anything new.

    def _probe_left(self, level: int, key: tuple, now: int) -> list[Row]:
        bucket = self.left[level].get(key)
        if not bucket:
            return []
        live, dead = [], []
        for origins, row in bucket.items():
            (live if row.interval.end > now else dead).append((origins, row))
        for origins, _ in dead:
            del bucket[origins]
        return [row for _, row in live]

    def _probe_right(self, level: int, key: tuple, now: int) -> list[StreamTuple]:
        bucket = self.right[level].get(key)
        if not bucket:
            return []
        live, dead = [], []
        for origin, t in bucket.items():
            (live if t.interval.end > now else dead).append((origin, t))
        for origin, _ in dead:
            del bucket[origin]
        return [t for _, t in live]

    def on_watermark(self, w: int) -> None:
        for tables in (self.left, self.right):
            for level, buckets in tables.items():
                for key in list(buckets):
                    bucket = buckets[key]
                    for o in [o for o, e in bucket.items() if _end_of(e) <= w]:
                        del bucket[o]
                    if not bucket:
                        del buckets[key]


def _end_of(entry) -> float:
    return entry.interval.end
