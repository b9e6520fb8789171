from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from streamgraph.model import (
    Interval,
    StreamTuple,
    coalesce,
    partition_by_label,
    snapshot,
    value_equivalent,
    window_interval,
)


def _covered(iv: Interval, horizon: int = 64) -> set[int]:
    # Independent oracle: the set of integer instants an interval covers.
    return {t for t in range(horizon) if iv.start <= t < iv.end}


def tup(src="u", trg="v", label="a", start=0, end=10, payload=None) -> StreamTuple:
    return StreamTuple(src, trg, label, Interval(start, end), tuple(payload or ()))


def test_interval_rejects_empty():
    with pytest.raises(ValueError):
        Interval(5, 5)
    with pytest.raises(ValueError):
        Interval(7, 3)


def test_intersect_basic():
    assert Interval(3, 9).intersect(Interval(7, 12)) == Interval(7, 9)
    assert Interval(3, 9).intersect(Interval(9, 12)) is None
    assert Interval(3, 9).intersect(Interval(12, 14)) is None


intervals = st.tuples(st.integers(0, 40), st.integers(1, 20)).map(
    lambda p: Interval(p[0], p[0] + p[1])
)


@given(intervals, intervals)
def test_intersect_matches_pointwise_oracle(a, b):
    got = a.intersect(b)
    want = _covered(a) & _covered(b)
    assert (_covered(got) if got else set()) == want


@given(intervals, intervals)
def test_overlaps_or_adjacent_matches_union_contiguity(a, b):
    merged_is_contiguous = True
    union = sorted(_covered(a) | _covered(b))
    for x, y in zip(union, union[1:]):
        if y - x > 1:
            merged_is_contiguous = False
    # Adjacency at integer granularity: [a,b) next to [b,c) is contiguous.
    assert a.overlaps_or_adjacent(b) == merged_is_contiguous


def test_coalesce_chain_of_three():
    parts = [tup(start=2, end=5), tup(start=4, end=9), tup(start=9, end=10)]
    got = coalesce(parts)
    assert got.interval == Interval(2, 10)
    assert got.key == ("u", "v", "a")


def test_coalesce_rejects_disjoint_and_mixed_keys():
    with pytest.raises(ValueError):
        coalesce([tup(start=2, end=5), tup(start=7, end=9)])
    with pytest.raises(ValueError):
        coalesce([tup(label="a"), tup(label="b")])
    with pytest.raises(ValueError):
        coalesce([])


def test_coalesce_default_payload_keeps_widest_contributor():
    a = tup(start=2, end=9, payload=[("u", "a", "m")])
    b = tup(start=3, end=9, payload=[("u", "b", "m")])
    c = tup(start=1, end=7, payload=[("u", "c", "m")])
    # Largest end wins; ties by largest start; then first-seen order.
    assert coalesce([c, a, b]).payload == (("u", "b", "m"),)
    assert coalesce([c, b, a]).payload == (("u", "b", "m"),)
    same = tup(start=2, end=9, payload=[("u", "z", "m")])
    assert coalesce([a, same]).payload == a.payload


@given(st.lists(intervals, min_size=1, max_size=6))
def test_coalesce_property_union_or_rejection(ivs):
    parts = [tup(start=iv.start, end=int(iv.end)) for iv in ivs]
    union = set()
    for iv in ivs:
        union |= _covered(iv)
    contiguous = all(y - x == 1 for x, y in zip(sorted(union), sorted(union)[1:]))
    if contiguous:
        got = coalesce(parts)
        assert _covered(got.interval) == union
    else:
        with pytest.raises(ValueError):
            coalesce(parts)


def test_snapshot_and_value_equivalence():
    a = tup(start=0, end=5)
    b = tup(start=3, end=8)
    assert snapshot([a, b], 4) == [a, b]
    assert snapshot([a, b], 6) == [b]
    assert snapshot([a, b], 8) == []
    assert value_equivalent(a, b)
    assert not value_equivalent(a, tup(trg="w"))


def test_partition_by_label():
    parts = partition_by_label([tup(label="a"), tup(label="b"), tup(label="a")])
    assert sorted(parts) == ["a", "b"]
    assert len(parts["a"]) == 2


def test_window_interval_formula():
    # Slide-aligned expiry: end = (ts // slide) * slide + size.
    assert window_interval(25, 24, 10) == Interval(25, 44)
    assert window_interval(13, 24, 1) == Interval(13, 37)
    assert window_interval(0, 10, 5) == Interval(0, 10)
    with pytest.raises(ValueError):
        window_interval(3, 4, 5)


@given(st.integers(0, 1000), st.integers(1, 50), st.integers(1, 50))
def test_window_interval_bounds(ts, size, slide):
    if size < slide:
        size = slide + size
    iv = window_interval(ts, size, slide)
    assert iv.start == ts
    # Expiry lands in (ts, ts + size] and is slide-aligned plus size.
    assert ts < iv.end <= ts + size
    assert (iv.end - size) % slide == 0
