"""Incremental evaluation of regular path navigation.

For every source vertex x the stage maintains a spanning tree over
(vertex, automaton state) pairs: pair (u, s) is in the tree of x exactly
when some path x -> u in the current snapshot spells a word driving the
automaton from its start state to s.  Each tree node records the widest
validity interval over such paths, where a path is valid while all of
its edges are: its interval starts at the latest edge start and ends at
the earliest edge expiry.  Nodes in accepting states are results.

The tree keeps, via parent links, one witness path per node, always a
widest one.  Edge insertion relaxes the frontier: missing pairs are
expanded, pairs whose recorded expiry can still grow are re-parented
onto the better path and re-emitted.  Expired nodes are treated as
absent wherever they are touched and swept at slide boundaries; both
paths drop state silently, only explicit deletions retract results.

Deleting a tree edge severs a subtree.  The subtree is recomputed with
a widest-expiry first search seeded from the intact remainder of the
tree (largest expiry first, ties by smaller start, then vertex, then
state).  Reattached nodes keep their identity; unreachable nodes are
removed and, when accepting, retracted.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

from streamgraph.automata import Dfa
from streamgraph.model import Interval, StreamTuple

log = logging.getLogger(__name__)

Pair = tuple[str, int]


@dataclass
class TreeNode:
    vertex: str
    state: int
    ts: float
    exp: float
    parent: Pair | None = None
    via: StreamTuple | None = None
    children: set[Pair] = field(default_factory=set)

    @property
    def pair(self) -> Pair:
        return (self.vertex, self.state)


class SpanningTree:
    def __init__(self, root: str, start_state: int):
        self.root = root
        self.start_state = start_state
        self.nodes: dict[Pair, TreeNode] = {
            (root, start_state): TreeNode(root, start_state, float("-inf"), float("inf"))
        }

    @property
    def root_pair(self) -> Pair:
        return (self.root, self.start_state)


class PathStage:
    """Signed-stream operator evaluating one automaton over its inputs."""

    def __init__(self, dfa: Dfa, label: str, op_id: int = 0, payload: str = "derived"):
        if payload not in ("derived", "expanded"):
            raise ValueError(f"unknown payload mode {payload!r}")
        self.dfa = dfa
        self.label = label
        self.op_id = op_id
        self.payload_mode = payload
        self.out_trans: dict[int, list[tuple[str, int]]] = {}
        self.by_label: dict[str, list[tuple[int, int]]] = {}
        for (s, lab), t in sorted(dfa.transitions.items()):
            self.out_trans.setdefault(s, []).append((lab, t))
            self.by_label.setdefault(lab, []).append((s, t))
        # adjacency over the automaton alphabet: label -> src -> origin -> sgt
        self.adj: dict[str, dict[str, dict[object, StreamTuple]]] = {}
        self.trees: dict[str, SpanningTree] = {}
        self.inverted: dict[Pair, set[str]] = {}
        self.usage: dict[object, set[tuple[str, Pair]]] = {}
        self._node_heap: list[tuple[float, int, str, Pair]] = []
        self._adj_heap: list[tuple[float, int, str, str, object]] = []
        self._seq = 0

    # Bookkeeping helpers keep nodes, the pair index and the tree-edge
    # usage index in lockstep.

    def _tick(self) -> int:
        self._seq += 1
        return self._seq

    def _add_node(self, tree: SpanningTree, node: TreeNode) -> None:
        tree.nodes[node.pair] = node
        self.inverted.setdefault(node.pair, set()).add(tree.root)
        if node.parent is not None:
            tree.nodes[node.parent].children.add(node.pair)
            self.usage.setdefault(node.via.origin, set()).add((tree.root, node.pair))
        heapq.heappush(self._node_heap, (node.exp, self._tick(), tree.root, node.pair))

    def _set_parent(
        self, tree: SpanningTree, node: TreeNode, parent: Pair, via: StreamTuple
    ) -> None:
        old_parent = tree.nodes.get(node.parent) if node.parent else None
        if old_parent is not None:
            old_parent.children.discard(node.pair)
            self._drop_usage(node.via.origin, tree.root, node.pair)
        node.parent = parent
        node.via = via
        tree.nodes[parent].children.add(node.pair)
        self.usage.setdefault(via.origin, set()).add((tree.root, node.pair))

    def _drop_usage(self, origin, root: str, pair: Pair) -> None:
        entry = self.usage.get(origin)
        if entry is not None:
            entry.discard((root, pair))
            if not entry:
                del self.usage[origin]

    def _remove_node(self, tree: SpanningTree, pair: Pair) -> None:
        node = tree.nodes.pop(pair, None)
        if node is None:
            return
        if node.parent is not None:
            parent = tree.nodes.get(node.parent)
            if parent is not None:
                parent.children.discard(pair)
            self._drop_usage(node.via.origin, tree.root, pair)
        roots = self.inverted.get(pair)
        if roots is not None:
            roots.discard(tree.root)
            if not roots:
                del self.inverted[pair]

    def _drop_subtree(self, tree: SpanningTree, pair: Pair) -> None:
        # Direct expiry: an expired node and everything below it (their
        # expiries are no larger) vanish without retraction.
        stack = [pair]
        while stack:
            p = stack.pop()
            node = tree.nodes.get(p)
            if node is None:
                continue
            stack.extend(node.children)
            self._remove_node(tree, p)

    def _path_payload(self, tree: SpanningTree, pair: Pair):
        hops: list[StreamTuple] = []
        cur = pair
        while cur != tree.root_pair:
            node = tree.nodes[cur]
            hops.append(node.via)
            cur = node.parent
        hops.reverse()
        if self.payload_mode == "derived":
            return tuple((h.src, h.label, h.trg) for h in hops)
        return tuple(p for h in hops for p in h.payload)

    def _result(self, tree: SpanningTree, node: TreeNode, sign: int) -> StreamTuple:
        return StreamTuple(
            tree.root,
            node.vertex,
            self.label,
            Interval(node.ts, node.exp),
            self._path_payload(tree, node.pair) if sign > 0 else (),
            sign,
            origin=("p", self.op_id, tree.root, node.vertex, node.state),
        )

    def _live_out_edges(self, vertex: str, lab: str, now: int) -> list[StreamTuple]:
        bucket = self.adj.get(lab, {}).get(vertex)
        if not bucket:
            return []
        dead = [o for o, e in bucket.items() if e.exp <= now]
        for o in dead:
            del bucket[o]
        return list(bucket.values())

    # Insertion: relax the widest-path frontier from every tree node the
    # new edge can extend.

    def insert(self, t: StreamTuple, now: int) -> list[StreamTuple]:
        if t.label not in self.by_label:
            return []
        bucket = self.adj.setdefault(t.label, {}).setdefault(t.src, {})
        bucket[t.origin] = t
        heapq.heappush(
            self._adj_heap, (t.exp, self._tick(), t.label, t.src, t.origin)
        )
        out: list[StreamTuple] = []
        for s, _t2 in self.by_label[t.label]:
            if s == self.dfa.start and t.src not in self.trees:
                self.trees[t.src] = SpanningTree(t.src, self.dfa.start)
                self.inverted.setdefault((t.src, s), set()).add(t.src)
            for root in list(self.inverted.get((t.src, s), ())):
                tree = self.trees.get(root)
                if tree is None:
                    continue
                node = tree.nodes.get((t.src, s))
                if node is None:
                    continue
                if node.exp <= now:
                    self._drop_subtree(tree, node.pair)
                    continue
                self._relax(tree, [node.pair], now, out)
        return out

    def _relax(self, tree: SpanningTree, seeds: list[Pair], now: int, out) -> None:
        stack = list(seeds)
        while stack:
            pair = stack.pop()
            node = tree.nodes.get(pair)
            if node is None or node.exp <= now:
                continue
            for lab, t2 in self.out_trans.get(node.state, ()):
                for e in self._live_out_edges(node.vertex, lab, now):
                    child_pair = (e.trg, t2)
                    cand_exp = min(node.exp, e.exp)
                    cand_ts = max(node.ts, e.ts)
                    if cand_exp <= now:
                        continue
                    child = tree.nodes.get(child_pair)
                    if child is not None and child.exp <= now:
                        self._drop_subtree(tree, child_pair)
                        child = None
                    if child is None:
                        child = TreeNode(
                            e.trg, t2, cand_ts, cand_exp, parent=pair, via=e
                        )
                        self._add_node(tree, child)
                    elif child.exp < cand_exp:
                        self._set_parent(tree, child, pair, e)
                        child.exp = cand_exp
                        child.ts = min(child.ts, cand_ts)
                        heapq.heappush(
                            self._node_heap,
                            (child.exp, self._tick(), tree.root, child_pair),
                        )
                    else:
                        continue
                    if t2 in self.dfa.accepting and child_pair != tree.root_pair:
                        out.append(self._result(tree, child, 1))
                    stack.append(child_pair)

    # Deletion: non-tree edges only leave the adjacency; tree edges sever
    # a subtree that is then reattached by a widest-expiry search.

    def delete(self, t: StreamTuple, now: int) -> list[StreamTuple]:
        bucket = self.adj.get(t.label, {}).get(t.src)
        if bucket is None or bucket.pop(t.origin, None) is None:
            if t.label in self.by_label:
                log.warning("deletion of unknown path edge %r ignored", t.origin)
            return []
        out: list[StreamTuple] = []
        for root, pair in sorted(self.usage.pop(t.origin, ())):
            tree = self.trees.get(root)
            if tree is None:
                continue
            node = tree.nodes.get(pair)
            if node is None or node.via is None or node.via.origin != t.origin:
                continue
            self._repair(tree, pair, now, out)
        return out

    def _repair(self, tree: SpanningTree, severed: Pair, now: int, out) -> None:
        marked: set[Pair] = set()
        stack = [severed]
        while stack:
            p = stack.pop()
            if p in marked:
                continue
            marked.add(p)
            stack.extend(tree.nodes[p].children)

        heap: list[tuple[tuple[float, float, str, int], int, Pair, Pair, StreamTuple]] = []
        settled: dict[Pair, tuple[Pair, StreamTuple, float, float]] = {}

        def relax_from(pair: Pair, state: int, vertex: str, ts: float, exp: float):
            for lab, t2 in self.out_trans.get(state, ()):
                for e in self._live_out_edges(vertex, lab, now):
                    child = (e.trg, t2)
                    if child not in marked or child in settled:
                        continue
                    cand_exp = min(exp, e.exp)
                    if cand_exp <= now:
                        continue
                    cand_ts = max(ts, e.ts)
                    key = (-cand_exp, cand_ts, child[0], child[1])
                    heapq.heappush(heap, (key, self._tick(), child, pair, e))

        for pair, node in tree.nodes.items():
            if pair not in marked and node.exp > now:
                relax_from(pair, node.state, node.vertex, node.ts, node.exp)

        while heap:
            (negexp, ts, _v, _s), _, child, parent, e = heapq.heappop(heap)
            if child in settled:
                continue
            settled[child] = (parent, e, ts, -negexp)
            relax_from(child, child[1], child[0], ts, -negexp)

        reattached: list[TreeNode] = []
        for pair in sorted(marked):
            node = tree.nodes[pair]
            hit = settled.get(pair)
            accepting = (
                node.state in self.dfa.accepting and pair != tree.root_pair
            )
            if hit is None:
                was_live = node.exp > now
                self._remove_node(tree, pair)
                if accepting and was_live:
                    out.append(self._result(tree, node, -1))
                continue
            parent, e, ts, exp = hit
            changed = (ts, exp) != (node.ts, node.exp)
            self._set_parent(tree, node, parent, e)
            node.ts = ts
            node.exp = exp
            heapq.heappush(self._node_heap, (exp, self._tick(), tree.root, pair))
            if accepting and changed:
                reattached.append(node)
        # Payloads walk parent pointers, so emit only once every settled
        # node has been re-parented; mid-loop the chain can still thread
        # through stale pointers inside the severed region.
        for node in reattached:
            out.append(self._result(tree, node, 1))
        if len(tree.nodes) == 1:
            self._remove_tree(tree)

    def _remove_tree(self, tree: SpanningTree) -> None:
        roots = self.inverted.get(tree.root_pair)
        if roots is not None:
            roots.discard(tree.root)
            if not roots:
                del self.inverted[tree.root_pair]
        del self.trees[tree.root]

    # Slide-boundary sweep; drops only state that ended at or before the
    # watermark, silently.

    def purge(self, w: int) -> None:
        touched: set[str] = set()
        while self._node_heap and self._node_heap[0][0] <= w:
            _, _, root, pair = heapq.heappop(self._node_heap)
            tree = self.trees.get(root)
            if tree is None:
                continue
            node = tree.nodes.get(pair)
            if node is not None and node.exp <= w:
                self._remove_node(tree, pair)
                touched.add(root)
        for root in touched:
            tree = self.trees.get(root)
            if tree is not None and len(tree.nodes) == 1:
                self._remove_tree(tree)
        while self._adj_heap and self._adj_heap[0][0] <= w:
            _, _, lab, src, origin = heapq.heappop(self._adj_heap)
            per_src = self.adj.get(lab, {})
            bucket = per_src.get(src)
            if bucket is None:
                continue
            e = bucket.get(origin)
            if e is not None and e.exp <= w:
                del bucket[origin]
            if not bucket:
                del per_src[src]

    # Stage protocol.

    def on_tuple(self, port: int, t: StreamTuple, now: int) -> list[StreamTuple]:
        if t.sign > 0:
            return self.insert(t, now)
        return self.delete(t, now)

    def on_watermark(self, w: int) -> None:
        self.purge(w)
