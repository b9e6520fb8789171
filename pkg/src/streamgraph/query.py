"""Datalog-style query language for windowed graph streams.

One statement per line; blank lines and `#` comments are skipped:

    WINDOW 24 SLIDE 1
    RL(u1, u2) <- l(u1, m1), p(u2, m1), f+(u1, u2) as FP
    Notify(u, m) <- RL+(u, u2) as RLP, p(u2, m)
    Answer(u, m) <- Notify(u, m)

Heads are binary and `Answer` is the reserved output predicate; it may
not be used in a body.  A `+` or `*` postfix on a body predicate closes
it transitively.  `as <name>` names the closure so that other rules can
reference it and result payloads carry a stable label; unnamed closures
get a reserved `$`-prefixed name.  Multiple rules with the same head are
unioned.  The rule graph must be acyclic.

Planning walks predicates dependencies-first and emits one algebra node
per predicate: scans for input labels, path nodes for closures, joins
for rule bodies (see gen_pred for the positional equality condition) and
unions for multi-rule heads.  A single-atom body whose variables align
with the head reuses the body expression unchanged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from streamgraph.algebra import (
    JoinCondition,
    Pattern,
    Path,
    PlanNode,
    Pos,
    Union,
    Wscan,
)
from streamgraph.automata import Plus, Star, Sym

ANSWER = "Answer"
AUTO_PREFIX = "$"


class QueryError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class EdgeAtom:
    label: str
    src: str
    trg: str


@dataclass(frozen=True)
class ClosureAtom:
    label: str
    kind: str  # "+" or "*"
    src: str
    trg: str
    alias: str

    @property
    def regex(self):
        return Plus(Sym(self.label)) if self.kind == "+" else Star(Sym(self.label))


Atom = EdgeAtom | ClosureAtom


@dataclass(frozen=True)
class Rule:
    head: str
    head_vars: tuple[str, str]
    body: tuple[Atom, ...]


@dataclass(frozen=True)
class Query:
    rules: tuple[Rule, ...]
    window: int
    slide: int = 1

    @property
    def heads(self) -> set[str]:
        return {r.head for r in self.rules}


@dataclass(frozen=True)
class DependencyGraph:
    """head -> body-predicate edges; closures add head -> alias -> label."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+|<-|[(),+*]")


def _tokenize(text: str, lineno: int) -> list[tuple[str, int]]:
    out, i = [], 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if not m:
            raise QueryError(f"unexpected character {text[i]!r}", lineno, i + 1)
        out.append((m.group(), i + 1))
        i = m.end()
    return out


class _Cursor:
    def __init__(self, tokens: list[tuple[str, int]], lineno: int, width: int):
        self.tokens = tokens
        self.lineno = lineno
        self.width = width
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def take(self, what: str | None = None) -> str:
        if self.i >= len(self.tokens):
            raise QueryError(
                f"expected {what or 'more input'} at end of line", self.lineno, self.width
            )
        tok, col = self.tokens[self.i]
        if what is not None and tok != what:
            raise QueryError(f"expected {what!r}, found {tok!r}", self.lineno, col)
        self.i += 1
        return tok

    def name(self, what: str) -> str:
        tok, col = self.tokens[self.i] if self.i < len(self.tokens) else ("", self.width)
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok or ""):
            raise QueryError(f"expected {what}, found {tok!r}", self.lineno, col)
        self.i += 1
        return tok


def _auto_alias(label: str, kind: str) -> str:
    return f"{AUTO_PREFIX}{label}_{'plus' if kind == '+' else 'star'}"


def _parse_atom(cur: _Cursor) -> Atom:
    label = cur.name("a predicate name")
    kind = None
    if cur.peek() in ("+", "*"):
        kind = cur.take()
    cur.take("(")
    src = cur.name("a variable")
    cur.take(",")
    trg = cur.name("a variable")
    cur.take(")")
    if kind is None:
        return EdgeAtom(label, src, trg)
    alias = _auto_alias(label, kind)
    if cur.peek() == "as":
        cur.take()
        alias = cur.name("a closure name")
    return ClosureAtom(label, kind, src, trg, alias)


def _parse_rule(cur: _Cursor) -> Rule:
    head = cur.name("a head predicate")
    cur.take("(")
    v1 = cur.name("a variable")
    cur.take(",")
    v2 = cur.name("a variable")
    cur.take(")")
    cur.take("<-")
    body = [_parse_atom(cur)]
    while cur.peek() == ",":
        cur.take()
        body.append(_parse_atom(cur))
    if cur.peek() is not None:
        tok, col = cur.tokens[cur.i]
        raise QueryError(f"unexpected {tok!r} after rule", cur.lineno, col)
    return Rule(head, (v1, v2), tuple(body))


def parse_query(text: str, window: int | None = None, slide: int | None = None) -> Query:
    """Parse query text; window/slide arguments override the directive."""
    rules: list[Rule] = []
    dir_window = dir_slide = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cur = _Cursor(_tokenize(line, lineno), lineno, len(raw) + 1)
        if cur.peek() == "WINDOW":
            if dir_window is not None:
                raise QueryError("duplicate WINDOW directive", lineno, 1)
            cur.take()
            tok = cur.take()
            if not tok.isdigit():
                raise QueryError(f"expected window size, found {tok!r}", lineno, 1)
            dir_window = int(tok)
            if cur.peek() == "SLIDE":
                cur.take()
                tok = cur.take()
                if not tok.isdigit():
                    raise QueryError(f"expected slide, found {tok!r}", lineno, 1)
                dir_slide = int(tok)
            if cur.peek() is not None:
                raise QueryError("unexpected input after WINDOW directive", lineno, 1)
            continue
        rules.append(_parse_rule(cur))
    size = window if window is not None else dir_window
    if size is None:
        raise QueryError("query needs a WINDOW directive or an explicit window size")
    step = slide if slide is not None else (dir_slide if dir_slide is not None else 1)
    if step < 1 or size < step:
        raise QueryError(f"window size {size} must be >= slide {step} >= 1")
    q = Query(tuple(rules), size, step)
    _validate(q)
    return q


def _validate(q: Query) -> None:
    if not q.rules:
        raise QueryError("query has no rules")
    heads = q.heads
    if ANSWER not in heads:
        raise QueryError(f"query must define the {ANSWER} predicate")
    closures: dict[str, tuple[str, str]] = {}
    for rule in q.rules:
        body_vars = {v for a in rule.body for v in (a.src, a.trg)}
        for v in rule.head_vars:
            if v not in body_vars:
                raise QueryError(f"head variable {v!r} of {rule.head} not bound in body")
        for atom in rule.body:
            if atom.label == ANSWER:
                raise QueryError(f"{ANSWER} may not appear in a rule body")
            if isinstance(atom, ClosureAtom):
                seen = closures.setdefault(atom.alias, (atom.label, atom.kind))
                if seen != (atom.label, atom.kind):
                    raise QueryError(f"closure name {atom.alias!r} defined twice")
    clash = set(closures) & heads
    if clash:
        raise QueryError(f"closure name also used as a rule head: {sorted(clash)}")
    graph = dependency_graph(q)
    _topo_sort(graph)  # raises on recursion


def dependency_graph(q: Query) -> DependencyGraph:
    nodes: list[str] = []
    edges: list[tuple[str, str]] = []

    def add_node(name: str):
        if name not in nodes:
            nodes.append(name)

    def add_edge(a: str, b: str):
        add_node(a)
        add_node(b)
        if (a, b) not in edges:
            edges.append((a, b))

    for rule in q.rules:
        add_node(rule.head)
        for atom in rule.body:
            if isinstance(atom, EdgeAtom):
                add_edge(rule.head, atom.label)
            else:
                add_edge(rule.head, atom.alias)
                add_edge(atom.alias, atom.label)
    return DependencyGraph(tuple(nodes), tuple(edges))


def _topo_sort(graph: DependencyGraph) -> tuple[str, ...]:
    """Dependencies-first order; ties broken by first mention in the query."""
    rank = {name: i for i, name in enumerate(graph.nodes)}
    deps: dict[str, set[str]] = {n: set() for n in graph.nodes}
    users: dict[str, set[str]] = {n: set() for n in graph.nodes}
    for head, body in graph.edges:
        deps[head].add(body)
        users[body].add(head)
    ready = sorted((n for n, d in deps.items() if not d), key=rank.get)
    order: list[str] = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        freed = []
        for u in users[n]:
            deps[u].discard(n)
            if not deps[u]:
                freed.append(u)
        ready = sorted(ready + freed, key=rank.get)
    if len(order) != len(graph.nodes):
        stuck = sorted(set(graph.nodes) - set(order))
        raise QueryError(f"recursive predicate definitions: {stuck}")
    return tuple(order)


# ---------------------------------------------------------------------------
# Planning


def gen_pred(head_vars: tuple[str, str], body: tuple[Atom, ...]) -> JoinCondition:
    """Positional join condition for a rule body.

    Emits one equality per pair of endpoint positions sharing a variable,
    scanning atom pairs (i, j) with i <= j in order, and selects the output
    endpoints as the first occurrence of each head variable.
    """
    ends = [((a.src, Pos(i, "src")), (a.trg, Pos(i, "trg"))) for i, a in enumerate(body)]
    eqs: list[tuple[Pos, Pos]] = []
    for i in range(len(body)):
        for j in range(i, len(body)):
            pairs = (
                [(ends[i][0], ends[i][1])]
                if i == j
                else [(a, b) for a in ends[i] for b in ends[j]]
            )
            for (va, pa), (vb, pb) in pairs:
                if va == vb:
                    eqs.append((pa, pb))

    def locate(var: str) -> Pos:
        for pairs in ends:
            for v, pos in pairs:
                if v == var:
                    return pos
        raise QueryError(f"head variable {var!r} not bound in body")

    return JoinCondition(tuple(eqs), locate(head_vars[0]), locate(head_vars[1]))


def to_plan(q: Query) -> PlanNode:
    """Compile the query to its canonical plan (the Answer expression)."""
    graph = dependency_graph(q)
    order = _topo_sort(graph)
    heads = q.heads
    closures = {
        atom.alias: atom
        for rule in q.rules
        for atom in rule.body
        if isinstance(atom, ClosureAtom)
    }
    exp: dict[str, PlanNode] = {}
    for name in order:
        if name in closures:
            atom = closures[name]
            exp[name] = Path((exp[atom.label],), atom.regex, name)
        elif name in heads:
            parts = [_rule_plan(rule, exp) for rule in q.rules if rule.head == name]
            exp[name] = parts[0] if len(parts) == 1 else Union(tuple(parts), name)
        else:
            exp[name] = Wscan(name, q.window, q.slide)
    return exp[ANSWER]


def _rule_plan(rule: Rule, exp: dict[str, PlanNode]) -> PlanNode:
    labels = [a.alias if isinstance(a, ClosureAtom) else a.label for a in rule.body]
    only = rule.body[0]
    if len(rule.body) == 1 and (only.src, only.trg) == rule.head_vars and only.src != only.trg:
        return exp[labels[0]]
    children = tuple(exp[l] for l in labels)
    return Pattern(children, gen_pred(rule.head_vars, rule.body), rule.head)
