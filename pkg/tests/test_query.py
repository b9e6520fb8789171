from __future__ import annotations

import random

import pytest

from streamgraph.algebra import JoinCondition, Pos, Union, Wscan, render_plan
from streamgraph.query import (
    ClosureAtom,
    EdgeAtom,
    QueryError,
    Rule,
    _topo_sort,
    dependency_graph,
    gen_pred,
    parse_query,
    to_plan,
)

NOTIFY_THREE_RULES = """
# users are notified about posts reachable through recommendation links
WINDOW 24 SLIDE 1
RL(u1, u2) <- l(u1, m1), p(u2, m1), f+(u1, u2) as FP
Notify(u, m) <- RL+(u, u2) as RLP, p(u2, m)
Answer(u, m) <- Notify(u, m)
"""

NOTIFY_TWO_RULES = """
WINDOW 24
RL(u1, u2) <- l(u1, m1), f(u1, u2), p(u2, m1)
Answer(u, m) <- RL+(u, u2) as RLP, p(u2, m)
"""


def test_parse_notify_rules():
    q = parse_query(NOTIFY_THREE_RULES)
    assert q.window == 24 and q.slide == 1
    assert q.rules[0] == Rule(
        "RL",
        ("u1", "u2"),
        (
            EdgeAtom("l", "u1", "m1"),
            EdgeAtom("p", "u2", "m1"),
            ClosureAtom("f", "+", "u1", "u2", "FP"),
        ),
    )
    assert q.rules[1].body[0] == ClosureAtom("RL", "+", "u", "u2", "RLP")


def test_window_defaults_and_overrides():
    assert parse_query(NOTIFY_TWO_RULES).slide == 1
    q = parse_query(NOTIFY_TWO_RULES, window=50, slide=5)
    assert (q.window, q.slide) == (50, 5)
    with pytest.raises(QueryError, match="WINDOW"):
        parse_query("Answer(x, y) <- a(x, y)")
    assert parse_query("Answer(x, y) <- a(x, y)", window=7).window == 7
    with pytest.raises(QueryError, match="slide"):
        parse_query("Answer(x, y) <- a(x, y)", window=5, slide=9)


def test_auto_named_closure():
    q = parse_query("Answer(x, y) <- a+(x, y)", window=10)
    assert q.rules[0].body[0] == ClosureAtom("a", "+", "x", "y", "$a_plus")
    q = parse_query("Answer(x, y) <- a*(x, y)", window=10)
    assert q.rules[0].body[0].alias == "$a_star"


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("Answer(x, y) <- a(x y)", "expected ','"),
        ("Answer(x, y) <- a(x, y,)", "expected"),
        ("Answer(x) <- a(x, y)", "expected ','"),
        ("Answer(x, y) <- a(x, y) extra", "unexpected"),
        ("Answer(x, y) ? a(x, y)", "unexpected character"),
        ("Answer(x, z) <- a(x, y)", "not bound"),
        ("P(x, y) <- a(x, y)", "must define the Answer"),
        ("Answer(x, y) <- Answer(x, y)", "may not appear in a rule body"),
        ("Answer(x, y) <- P(x, y)\nP(x, y) <- P(x, m), a(m, y)", "recursive"),
        ("Answer(x, y) <- P+(x, y) as P", "recursive"),
        ("P(x, y) <- a(x, y)\nAnswer(x, y) <- b+(x, y) as P", "also used as a rule head"),
        ("Answer(x, y) <- a+(x, m) as D, b*(m, y) as D", "defined twice"),
        ("WINDOW 10\nWINDOW 10\nAnswer(x, y) <- a(x, y)", "duplicate WINDOW"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(QueryError, match=fragment):
        parse_query(text, window=10)


def test_error_carries_line_and_column():
    with pytest.raises(QueryError) as err:
        parse_query("WINDOW 10\nAnswer(x, y) <- a(x; y)")
    assert err.value.line == 2
    assert err.value.col == 20


def test_dependency_graph_notify():
    g = dependency_graph(parse_query(NOTIFY_TWO_RULES))
    assert set(g.edges) == {
        ("Answer", "RLP"),
        ("Answer", "p"),
        ("RLP", "RL"),
        ("RL", "l"),
        ("RL", "f"),
        ("RL", "p"),
    }
    assert set(g.nodes) == {"Answer", "RLP", "RL", "l", "f", "p"}


def test_dependency_graph_single_rule_star():
    g = dependency_graph(parse_query("Answer(x, y) <- a(x, m), b(m, y)", window=5))
    assert set(g.edges) == {("Answer", "a"), ("Answer", "b")}


def test_dependency_graph_random_rule_sets():
    # Layered random queries; expected edges recomputed from the generated
    # structure, independently of the parser's bookkeeping.
    rng = random.Random(7)
    for _ in range(50):
        layers = [[f"e{i}" for i in range(rng.randint(2, 4))]]
        lines, expected = [], set()
        for depth in range(1, rng.randint(2, 4)):
            layers.append([f"p{depth}_{i}" for i in range(rng.randint(1, 2))])
        layers[-1] = ["Answer"]
        for depth in range(1, len(layers)):
            below = [n for lay in layers[:depth] for n in lay]
            for head in layers[depth]:
                atoms = []
                for k in range(rng.randint(1, 3)):
                    ref = rng.choice(below)
                    if rng.random() < 0.3:
                        alias = f"c_{head}_{k}"
                        atoms.append(f"{ref}+(v{k}, v{k + 1}) as {alias}")
                        expected |= {(head, alias), (alias, ref)}
                    else:
                        atoms.append(f"{ref}(v{k}, v{k + 1})")
                        expected.add((head, ref))
                n = len(atoms)
                lines.append(f"{head}(v0, v{n}) <- " + ", ".join(atoms))
        q = parse_query("\n".join(lines), window=10)
        assert set(dependency_graph(q).edges) == expected


def test_topological_order_notify():
    g = dependency_graph(parse_query(NOTIFY_THREE_RULES))
    assert _topo_sort(g) == ("l", "p", "f", "FP", "RL", "RLP", "Notify", "Answer")


def test_gen_pred_recommendation_body():
    body = (
        EdgeAtom("l", "u1", "m1"),
        EdgeAtom("p", "u2", "m1"),
        ClosureAtom("f", "+", "u1", "u2", "FP"),
    )
    cond = gen_pred(("u1", "u2"), body)
    assert cond == JoinCondition(
        (
            (Pos(0, "trg"), Pos(1, "trg")),
            (Pos(0, "src"), Pos(2, "src")),
            (Pos(1, "src"), Pos(2, "trg")),
        ),
        Pos(0, "src"),
        Pos(1, "src"),
    )


def test_gen_pred_chain_and_edge_cases():
    chain = gen_pred(("x", "y"), (EdgeAtom("a", "x", "m"), EdgeAtom("b", "m", "y")))
    assert chain == JoinCondition(
        ((Pos(0, "trg"), Pos(1, "src")),), Pos(0, "src"), Pos(1, "trg")
    )
    single = gen_pred(("x", "y"), (EdgeAtom("a", "x", "y"),))
    assert single == JoinCondition((), Pos(0, "src"), Pos(0, "trg"))
    loop = gen_pred(("x", "x"), (EdgeAtom("a", "x", "x"),))
    assert loop.equalities == ((Pos(0, "src"), Pos(0, "trg")),)
    with pytest.raises(QueryError, match="not bound"):
        gen_pred(("x", "z"), (EdgeAtom("a", "x", "y"),))


def test_gen_pred_matches_brute_force_pair_scan():
    rng = random.Random(3)
    variables = ["x", "y", "z", "w"]
    for _ in range(100):
        body = tuple(
            EdgeAtom(f"e{i}", rng.choice(variables), rng.choice(variables))
            for i in range(rng.randint(1, 4))
        )
        ends = [(a.src, (i, "src")) for i, a in enumerate(body)]
        ends += [(a.trg, (i, "trg")) for i, a in enumerate(body)]
        expected = {
            frozenset([pa, pb])
            for va, pa in ends
            for vb, pb in ends
            if pa != pb and va == vb
        }
        head = (body[0].src, body[-1].trg)
        cond = gen_pred(head, body)
        got = {
            frozenset([(a.atom, a.field), (b.atom, b.field)])
            for a, b in cond.equalities
        }
        assert got == expected


def test_to_plan_notify_canonical():
    plan = to_plan(parse_query(NOTIFY_THREE_RULES))
    assert render_plan(plan) == (
        "pattern[trg1=src2 -> (src1, trg2) Notify]("
        "path[RL+ -> RLP]("
        "pattern[trg1=trg2 & src1=src3 & src2=trg3 -> (src1, src2) RL]("
        "wscan[l size=24 slide=1], wscan[p size=24 slide=1], "
        "path[f+ -> FP](wscan[f size=24 slide=1]))), "
        "wscan[p size=24 slide=1])"
    )


def test_to_plan_single_edge_is_bare_scan():
    plan = to_plan(parse_query("Answer(x, y) <- a(x, y)", window=24))
    assert plan == Wscan("a", 24, 1)


def test_to_plan_swapped_head_projects():
    plan = to_plan(parse_query("Answer(y, x) <- a(x, y)", window=24))
    assert render_plan(plan) == "pattern[-> (trg1, src1) Answer](wscan[a size=24 slide=1])"


def test_to_plan_union_of_rules():
    q = parse_query(
        "Answer(x, y) <- a(x, y)\nAnswer(x, y) <- a(x, m), b+(m, y)", window=9
    )
    plan = to_plan(q)
    assert isinstance(plan, Union) and plan.label == "Answer"
    assert render_plan(plan.children[0]) == "wscan[a size=9 slide=1]"
    assert render_plan(plan.children[1]) == (
        "pattern[trg1=src2 -> (src1, trg2) Answer]("
        "wscan[a size=9 slide=1], path[b+ -> $b_plus](wscan[b size=9 slide=1]))"
    )


def test_to_plan_closure_over_derived_label():
    q = parse_query(
        "RL(x, y) <- a+(x, y) as AP, b(x, m), c(m, y)\n"
        "Answer(x, m) <- RL+(x, y) as RLP, c(m, y)",
        window=12,
    )
    text = render_plan(to_plan(q))
    assert "path[RL+ -> RLP]" in text
    assert "path[a+ -> AP]" in text
