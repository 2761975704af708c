from __future__ import annotations

import pytest

from clverify import wsks as W
from clverify.cl import make_query
from clverify.errors import StartRuleMismatch, UnknownVariable
from clverify.pathauto import build_path_automaton, path_formula, run
from clverify.rewriting import CanonicalStore, TreeSearch, enumerate_trees

from conftest import load


def test_ring_automaton_shape(ring):
    q = make_query(ring, "Ring")
    a = build_path_automaton(q, 0, "y1")
    assert a.initial == (0, "y1")
    assert a.kappa == 2
    # y1 flows into the first parameter of either chain rule
    assert {(d, s) for d, s in a.successors[(0, "y1")]} == {(1, (1, "x1")), (1, (2, "x1"))}
    assert all(s[1] == "x1" for s in a.finals if s[0] in (3, 4))


def test_automaton_accepts_expected_words(ring):
    q = make_query(ring, "Ring")
    a = build_path_automaton(q, 0, "y2")
    assert a.accepts((1, 2))
    assert a.accepts((1, 2, 2, 2))
    assert not a.accepts((1,))
    assert not a.accepts((2, 2))


def test_unknown_variable(ring):
    q = make_query(ring, "Ring")
    with pytest.raises(UnknownVariable):
        build_path_automaton(q, 0, "zz")
    with pytest.raises(UnknownVariable):
        build_path_automaton(q, 99, "y1")


def test_start_rule_mismatch(ring):
    q = make_query(ring, "Ring")
    tree = next(iter(enumerate_trees(ring, "Ring", 5)))
    a = build_path_automaton(q, 0, "y1")
    with pytest.raises(StartRuleMismatch):
        run(a, tree, (1,))


def test_dot_output(ring):
    dot = build_path_automaton(make_query(ring, "Ring"), 0, "y1").to_dot()
    assert dot.startswith("digraph") and "doublecircle" in dot


@pytest.mark.parametrize("name,sentence,bound", [("ring.cl", "Ring", 9), ("tll.cl", "Root", 15),
                                                 ("ring_one_token.cl", "Ring1", 8), ("ternary.cl", "Star", 5)])
def test_runs_reach_the_canonical_target(name, sentence, bound):
    spec = load(name)
    q = make_query(spec, sentence)
    for t in TreeSearch(q, bound):
        store = CanonicalStore(t, q)
        for node, ri in t.labels:
            for v in q.sid.rules[ri].local_vars:
                assert run(build_path_automaton(q, ri, v), t, node) == {store.target(node, v)}


def test_path_formula_picks_the_target(ring):
    q = make_query(ring, "Ring")
    for t in TreeSearch(q, 6):
        store = CanonicalStore(t, q)
        rv = W.tree_valuation(t, q)
        for v in ("y1", "y2"):
            f = path_formula(q, 0, v, "x", "y")
            hits = [u for u in t.nodes if W.eval_formula(f, W.Valuation({"x": (), "y": u}, rv), t.nodes)]
            assert hits == [store.target((), v)]
