from __future__ import annotations

import random

import pytest

from clverify.cl import (CompAtom, Exists, InterAtom, PredAtom, check_tight,
                         desugar_stateless_atoms, format_spec, infer_profiles, make_query, models,
                         parse_formula, parse_spec, validate_normal_form, validate_query)
from clverify.errors import BoundExhausted, ParseErrors, TightnessError, Unconstrained
from clverify.model import make_configuration, random_renaming, rename_indices
from clverify.rewriting import TreeSearch, canonical_model

from conftest import load

RING_TEXT = """
component S { ports: in, out; states: n, t; n -in-> t; t -out-> n; }
interaction T = (S.out, S.in);
Ring()        <= exists y1 y2 . Chain(y1, y2) * T(y2, y1);
Chain(x1,x2)  <= Comp(x1) * T(x1, x2) * Comp(x2);
Chain(x1,x2)  <= exists y1 . Comp(x1) * T(x1, y1) * Chain(y1, x2);
Comp(x1)      <= S@n(x1);
Comp(x1)      <= S@t(x1);
"""

HEADER = """
component S { ports: in, out; states: n, t; n -in-> t; t -out-> n; }
interaction T = (S.out, S.in);
"""


def test_ring_file_has_five_rules():
    spec = parse_spec(RING_TEXT)
    assert len(spec.sid) == 5
    assert spec.sid.kappa == 2
    assert [r.head for r in spec.sid.rules] == ["Ring", "Chain", "Chain", "Comp", "Comp"]


def test_single_component_rule():
    spec = parse_spec(HEADER + "Comp(x) <= S@n(x);")
    (rule,) = spec.sid.rules
    assert rule.params == ("x",)
    assert rule.body == CompAtom("S", "n", "x")


def test_unbalanced_parenthesis_is_located():
    with pytest.raises(ParseErrors) as err:
        parse_spec(HEADER + "Comp(x <= S@n(x);")
    e = err.value.errors[0]
    assert e.line == 4
    assert e.column > 0


def test_unknown_identifier_suggests_nearest():
    with pytest.raises(ParseErrors) as err:
        parse_spec(HEADER + "Comp(x) <= Sx@n(x);")
    assert "S" in str(err.value)


def test_atom_kinds_are_resolved_by_name():
    spec = parse_spec(RING_TEXT)
    body = spec.sid.rules[0].body
    assert isinstance(body, Exists)
    atoms = spec.sid.rules[0].atoms
    assert PredAtom("Chain", ("y1", "y2")) in atoms
    assert InterAtom("T", ("y2", "y1")) in atoms


@pytest.mark.parametrize("name", ["ring.cl", "tll.cl", "ring_one_token.cl", "ternary.cl"])
def test_print_parse_round_trip(name):
    spec = load(name)
    again = parse_spec(format_spec(spec))
    assert again.sid.rules == spec.sid.rules
    assert again.signature == spec.signature
    assert dict(again.sentences) == dict(spec.sentences)


def test_desugar_stateless_atoms():
    spec = parse_spec(HEADER + "Comp(x) <= S(x);")
    sid = desugar_stateless_atoms(spec.sid, spec.signature)
    assert [r.body for r in sid.rules] == [CompAtom("S", "n", "x"), CompAtom("S", "t", "x")]


def test_desugar_two_stateless_atoms_gives_product():
    spec = parse_spec(HEADER + "Two() <= exists x y . S(x) * T(x, y) * T(y, x) * S(y);")
    sid = desugar_stateless_atoms(spec.sid, spec.signature)
    assert len(sid.rules) == 4


def test_desugar_keeps_stateful_sid():
    spec = parse_spec(RING_TEXT)
    assert desugar_stateless_atoms(spec.sid, spec.signature).rules == spec.sid.rules


def test_chain_rules_are_in_normal_form():
    spec = parse_spec(RING_TEXT)
    assert validate_normal_form(spec.sid).ok


def test_variable_in_two_predicate_atoms_is_reported():
    spec = parse_spec(HEADER + RING_TEXT.split("\n", 3)[3] +
                      "Bad(x1,x2) <= exists y . S@n(x1) * T(x1, y) * Chain(y, x2) * Chain(y, x2);\n")
    report = validate_normal_form(spec.sid)
    assert any(i.code == "disjointness" and "Bad" in i.location for i in report.errors)


def test_dangling_existential_is_reported():
    spec = parse_spec(HEADER + RING_TEXT.split("\n", 3)[3] +
                      "Bad(x1,x2) <= exists y z . S@n(x1) * T(x1, y) * Chain(y, x2);\n")
    report = validate_normal_form(spec.sid)
    assert any(i.code in ("coverage", "free-variables") and "Bad" in i.location for i in report.errors)


def test_profiles_of_chain_and_tll(ring, tll):
    sid = desugar_stateless_atoms(ring.sid, ring.signature)
    prof = infer_profiles(sid, ring.signature)
    assert prof["Chain"] == ("S", "S")
    assert prof["Comp"] == ("S",)
    assert prof["Ring"] == ()
    tprof = infer_profiles(tll.sid, tll.signature)
    assert tprof["Node"] == ("N", "L", "L")
    assert tprof["Leaf"] == ("L",)


def test_unconstrained_parameter():
    spec = parse_spec(HEADER + "Loop(x) <= Loop(x);")
    with pytest.raises(Unconstrained):
        infer_profiles(spec.sid, spec.signature)


def _independent_profile_check(sid, prof):
    # every head parameter is attached to a component atom or to a predicate position of the same type
    for r in sid.rules:
        for k, x in enumerate(r.params):
            types = {a.ctype for a in r.comp_atoms if a.var == x}
            types |= {prof[a.name][j] for a in r.pred_atoms for j, y in enumerate(a.args) if y == x}
            assert types == {prof[r.head][k]}


@pytest.mark.parametrize("name", ["ring.cl", "tll.cl", "ring_one_token.cl", "ternary.cl"])
def test_profiles_satisfy_their_clauses(name):
    spec = load(name)
    sid = desugar_stateless_atoms(spec.sid, spec.signature)
    _independent_profile_check(sid, infer_profiles(sid, spec.signature))


def test_ring_and_tll_are_tight(ring, tll):
    for spec, name in [(ring, "Ring"), (tll, "Root")]:
        assert validate_query(make_query(spec, name)).ok


def test_loose_interaction_sentence():
    spec = parse_spec(RING_TEXT)
    sid = desugar_stateless_atoms(spec.sid, spec.signature)
    prof = infer_profiles(sid, spec.signature)
    f = parse_formula("exists x y . T(x, y)", spec)
    report = check_tight(f, spec, prof, sid=sid)
    loose = [i for i in report.errors if i.location == "sentence"]
    assert len(loose) == 2


def test_canonical_models_satisfy_ring(ring):
    q = make_query(ring, "Ring")
    for tree in TreeSearch(q, 7):
        assert models(canonical_model(tree, q), "Ring", ring, max_nodes=7).holds


def test_hand_built_three_ring_with_one_token(ring):
    nodes = [(1,), (2,), (3,)]
    c = make_configuration({"S": nodes}, {"T": [((1,), (2,)), ((2,), (3,)), ((3,), (1,))]},
                           [("t", (1,)), ("n", (2,)), ("n", (3,))])
    res = models(c, "Ring", ring, max_nodes=8)
    assert res.holds
    assert rename_indices(canonical_model(res.tree, make_query(ring, "Ring")), res.renaming, ring.signature) == c


def test_extra_interaction_breaks_ring(ring):
    nodes = [(1,), (2,), (3,)]
    c = make_configuration({"S": nodes}, {"T": [((1,), (2,)), ((2,), (3,)), ((3,), (1,)), ((1,), (3,))]},
                           [("n", u) for u in nodes])
    assert not models(c, "Ring", ring, max_nodes=8).holds


def test_models_reports_cut_bound(ring):
    nodes = [(i,) for i in range(1, 6)]
    c = make_configuration({"S": nodes}, {"T": [(nodes[i], nodes[(i + 1) % 5]) for i in range(5)]},
                           [("n", u) for u in nodes])
    with pytest.raises(BoundExhausted):
        models(c, "Ring", ring, max_nodes=9)
    assert models(c, "Ring", ring, max_nodes=10).holds


def test_models_rejects_dangling_configuration(ring):
    c = make_configuration({"S": [(1,)]}, {"T": [((1,), (2,))]}, [("n", (1,))])
    with pytest.raises(TightnessError):
        models(c, "Ring", ring)


def test_desugaring_preserves_models(ring):
    # RingAny uses stateless atoms; each model of Ring is a model of RingAny and vice versa
    q = make_query(ring, "Ring")
    for tree in TreeSearch(q, 6):
        c = canonical_model(tree, q)
        assert models(c, "RingAny", ring, max_nodes=6).holds


def test_random_renamings_of_canonical_models_still_satisfy(ring, tll):
    rng = random.Random(0)
    for spec, name, bound in [(ring, "Ring", 6), (tll, "Root", 7)]:
        q = make_query(spec, name)
        for tree in TreeSearch(q, bound):
            c = canonical_model(tree, q)
            f = random_renaming(c.architecture, rng)
            assert models(rename_indices(c, f, spec.signature), name, spec, max_nodes=bound).holds


def test_query_keeps_reachable_rules_only(ring):
    q = make_query(ring, "Ring")
    assert {r.head for r in q.sid.rules} == {"Ring", "Chain", "Comp"}


def test_sentence_formula_gets_fresh_head(ring):
    q = make_query(ring, "exists y1 y2 . Chain(y1, y2) * T(y2, y1)")
    assert q.sid.rules[0].params == ()
    assert q.sid.rules[0].head not in ring.sid.by_head
