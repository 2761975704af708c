from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clverify.errors import DisjointnessError, InputError, TightnessError
from clverify.model import (Architecture, ComponentType, Configuration, InteractionType, Signature,
                            TypedRenaming, compose, configuration_from_json, configuration_to_json,
                            find_symmetry, index_from_str, index_to_str, is_tight_architecture,
                            make_configuration, random_renaming, rename_indices, validate_signature)

S = ComponentType("S", ("in", "out"), ("n", "t"), (("n", "in", "t"), ("t", "out", "n")))
RING_SIG = Signature((S,), (InteractionType("T", (("S", "out"), ("S", "in"))),))

C1 = ComponentType("C1", ("a",), ("p",), (("p", "a", "p"),))
C2 = ComponentType("C2", ("b",), ("r",), (("r", "b", "r"),))
TWO_SIG = Signature((C1, C2), (InteractionType("I", (("C1", "a"), ("C2", "b"))),))


def ring_config(n: int, tokens=(1,)) -> Configuration:
    nodes = [(i,) for i in range(1, n + 1)]
    edges = [(nodes[i], nodes[(i + 1) % n]) for i in range(n)]
    marking = [("t" if u[0] in tokens else "n", u) for u in nodes]
    return make_configuration({"S": nodes}, {"T": edges}, marking)


def test_ring_signature_is_valid():
    assert validate_signature(RING_SIG).ok
    assert len(validate_signature(RING_SIG)) == 0


def test_duplicate_port_is_reported():
    other = ComponentType("U", ("in",), ("u",), (("u", "in", "u"),))
    report = validate_signature(Signature((S, other), RING_SIG.interactions))
    assert not report.ok
    assert any(i.code == "port-uniqueness" for i in report.errors)


def test_undeclared_interaction_port_is_reported():
    sig = Signature((S,), (InteractionType("T", (("S", "out"), ("S", "nope"))),))
    report = validate_signature(sig)
    assert not report.ok


def test_shared_state_names_are_reported():
    other = ComponentType("U", ("go",), ("n",), (("n", "go", "n"),))
    assert not validate_signature(Signature((S, other), RING_SIG.interactions)).ok


def test_index_strings_round_trip():
    assert index_to_str(()) == "eps"
    assert index_to_str((1, 2, 1)) == "1.2.1"
    assert index_from_str("1.2.1") == (1, 2, 1)
    assert index_from_str("ε") == ()
    with pytest.raises(InputError):
        index_from_str("1.0")
    with pytest.raises(InputError):
        index_from_str("a.b")


def test_compose_with_empty_is_identity():
    c = ring_config(3)
    assert compose(c, Configuration(Architecture())) == c


def test_compose_disjoint_union():
    c1 = make_configuration({"S": [(1,)]}, {}, [("n", (1,))])
    c2 = make_configuration({"S": [(2,)]}, {}, [("t", (2,))])
    c = compose(c1, c2)
    assert c.architecture.instances("S") == {(1,), (2,)}
    assert c.marking == {("n", (1,)), ("t", (2,))}


def test_compose_overlap_raises():
    c1 = make_configuration({"S": [(1,)]}, {}, [("n", (1,))])
    with pytest.raises(DisjointnessError) as err:
        compose(c1, c1)
    assert err.value.kind == "S"
    assert err.value.overlap == (1,)


_indices = st.lists(st.integers(1, 3), min_size=0, max_size=3).map(tuple)


@settings(max_examples=60, deadline=None)
@given(st.sets(_indices, max_size=9), st.randoms(use_true_random=False))
def test_compose_commutative_and_associative(pool, rnd):
    pool = sorted(pool)
    parts = [[], [], []]
    for u in pool:
        parts[rnd.randrange(3)].append(u)
    cs = [make_configuration({"S": p}, {}, [("n", u) for u in p]) for p in parts]
    assert compose(cs[0], cs[1]) == compose(cs[1], cs[0])
    assert compose(compose(cs[0], cs[1]), cs[2]) == compose(cs[0], compose(cs[1], cs[2]))


def test_identity_renaming_keeps_configuration():
    c = ring_config(3)
    assert rename_indices(c, TypedRenaming(), RING_SIG) == c


def test_swap_on_two_ring_keeps_interactions():
    c = ring_config(2, tokens=())
    f = TypedRenaming({"S": {(1,): (2,), (2,): (1,)}})
    assert rename_indices(c, f, RING_SIG).architecture == c.architecture


def test_per_type_renaming_example():
    a1 = make_configuration({"C1": [(1,)], "C2": [(1,)]}, {"I": [((1,), (1,))]}, [("p", (1,)), ("r", (1,))])
    a2 = make_configuration({"C1": [(1,)], "C2": [(2,)]}, {"I": [((1,), (2,))]}, [("p", (1,)), ("r", (2,))])
    f = TypedRenaming({"C2": {(1,): (2,)}})
    assert rename_indices(a1, f, TWO_SIG) == a2
    found = find_symmetry(a1, a2, TWO_SIG)
    assert found == f


def test_rename_requires_tight_architecture():
    c = make_configuration({"S": [(1,)]}, {"T": [((1,), (2,))]}, [("n", (1,))])
    with pytest.raises(TightnessError):
        rename_indices(c, TypedRenaming(), RING_SIG)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_rename_round_trip(n, seed):
    c = ring_config(n)
    f = random_renaming(c.architecture, random.Random(seed))
    assert f.is_injective()
    assert rename_indices(rename_indices(c, f, RING_SIG), f.inverse(), RING_SIG) == c


def test_find_symmetry_reflexive():
    c = ring_config(3)
    f = find_symmetry(c, c, RING_SIG)
    assert f is not None and rename_indices(c, f, RING_SIG) == c


def test_find_symmetry_rotates_token():
    c1, c2 = ring_config(3, tokens=(1,)), ring_config(3, tokens=(2,))
    f = find_symmetry(c1, c2, RING_SIG)
    assert f is not None
    assert f.apply("S", (1,)) == (2,)
    assert rename_indices(c1, f, RING_SIG) == c2


def test_find_symmetry_rejects_different_token_counts_and_sizes():
    assert find_symmetry(ring_config(3, tokens=(1,)), ring_config(3, tokens=(1, 2)), RING_SIG) is None
    assert find_symmetry(ring_config(3), ring_config(4), RING_SIG) is None


def test_symmetry_is_an_equivalence_on_samples():
    sample = [ring_config(3, t) for t in [(1,), (2,), (3,), (1, 2), (2, 3)]]
    rel = {(i, j) for i, a in enumerate(sample) for j, b in enumerate(sample)
           if find_symmetry(a, b, RING_SIG) is not None}
    for i in range(len(sample)):
        assert (i, i) in rel
    for i, j in rel:
        assert (j, i) in rel
        for k in range(len(sample)):
            if (j, k) in rel:
                assert (i, k) in rel
    assert (0, 1) in rel and (0, 3) not in rel and (3, 4) in rel


def test_tightness_check():
    assert is_tight_architecture(ring_config(3).architecture, RING_SIG) == (True, None)
    arch = Architecture({"S": {(1,)}}, {"T": {((1,), (2,))}})
    assert is_tight_architecture(arch, RING_SIG) == (False, ("T", ((1,), (2,)), 2))
    assert is_tight_architecture(Architecture(), RING_SIG) == (True, None)


def test_configuration_json_round_trip():
    c = ring_config(2)
    doc = configuration_to_json(c)
    assert doc == {"components": {"S": ["1", "2"]}, "interactions": {"T": [["1", "2"], ["2", "1"]]},
                   "marking": [["t", "1"], ["n", "2"]]}
    assert configuration_from_json(doc) == c
    with pytest.raises(InputError):
        configuration_from_json({"components": {"S": ["x"]}})
