from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clverify.cl import make_query
from clverify.errors import CapExceeded, NotEnabled
from clverify.model import (Architecture, ComponentType, InteractionType, Signature, TypedRenaming,
                            make_configuration, random_renaming, rename_indices)
from clverify.petri import (InvariantOptions, build_net, enabled, enumerate_mutexes, fire, in_invariants,
                            is_deadlock, is_precise, max_trap_within, precise_markings, reach_set,
                            violates_trap_invariant)
from clverify.rewriting import canonical_model, enumerate_trees

from conftest import load

S = ComponentType("S", ("in", "out"), ("n", "t"), (("n", "in", "t"), ("t", "out", "n")))
SIG = Signature((S,), (InteractionType("T", (("S", "out"), ("S", "in"))),))


def ring(n: int, tokens=(1,)):
    nodes = [(i,) for i in range(1, n + 1)]
    c = make_configuration({"S": nodes}, {"T": [(nodes[i], nodes[(i + 1) % n]) for i in range(n)]},
                           [("t" if u[0] in tokens else "n", u) for u in nodes])
    return c, build_net(SIG, c.architecture)


def places(*names):
    return frozenset((q, (int(i),)) for q, i in (s.split("@") for s in names))


def test_three_ring_net_shape():
    _, net = ring(3)
    assert len(net.places) == 6
    assert [str(t) for t in net.transitions] == ["T[1, 2]", "T[2, 3]", "T[3, 1]"]
    t12 = net.transitions[0]
    assert net.pre[t12] == places("t@1", "n@2")
    assert net.post[t12] == places("n@1", "t@2")


def test_empty_architecture_gives_empty_net():
    net = build_net(SIG, Architecture())
    assert net.places == () and net.transitions == ()


def test_self_loop_tuple_is_excluded():
    arch = Architecture({"S": {(1,)}}, {"T": {((1,), (1,))}})
    assert build_net(SIG, arch).transitions == ()


def test_dangling_endpoint_has_no_transition():
    arch = Architecture({"S": {(1,)}}, {"T": {((1,), (2,))}})
    assert build_net(SIG, arch).transitions == ()


def test_enabled_and_fire():
    c, net = ring(3)
    (t,) = enabled(net, c.marking)
    assert str(t) == "T[1, 2]"
    assert fire(net, c.marking, t) == places("n@1", "t@2", "n@3")
    assert enabled(net, places("n@1", "n@2", "n@3")) == []
    assert enabled(net, places("t@1", "t@2", "t@3")) == []
    with pytest.raises(NotEnabled):
        fire(net, c.marking, net.transitions[1])


def test_two_ring_round_trip():
    c, net = ring(2)
    m = c.marking
    for name in ("T[1, 2]", "T[2, 1]"):
        (t,) = [t for t in enabled(net, m) if str(t) == name]
        m = fire(net, m, t)
    assert m == c.marking


@pytest.mark.parametrize("tokens,size", [((1,), 3), ((), 1), ((1, 2), 3), ((1, 2, 3), 1)])
def test_reach_set_sizes(tokens, size):
    c, net = ring(3, tokens)
    res = reach_set(net, c.marking)
    assert len(res.markings) == size
    assert not res.exhausted


def test_reach_set_cap_and_path():
    c, net = ring(4)
    res = reach_set(net, c.marking, cap=2)
    assert res.exhausted and len(res.markings) == 2
    full = reach_set(net, c.marking)
    last = places("n@1", "n@2", "n@3", "t@4")
    assert [str(t) for t in full.path_to(last)] == ["T[1, 2]", "T[2, 3]", "T[3, 4]"]


def test_deadlocks():
    _, net = ring(3)
    assert is_deadlock(net, places("n@1", "n@2", "n@3"))
    assert not is_deadlock(net, places("t@1", "n@2", "n@3"))
    assert is_deadlock(net, places("t@1", "t@2", "t@3"))


def test_precise_markings():
    c, _ = ring(2)
    assert is_precise(SIG, c.architecture, c.marking)
    assert not is_precise(SIG, c.architecture, places("t@1", "n@1", "n@2"))
    assert not is_precise(SIG, c.architecture, places("t@1"))
    assert len(list(precise_markings(SIG, c.architecture))) == 4
    with pytest.raises(CapExceeded):
        list(precise_markings(SIG, c.architecture, cap=3))


# -- structural invariants against brute force -------------------------------


def _subsets(items):
    items = list(items)
    for k in range(len(items) + 1):
        yield from (frozenset(c) for c in itertools.combinations(items, k))


def _oracle_is_trap(net, sigma):
    return all(not (sigma & net.pre[t]) or (sigma & net.post[t]) for t in net.transitions)


def _oracle_is_mutex(net, sigma, m0):
    return len(sigma & m0) == 1 and all(
        len(sigma & net.pre[t]) == len(sigma & net.post[t]) <= 1 for t in net.transitions)


def _oracle_max_trap(net, allowed):
    best = frozenset()
    for sigma in _subsets(allowed):
        if _oracle_is_trap(net, sigma):
            best |= sigma
    return best


def test_max_trap_examples():
    _, net = ring(2)
    assert max_trap_within(net, net.places) == frozenset(net.places)
    assert max_trap_within(net, ()) == frozenset()
    _, net3 = ring(3)
    allowed = net3.place_set - places("t@1", "t@2", "t@3")
    assert max_trap_within(net3, allowed) == _oracle_max_trap(net3, allowed)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.sets(st.integers(1, 4)), st.randoms(use_true_random=False))
def test_max_trap_matches_brute_force(n, tokens, rnd):
    _, net = ring(n, tokens)
    allowed = frozenset(p for p in net.places if rnd.random() < 0.7)
    got = max_trap_within(net, allowed)
    assert got == _oracle_max_trap(net, allowed)


def test_trap_invariant_examples():
    c, net = ring(3)
    assert violates_trap_invariant(net, c.marking, c.marking) is None
    witness = violates_trap_invariant(net, c.marking, places("n@1", "n@2", "n@3"))
    assert witness is not None and places("t@1", "t@2", "t@3") <= witness


def test_mutex_examples():
    c, net = ring(2)
    muts = enumerate_mutexes(net, c.marking)
    assert places("t@1", "n@1") in muts
    assert enumerate_mutexes(net, frozenset()) == []
    with pytest.raises(CapExceeded):
        enumerate_mutexes(net, c.marking, place_cap=3)


def test_mutexes_without_transitions():
    arch = Architecture({"S": {(1,), (2,)}}, {})
    net = build_net(SIG, arch)
    m0 = places("t@1", "n@2")
    want = [s for s in _subsets(net.places) if _oracle_is_mutex(net, s, m0)]
    assert sorted(map(sorted, enumerate_mutexes(net, m0))) == sorted(map(sorted, want))


@pytest.mark.parametrize("tokens", [(1,), (1, 2), (), (2, 3)])
def test_mutexes_match_brute_force(tokens):
    c, net = ring(3, tokens)
    want = {s for s in _subsets(net.places) if _oracle_is_mutex(net, s, c.marking)}
    assert set(enumerate_mutexes(net, c.marking)) == want


@pytest.mark.parametrize("n", [2, 3, 4])
def test_invariants_are_sound_on_reachable_markings(n):
    for k in range(n + 1):
        c, net = ring(n, tuple(range(1, k + 1)))
        for m in reach_set(net, c.marking).markings:
            assert in_invariants(net, c.marking, m).holds


def test_invariant_membership_examples():
    c, net = ring(3)
    assert in_invariants(net, c.marking, c.marking).holds
    res = in_invariants(net, c.marking, places("n@1", "n@2", "n@3"))
    assert not res.holds
    res = in_invariants(net, c.marking, places("n@1", "n@2", "n@3"), InvariantOptions(use_mutexes=False))
    assert not res.holds and res.trap is not None and res.mutexes_skipped


def test_empty_initial_marking_has_no_invariants():
    arch = Architecture({"S": {(1,)}}, {})
    net = build_net(SIG, arch)
    assert in_invariants(net, frozenset(), places("t@1")).holds


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_firing_keeps_markings_precise(seed):
    rng = random.Random(seed)
    for name, sentence, bound in [("ring.cl", "RingAny", 8), ("ternary.cl", "Star", 5),
                                  ("tll.cl", "Root", 11)]:
        spec = load(name)
        q = make_query(spec, sentence)
        trees = list(enumerate_trees(spec, sentence, bound))
        c = canonical_model(rng.choice(trees), q)
        net = build_net(spec.signature, c.architecture)
        m = c.marking
        for _ in range(20):
            ready = enabled(net, m)
            if not ready:
                break
            m = fire(net, m, rng.choice(ready))
            assert is_precise(spec.signature, c.architecture, m)


def test_renamed_reach_sets_commute():
    rng = random.Random(7)
    c, net = ring(3, (1, 2))
    reach = reach_set(net, c.marking).markings
    for _ in range(10):
        f = random_renaming(c.architecture, rng)
        c2 = rename_indices(c, f, SIG)
        net2 = build_net(SIG, c2.architecture)
        reach2 = reach_set(net2, c2.marking).markings
        assert reach2 == {frozenset((q, f.apply("S", u)) for q, u in m) for m in reach}
    assert TypedRenaming() == TypedRenaming({"S": {(1,): (1,)}})
