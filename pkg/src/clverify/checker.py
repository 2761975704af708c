"""Bounded parametric queries over the canonical instances of a sentence."""

from __future__ import annotations

import logging
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from .cl import ClFormula, Query, Spec, make_query, models_in, validate_query
from .errors import BoundExhausted, CapExceeded, DisjointnessError, TightnessError, UnknownState
from .model import Configuration, Signature, find_symmetry, index_to_str
from .petri import (DEFAULT_BFS_CAP, DEFAULT_MUTEX_PLACE_CAP, DEFAULT_PRODUCT_CAP, InvariantChecker,
                    InvariantOptions, PetriNet, TransitionId, build_net, enabled, is_deadlock,
                    precise_markings)
from .rewriting import RewritingTree, TreeSearch, canonical_model, tree_id

logger = logging.getLogger(__name__)

YES, NO, INCONCLUSIVE = "yes", "no", "inconclusive"


@dataclass(frozen=True)
class Caps:
    bfs: int = DEFAULT_BFS_CAP
    mutex_places: int = DEFAULT_MUTEX_PLACE_CAP
    product: int = DEFAULT_PRODUCT_CAP


@dataclass(frozen=True)
class InstanceResult:
    tree: RewritingTree
    mode: str
    answer: str
    witness: Optional[dict] = None
    cause: Optional[str] = None

    def to_json(self) -> dict:
        doc = {"tree": self.tree.to_json(), "treeId": tree_id(self.tree), "mode": self.mode,
               "answer": self.answer}
        if self.witness is not None:
            doc["witness"] = self.witness
        if self.cause:
            doc["cause"] = self.cause
        return doc


@dataclass(frozen=True)
class Verdict:
    query: str
    sentence: str
    max_nodes: int
    mode: str
    instances: tuple[InstanceResult, ...]
    summary: str
    params: dict = field(default_factory=dict)

    @property
    def bound_note(self) -> str:
        return f"bounded check: only instances whose rewriting tree has at most {self.max_nodes} nodes"

    def to_json(self) -> dict:
        doc = {"schema": "clverify/1", "query": self.query, "sentence": self.sentence,
               "maxNodes": self.max_nodes, "mode": self.mode}
        doc.update(self.params)
        doc["instances"] = [i.to_json() for i in self.instances]
        doc["summary"] = self.summary
        doc["bound"] = self.bound_note
        return doc

    def counts(self) -> Counter:
        return Counter(i.answer for i in self.instances)


def _marking_json(m: Iterable) -> list:
    return [[q, index_to_str(u)] for (q, u) in sorted(m, key=lambda p: (p[1], p[0]))]


def _aggregate(answers: Sequence[str], witness_answer: str) -> str:
    if witness_answer in answers:
        return witness_answer
    if INCONCLUSIVE in answers:
        return INCONCLUSIVE
    return NO if witness_answer == YES else YES


@dataclass
class Instance:
    tree: RewritingTree
    config: Configuration
    net: PetriNet
    sig: Signature


def instances(q: Query, max_nodes: int) -> Iterable[Instance]:
    for tree in TreeSearch(q, max_nodes):
        try:
            config = canonical_model(tree, q)
        except DisjointnessError as err:
            logger.info("tree %s has no model (%s)", tree_id(tree), err)
            continue
        yield Instance(tree, config, build_net(q.signature, config.architecture), q.signature)


def _bfs_search(net: PetriNet, m0: frozenset, goal: Callable[[frozenset], bool], cap: int):
    """Breadth-first search for a reachable marking satisfying ``goal``.

    Returns ``(marking, firing sequence)`` or ``(None, exhausted_flag)``.
    """
    m0 = frozenset(m0)
    if goal(m0):
        return m0, []
    parents: dict = {m0: None}
    queue = deque([m0])
    while queue:
        m = queue.popleft()
        for t in enabled(net, m):
            m2 = (m - net.pre[t]) | net.post[t]
            if m2 in parents:
                continue
            if len(parents) >= cap:
                return None, True
            parents[m2] = (m, t)
            if goal(m2):
                path: list[TransitionId] = []
                cur = m2
                while parents[cur] is not None:
                    prev, tr = parents[cur]
                    path.append(tr)
                    cur = prev
                return m2, list(reversed(path))
            queue.append(m2)
    return None, False


def _require_valid(q: Query) -> None:
    report = validate_query(q)
    if not report.ok:
        raise TightnessError("; ".join(str(i) for i in report.errors))


def _run(q: Query, max_nodes: int, jobs: int, work: Callable[[Instance], InstanceResult]) -> list[InstanceResult]:
    items = list(instances(q, max_nodes))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, items))
    return [work(i) for i in items]


def _state_counts(states: Sequence[str], sig: Signature) -> Counter:
    known = set(sig.all_states)
    for q in states:
        if q not in known:
            raise UnknownState(f"unknown state {q!r}")
    return Counter(states)


def _meets_counts(m: frozenset, need: Counter) -> bool:
    if not need:
        return True
    have = Counter(q for (q, _) in m)
    return all(have[q] >= k for q, k in need.items())


def _exact(inst: Instance, goal, caps: Caps) -> InstanceResult:
    m, extra = _bfs_search(inst.net, inst.config.marking, goal, caps.bfs)
    if m is not None:
        return InstanceResult(inst.tree, "exact", YES,
                              {"marking": _marking_json(m), "firing": [str(t) for t in extra]})
    if extra:
        return InstanceResult(inst.tree, "exact", INCONCLUSIVE, cause=f"reachability cap {caps.bfs} hit")
    return InstanceResult(inst.tree, "exact", NO)


def _invariant(inst: Instance, goal, caps: Caps) -> InstanceResult:
    sig_arch = inst.config.architecture
    checker = InvariantChecker(inst.net, inst.config.marking,
                               InvariantOptions(place_cap=caps.mutex_places))
    note = "mutex invariants skipped (place cap)" if checker.mutexes_skipped else None
    try:
        for m in precise_markings(inst.sig, sig_arch, caps.product):
            if goal(m) and checker.check(m).holds:
                witness = {"marking": _marking_json(m)}
                if note:
                    witness["note"] = note
                return InstanceResult(inst.tree, "invariant", YES, witness)
    except CapExceeded as err:
        return InstanceResult(inst.tree, "invariant", INCONCLUSIVE, cause=str(err))
    return InstanceResult(inst.tree, "invariant", NO, cause=note)


def _check(q: Query, max_nodes: int, mode: str, goal_for: Callable[[Instance], Callable], caps: Caps,
           jobs: int) -> list[InstanceResult]:
    if mode not in ("exact", "invariant"):
        raise ValueError(f"unknown mode {mode!r}")

    def work(inst: Instance) -> InstanceResult:
        goal = goal_for(inst)
        if mode == "exact":
            return _exact(inst, goal, caps)
        return _invariant(inst, goal, caps)

    return _run(q, max_nodes, jobs, work)


def check_deadlock_bounded(spec: Spec, sentence: Union[str, ClFormula], max_nodes: int = 8,
                           mode: str = "exact", caps: Caps = Caps(), jobs: int = 1) -> Verdict:
    q = make_query(spec, sentence)
    _require_valid(q)
    results = _check(q, max_nodes, mode, lambda inst: (lambda m: is_deadlock(inst.net, m)), caps, jobs)
    return Verdict("deadlock", q.name, max_nodes, mode, tuple(results),
                   _aggregate([r.answer for r in results], YES))


def check_reach_bounded(spec: Spec, sentence: Union[str, ClFormula], states: Sequence[str],
                        max_nodes: int = 8, mode: str = "exact", caps: Caps = Caps(),
                        jobs: int = 1) -> Verdict:
    q = make_query(spec, sentence)
    need = _state_counts(states, spec.signature)
    _require_valid(q)
    results = _check(q, max_nodes, mode, lambda inst: (lambda m: _meets_counts(m, need)), caps, jobs)
    return Verdict("reach", q.name, max_nodes, mode, tuple(results),
                   _aggregate([r.answer for r in results], YES), {"states": list(states)})


class _ModelOracle:
    """Answers ``(arch, m) |= psi`` by symmetry against psi's canonical models (cached)."""

    def __init__(self, q: Query, max_nodes: int):
        self.q = q
        self.max_nodes = max_nodes
        self._by_shape: dict[tuple, tuple[list[Configuration], bool]] = {}

    def _candidates(self, counts: dict[str, int]):
        key = tuple(sorted(counts.items()))
        if key not in self._by_shape:
            search = TreeSearch(self.q, self.max_nodes, component_budget=sum(counts.values()))
            found = []
            for tree in search:
                if search.component_counts(tree) != counts:
                    continue
                try:
                    found.append(canonical_model(tree, self.q))
                except DisjointnessError:
                    continue
            self._by_shape[key] = (found, search.cut)
        return self._by_shape[key]

    def holds(self, c: Configuration) -> bool:
        counts = {ct: len(us) for ct, us in c.architecture.components.items()}
        found, cut = self._candidates(counts)
        states = Counter(q for (q, _) in c.marking)
        for cand in found:
            if Counter(q for (q, _) in cand.marking) != states:
                continue
            if find_symmetry(cand, c, self.q.signature) is not None:
                return True
        if cut:
            raise BoundExhausted("psi trees beyond the node bound could match")
        return False


def check_safe_bounded(spec: Spec, phi: Union[str, ClFormula], psi: Union[str, ClFormula],
                       max_nodes: int = 8, caps: Caps = Caps(), jobs: int = 1) -> Verdict:
    q = make_query(spec, phi)
    qpsi = make_query(spec, psi)
    _require_valid(q)
    _require_valid(qpsi)
    oracle = _ModelOracle(qpsi, max_nodes)

    def work(inst: Instance) -> InstanceResult:
        arch = inst.config.architecture
        seen = {inst.config.marking}
        queue = deque([inst.config.marking])
        try:
            while queue:
                m = queue.popleft()
                if not oracle.holds(Configuration(arch, m)):
                    return InstanceResult(inst.tree, "exact", NO, {"marking": _marking_json(m)})
                for t in enabled(inst.net, m):
                    m2 = (m - inst.net.pre[t]) | inst.net.post[t]
                    if m2 not in seen:
                        if len(seen) >= caps.bfs:
                            return InstanceResult(inst.tree, "exact", INCONCLUSIVE,
                                                  cause=f"reachability cap {caps.bfs} hit")
                        seen.add(m2)
                        queue.append(m2)
        except BoundExhausted as err:
            return InstanceResult(inst.tree, "exact", INCONCLUSIVE, cause=str(err))
        return InstanceResult(inst.tree, "exact", YES)

    results = _run(q, max_nodes, 1, work)
    return Verdict("safe", q.name, max_nodes, "exact", tuple(results),
                   _aggregate([r.answer for r in results], NO), {"psi": qpsi.name})


def check_inductive_bounded(spec: Spec, phi: Union[str, ClFormula], max_nodes: int = 8,
                            caps: Caps = Caps(), jobs: int = 1) -> Verdict:
    q = make_query(spec, phi)
    _require_valid(q)
    oracle = _ModelOracle(q, max_nodes)

    def work(inst: Instance) -> InstanceResult:
        arch = inst.config.architecture
        m0 = inst.config.marking
        try:
            for t in enabled(inst.net, m0):
                m2 = (m0 - inst.net.pre[t]) | inst.net.post[t]
                if not oracle.holds(Configuration(arch, m2)):
                    return InstanceResult(inst.tree, "exact", NO,
                                          {"marking": _marking_json(m2), "firing": [str(t)]})
        except BoundExhausted as err:
            return InstanceResult(inst.tree, "exact", INCONCLUSIVE, cause=str(err))
        return InstanceResult(inst.tree, "exact", YES)

    results = _run(q, max_nodes, 1, work)
    return Verdict("inductive", q.name, max_nodes, "exact", tuple(results),
                   _aggregate([r.answer for r in results], NO))
