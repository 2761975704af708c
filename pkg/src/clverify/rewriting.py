"""Rewriting trees: enumeration, characteristic formulae, canonical stores and models."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, Optional, Union

from .cl import (ClFormula, CompAtom, InterAtom, PredAtom, Query, Spec, exists, make_query, rename_free, star)
from .errors import DisjointnessError, InputError, NormalFormViolation
from .model import Architecture, Configuration, Index, index_from_str, index_to_str

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewritingTree:
    """Rule-labelled tree; ``labels`` lists (node, 0-based rule index) in BFS order."""

    labels: tuple[tuple[Index, int], ...]

    @cached_property
    def label_map(self) -> dict[Index, int]:
        return dict(self.labels)

    @property
    def nodes(self) -> tuple[Index, ...]:
        return tuple(n for n, _ in self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def label(self, node: Index) -> int:
        return self.label_map[node]

    def word(self) -> tuple[int, ...]:
        return tuple(r for _, r in self.labels)

    def to_json(self) -> dict:
        return {"nodes": {index_to_str(n): r + 1 for n, r in self.labels}}

    @staticmethod
    def from_json(doc: Union[dict, str]) -> "RewritingTree":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            pairs = [(index_from_str(k), int(v) - 1) for k, v in doc["nodes"].items()]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed tree document: {exc}") from exc
        pairs.sort(key=lambda p: (len(p[0]), p[0]))
        return RewritingTree(tuple(pairs))


def tree_id(tree: RewritingTree) -> str:
    return " ".join(f"{index_to_str(n)}:{r + 1}" for n, r in tree.labels)


def _min_costs(q: Query) -> tuple[dict[str, float], dict[str, float]]:
    """Least number of nodes / components of any finite derivation of each predicate."""
    rules = q.sid.rules
    heads = {r.head for r in rules}
    nodes = {h: math.inf for h in heads}
    comps = {h: math.inf for h in heads}
    changed = True
    while changed:
        changed = False
        for r in rules:
            n = 1 + sum(nodes.get(a.name, math.inf) for a in r.pred_atoms)
            c = len(r.comp_atoms) + sum(comps.get(a.name, math.inf) for a in r.pred_atoms)
            if n < nodes[r.head]:
                nodes[r.head] = n
                changed = True
            if c < comps[r.head]:
                comps[r.head] = c
                changed = True
    return nodes, comps


class TreeSearch:
    """Iterable over rewriting trees in lexicographic order of their BFS label word.

    ``cut`` becomes true when the node budget discarded a branch whose component lower
    bound still fit ``component_budget`` (so absence of a match is not conclusive).
    """

    def __init__(self, q: Query, max_nodes: int, component_budget: Optional[int] = None):
        self.q = q
        self.max_nodes = max_nodes
        self.component_budget = component_budget
        self.cut = False
        self.min_nodes, self.min_comps = _min_costs(q)

    def component_counts(self, tree: RewritingTree) -> dict[str, int]:
        counts: Counter = Counter()
        for _, r in tree.labels:
            for a in self.q.sid.rules[r].comp_atoms:
                counts[a.ctype] += 1
        return dict(counts)

    def __iter__(self) -> Iterator[RewritingTree]:
        self.cut = False
        rules = self.q.sid.rules
        by_head = self.q.sid.by_head
        mn, mc = self.min_nodes, self.min_comps
        budget = self.component_budget if self.component_budget is not None else math.inf
        queue: list[tuple[Index, str]] = [((), self.q.root_head)]
        labels: list[tuple[Index, int]] = []

        def rec(k: int, pend_nodes: float, pend_comps: float, comps: int):
            if k == len(queue):
                yield RewritingTree(tuple(labels))
                return
            node, pred = queue[k]
            rest_nodes = pend_nodes - mn[pred]
            rest_comps = pend_comps - mc[pred]
            for ri in by_head.get(pred, ()):
                r = rules[ri]
                child_nodes = sum(mn.get(a.name, math.inf) for a in r.pred_atoms)
                child_comps = sum(mc.get(a.name, math.inf) for a in r.pred_atoms)
                new_comps = comps + len(r.comp_atoms)
                lb_comps = new_comps + rest_comps + child_comps
                lb_nodes = k + 1 + rest_nodes + child_nodes
                if lb_comps > budget or lb_comps == math.inf:
                    continue
                if lb_nodes > self.max_nodes:
                    self.cut = True
                    continue
                labels.append((node, ri))
                base = len(queue)
                queue.extend((node + (i + 1,), a.name) for i, a in enumerate(r.pred_atoms))
                yield from rec(k + 1, rest_nodes + child_nodes, rest_comps + child_comps, new_comps)
                del queue[base:]
                labels.pop()

        root_nodes = mn.get(self.q.root_head, math.inf)
        root_comps = mc.get(self.q.root_head, math.inf)
        if root_nodes == math.inf:
            return
        yield from rec(0, root_nodes, root_comps, 0)


def enumerate_trees(spec: Spec, sentence, max_nodes: int) -> Iterator[RewritingTree]:
    return iter(TreeSearch(make_query(spec, sentence), max_nodes))


def validate_tree(tree: RewritingTree, q: Query) -> list[str]:
    """Independent re-check of the rewriting-tree conditions; returns the list of violations."""
    problems = []
    lm = tree.label_map
    if len(lm) != len(tree.labels):
        problems.append("duplicate node")
    if () not in lm or lm[()] not in q.root_rules:
        problems.append("root not labelled by a sentence rule")
    for node, ri in tree.labels:
        r = q.sid.rules[ri]
        if node and node[:-1] not in lm:
            problems.append(f"{index_to_str(node)} has no parent")
        for i, a in enumerate(r.pred_atoms, start=1):
            child = node + (i,)
            if child not in lm:
                problems.append(f"{index_to_str(child)} missing")
            elif q.sid.rules[lm[child]].head != a.name:
                problems.append(f"{index_to_str(child)} head mismatch")
        for extra in (n for n in lm if len(n) == len(node) + 1 and n[:-1] == node):
            if extra[-1] > r.npred:
                problems.append(f"{index_to_str(extra)} is an extra child")
    return problems


# -- characteristic formula -------------------------------------------------


def annotate(var: str, node: Index) -> str:
    return f"{var}^{index_to_str(node)}"


def characteristic_formula(tree: RewritingTree, q: Query) -> ClFormula:
    """Predicate-free unfolding; existentials introduced at node w are renamed ``x^w``."""
    rules = q.sid.rules
    lm = tree.label_map
    bound: list[str] = []

    def unfold(node: Index, actuals: tuple[str, ...]) -> list:
        r = rules[lm[node]]
        sub = dict(zip(r.params, actuals))
        for y in r.existentials:
            sub[y] = annotate(y, node)
            bound.append(sub[y])
        parts = []
        i = 0
        for a in r.atoms:
            if isinstance(a, PredAtom):
                i += 1
                parts += unfold(node + (i,), tuple(sub[v] for v in a.args))
            else:
                parts.append(rename_free(a, sub))
        return parts

    r0 = rules[lm[()]]
    atoms = unfold((), r0.params)
    return exists(bound, star(*atoms))


# -- canonical store and model ----------------------------------------------


class CanonicalStore:
    """Maps each (node, local variable) to the node carrying that variable's component atom."""

    def __init__(self, tree: RewritingTree, q: Query):
        self.tree = tree
        self.q = q
        self._memo: dict[tuple[Index, str], Index] = {}

    def target(self, node: Index, var: str) -> Index:
        key = (node, var)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        r = self.q.sid.rules[self.tree.label(node)]
        if any(a.var == var for a in r.comp_atoms):
            res = node
        else:
            res = None
            for i, a in enumerate(r.pred_atoms, start=1):
                if var in a.args:
                    child = node + (i,)
                    cr = self.q.sid.rules[self.tree.label(child)]
                    res = self.target(child, cr.params[a.args.index(var)])
                    break
            if res is None:
                raise NormalFormViolation(
                    f"variable {var} at node {index_to_str(node)} reaches no component atom")
        self._memo[key] = res
        return res

    def items(self) -> dict[tuple[Index, str], Index]:
        out = {}
        for node, ri in self.tree.labels:
            for v in self.q.sid.rules[ri].local_vars:
                out[(node, v)] = self.target(node, v)
        return out

    def annotated(self) -> dict[str, Index]:
        """Store restricted to existentials, keyed by their ``x^w`` names."""
        out = {}
        for node, ri in self.tree.labels:
            for v in self.q.sid.rules[ri].existentials:
                out[annotate(v, node)] = self.target(node, v)
        return out


def canonical_store(tree: RewritingTree, q_or_spec, sentence=None) -> CanonicalStore:
    return CanonicalStore(tree, _query(q_or_spec, sentence))


def unique_component_node(tree: RewritingTree, q_or_spec, var: Union[str, tuple[Index, str]],
                          sentence=None) -> Index:
    q = _query(q_or_spec, sentence)
    store = CanonicalStore(tree, q)
    if isinstance(var, tuple):
        return store.target(*var)
    name, _, where = var.partition("^")
    return store.target(index_from_str(where), name)


def canonical_model(tree: RewritingTree, q_or_spec, sentence=None) -> Configuration:
    q = _query(q_or_spec, sentence)
    store = CanonicalStore(tree, q)
    sig = q.signature
    comps: dict[str, set[Index]] = {}
    inters: dict[str, set] = {}
    marking = set()
    for node, ri in tree.labels:
        r = q.sid.rules[ri]
        for a in r.comp_atoms:
            u = store.target(node, a.var)
            bucket = comps.setdefault(a.ctype, set())
            if u in bucket:
                raise DisjointnessError(a.ctype, u)
            bucket.add(u)
            state = a.state if a.state is not None else sig.component(a.ctype).states[0]
            marking.add((state, u))
        for a in r.inter_atoms:
            tup = tuple(store.target(node, v) for v in a.args)
            bucket = inters.setdefault(a.itype, set())
            if tup in bucket:
                raise DisjointnessError(a.itype, tup)
            bucket.add(tup)
    return Configuration(Architecture(comps, inters), frozenset(marking))


def _query(q_or_spec, sentence) -> Query:
    if isinstance(q_or_spec, Query):
        return q_or_spec
    if sentence is None:
        raise TypeError("a sentence is required when passing a Spec")
    return make_query(q_or_spec, sentence)
