"""Path automata tracking a variable down a rewriting tree to its component atom."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

from . import wsks as W
from .cl import Query, Spec, make_query
from .errors import StartRuleMismatch, UnknownVariable
from .model import Index, index_to_str
from .rewriting import RewritingTree

logger = logging.getLogger(__name__)

State = tuple[int, str]  # (0-based rule index, variable)
Transition = tuple[State, int, State]


@dataclass(frozen=True)
class PathAutomaton:
    states: tuple[State, ...]
    initial: State
    finals: frozenset
    transitions: tuple[Transition, ...]
    kappa: int

    @cached_property
    def successors(self) -> dict[State, tuple[tuple[int, State], ...]]:
        table: dict[State, list] = {s: [] for s in self.states}
        for s, d, s2 in self.transitions:
            table[s].append((d, s2))
        return {s: tuple(v) for s, v in table.items()}

    def accepts(self, word: tuple[int, ...]) -> bool:
        current = {self.initial}
        for d in word:
            current = {s2 for s in current for (dd, s2) in self.successors[s] if dd == d}
        return bool(current & self.finals)

    def to_dot(self) -> str:
        def name(s: State) -> str:
            return f'"{s[0] + 1}/{s[1]}"'
        lines = ["digraph path_automaton {", "  rankdir=LR;"]
        for s in self.states:
            shape = "doublecircle" if s in self.finals else "circle"
            lines.append(f"  {name(s)} [shape={shape}];")
        lines.append(f'  start [shape=point]; start -> {name(self.initial)};')
        for s, d, s2 in self.transitions:
            lines.append(f"  {name(s)} -> {name(s2)} [label=\"{d}\"];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _query(spec_or_query: Union[Spec, Query], sentence=None) -> Query:
    if isinstance(spec_or_query, Query):
        return spec_or_query
    if sentence is None:
        raise TypeError("a sentence is required when passing a Spec")
    return make_query(spec_or_query, sentence)


def all_states(q: Query) -> tuple[State, ...]:
    return tuple((i, v) for i, r in enumerate(q.sid.rules) for v in r.local_vars)


def build_path_automaton(spec_or_query: Union[Spec, Query], rule: int, var: str,
                         sentence=None) -> PathAutomaton:
    """``rule`` is a 0-based index into the query SID."""
    q = _query(spec_or_query, sentence)
    rules = q.sid.rules
    if not 0 <= rule < len(rules) or var not in rules[rule].local_vars:
        raise UnknownVariable(f"variable {var!r} does not occur in rule {rule + 1}")
    states = all_states(q)
    finals = frozenset((i, a.var) for i, r in enumerate(rules) for a in r.comp_atoms)
    transitions = []
    for i, r in enumerate(rules):
        for d, atom in enumerate(r.pred_atoms, start=1):
            for i2 in q.sid.by_head.get(atom.name, ()):
                for y, x in zip(atom.args, rules[i2].params):
                    transitions.append(((i, y), d, (i2, x)))
    return PathAutomaton(states, (rule, var), finals, tuple(sorted(set(transitions))), q.sid.kappa)


def run(a: PathAutomaton, tree: RewritingTree, start: Index) -> set[Index]:
    """Nodes reached by accepting runs that only visit nodes labelled by the states' rules."""
    lm = tree.label_map
    if lm.get(start) != a.initial[0]:
        raise StartRuleMismatch(f"node {index_to_str(start)} is not labelled by rule {a.initial[0] + 1}")
    found = set()
    seen = {(start, a.initial)}
    stack = [(start, a.initial)]
    while stack:
        node, s = stack.pop()
        if s in a.finals:
            found.add(node)
        for d, s2 in a.successors[s]:
            child = node + (d,)
            if lm.get(child) == s2[0] and (child, s2) not in seen:
                seen.add((child, s2))
                stack.append((child, s2))
    return found


# -- logic translation ------------------------------------------------------


def _ident(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", text)


def state_vars(a: PathAutomaton, prefix: str) -> dict[State, str]:
    return {s: f"{prefix}_r{s[0] + 1}_{_ident(s[1])}" for s in a.states}


def to_formula(a: PathAutomaton, x: str, y: str, names: dict[State, str],
               fresh: Optional[W.Fresh] = None) -> W.Formula:
    """The five-conjunct run formula with one set variable per state (``names``)."""
    fresh = fresh or W.Fresh()
    Y = [names[s] for s in a.states]
    z = fresh("z")

    disjoint = []
    for i in range(len(Y)):
        for j in range(i + 1, len(Y)):
            disjoint.append(W.All1(z, W.Or((W.Not(W.Mem(Y[i], W.V(z))), W.Not(W.Mem(Y[j], W.V(z)))))))
    initial = W.Mem(names[a.initial], W.V(x))
    final = W.Or(tuple(W.Mem(names[s], W.V(y)) for s in a.states if s in a.finals))

    def parent_in(d: int, target: str) -> W.Formula:
        zp = fresh("zp")
        return W.Ex1(zp, W.And((W.Eq(W.Succ(W.V(zp), d), W.V(z)), W.Mem(target, W.V(zp)))))

    forward = []
    for s in a.states:
        outs = a.successors[s]
        body = W.Or(tuple(W.Mem(names[s2], W.Succ(W.V(z), d)) for d, s2 in outs)
                    + tuple(parent_in(d, names[s2]) for d, s2 in outs))
        forward.append(W.All1(z, W.Implies(W.And((W.Not(W.Eq(W.V(z), W.V(y))), W.Mem(names[s], W.V(z)))), body)))
    incoming: dict[State, list[tuple[State, int]]] = {s: [] for s in a.states}
    for s, d, s2 in a.transitions:
        incoming[s2].append((s, d))
    backward = []
    for s2 in a.states:
        ins = incoming[s2]
        body = W.Or(tuple(parent_in(d, names[s]) for s, d in ins)
                    + tuple(W.Mem(names[s], W.Succ(W.V(z), d)) for s, d in ins))
        backward.append(W.All1(z, W.Implies(W.And((W.Not(W.Eq(W.V(z), W.V(x))), W.Mem(names[s2], W.V(z)))), body)))
    return W.And((W.And(tuple(disjoint)), initial, final, W.And(tuple(forward)), W.And(tuple(backward))))


def upsilon(a: PathAutomaton, names: dict[State, str], rule_vars: tuple[str, ...],
            fresh: Optional[W.Fresh] = None) -> W.Formula:
    fresh = fresh or W.Fresh()
    z = fresh("z")
    return W.And(tuple(W.All1(z, W.Implies(W.Mem(names[s], W.V(z)), W.Mem(rule_vars[s[0]], W.V(z))))
                       for s in a.states))


def path_formula(spec_or_query: Union[Spec, Query], rule: int, var: str, x: str, y: str,
                 rule_vars: Optional[tuple[str, ...]] = None, sentence=None,
                 fresh: Optional[W.Fresh] = None) -> W.Formula:
    """``exists Y. runs(x, y, Y) and Y consistent with the rule labelling R``."""
    q = _query(spec_or_query, sentence)
    fresh = fresh or W.Fresh()
    a = build_path_automaton(q, rule, var)
    rule_vars = rule_vars or W.rule_family(q)
    names = state_vars(a, fresh("Yst"))
    body = W.And((upsilon(a, names, rule_vars, fresh), to_formula(a, x, y, names, fresh)))
    return W.exists2([names[s] for s in a.states], body)
