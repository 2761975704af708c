"""Hash-consed and-inverter circuits with second-order blocks, and a CEGAR QBF solver on top of pycosat.

Literals are signed node ids; node 1 is the constant true, so ``-1`` is false.
A ``q`` node ``(vars, body)`` stands for ``exists vars . body``; its quantifier kind
in a prenex form follows from the polarity under which it is reached.
"""

from __future__ import annotations

import logging
from typing import Iterable, Optional

import pycosat

logger = logging.getLogger(__name__)

TRUE = 1
FALSE = -1

_VAR, _AND, _Q = 0, 1, 2


class Circuit:
    def __init__(self) -> None:
        self.kind: list[int] = [-1, -1]
        self.args: list = [None, None]
        self._table: dict = {}
        self._support: dict[int, frozenset] = {}

    def __len__(self) -> int:
        return len(self.kind)

    def var(self) -> int:
        self.kind.append(_VAR)
        self.args.append(None)
        return len(self.kind) - 1

    def is_var(self, lit: int) -> bool:
        return self.kind[abs(lit)] == _VAR

    def and_children(self, lit: int) -> tuple[int, ...]:
        """Children of a positive and-literal (empty otherwise)."""
        if lit > 1 and self.kind[lit] == _AND:
            return self.args[lit]
        return ()

    def and_(self, lits: Iterable[int]) -> int:
        seen: set[int] = set()
        for lit in lits:
            if lit == FALSE:
                return FALSE
            if lit == TRUE or lit in seen:
                continue
            if -lit in seen:
                return FALSE
            seen.add(lit)
        if not seen:
            return TRUE
        if len(seen) == 1:
            return next(iter(seen))
        key = (_AND, tuple(sorted(seen)))
        node = self._table.get(key)
        if node is None:
            self.kind.append(_AND)
            self.args.append(key[1])
            node = len(self.kind) - 1
            self._table[key] = node
        return node

    def or_(self, lits: Iterable[int]) -> int:
        return -self.and_(-lit for lit in lits)

    def iff(self, a: int, b: int) -> int:
        return self.and_((self.or_((-a, b)), self.or_((a, -b))))

    def q(self, variables: Iterable[int], body: int) -> int:
        vs = tuple(sorted(set(variables)))
        if abs(body) == TRUE or not vs:
            return body
        key = (_Q, vs, body)
        node = self._table.get(key)
        if node is None:
            self.kind.append(_Q)
            self.args.append((vs, body))
            node = len(self.kind) - 1
            self._table[key] = node
        return node

    # -- structure ---------------------------------------------------------

    def _postorder(self, root: int) -> list[int]:
        """Node ids of the cone of ``root`` (through q bodies), children first."""
        out: list[int] = []
        done: set[int] = set()
        stack = [(abs(root), False)]
        while stack:
            node, expanded = stack.pop()
            if node in done:
                continue
            if expanded:
                done.add(node)
                out.append(node)
                continue
            stack.append((node, True))
            k = self.kind[node]
            if k == _AND:
                stack.extend((abs(c), False) for c in self.args[node] if abs(c) not in done)
            elif k == _Q:
                stack.append((abs(self.args[node][1]), False))
        return out

    def support(self, lit: int) -> frozenset:
        """Free variables of the cone of ``lit``."""
        root = abs(lit)
        if root in self._support:
            return self._support[root]
        for node in self._postorder(root):
            if node in self._support:
                continue
            k = self.kind[node]
            if k == _VAR:
                s = frozenset((node,))
            elif k == _AND:
                s = frozenset().union(*(self._support[abs(c)] for c in self.args[node]))
            elif k == _Q:
                vs, body = self.args[node]
                s = self._support[abs(body)] - frozenset(vs)
            else:
                s = frozenset()
            self._support[node] = s
        return self._support[root]

    def rebuild(self, root: int, leaf: dict[int, int]) -> int:
        """Copy of a q-free cone with variables replaced through ``leaf``."""
        memo: dict[int, int] = {}
        for node in self._postorder(root):
            k = self.kind[node]
            if k == _VAR:
                memo[node] = leaf.get(node, node)
            elif k == _AND:
                memo[node] = self.and_(memo[abs(c)] if c > 0 else -memo[abs(c)] for c in self.args[node])
            elif k == _Q:
                raise ValueError("rebuild expects a quantifier-free cone")
            else:
                memo[node] = node
        r = memo[abs(root)]
        return r if root > 0 else -r

    def prenex(self, root: int) -> tuple[int, list[tuple[str, list[int]]]]:
        """Quantifier-free matrix plus blocks ``[("e"|"a", vars), ...]`` starting existential.

        Free variables form the first existential block.  Each q node is placed at the
        first level of its kind after every block whose variables occur free in its body.
        """
        order = self._postorder(root)
        pol: dict[int, int] = {}
        # polarity propagation, parents before children
        reach = {abs(root): {1 if root > 0 else -1}}
        for node in reversed(order):
            ps = reach.get(node, set())
            k = self.kind[node]
            if k == _AND:
                for c in self.args[node]:
                    reach.setdefault(abs(c), set()).update(p if c > 0 else -p for p in ps)
            elif k == _Q:
                if len(ps) != 1:
                    raise ValueError("second-order block reached under both polarities")
                pol[node] = next(iter(ps))
                body = self.args[node][1]
                reach.setdefault(abs(body), set()).update(p if body > 0 else -p for p in ps)
        level: dict[int, int] = {v: 0 for v in self.support(root)}
        blocks: dict[int, list[int]] = {0: sorted(level)}
        qnodes = sorted((n for n in order if self.kind[n] == _Q), reverse=True)  # outermost first
        for node in qnodes:
            vs, body = self.args[node]
            base = max((level[v] for v in self.support(body) - frozenset(vs)), default=0)
            parity = 0 if pol[node] > 0 else 1
            lvl = base if base % 2 == parity else base + 1
            for v in vs:
                level[v] = lvl
            blocks.setdefault(lvl, []).extend(vs)
        memo: dict[int, int] = {}
        for node in order:
            k = self.kind[node]
            if k == _AND:
                memo[node] = self.and_(memo[abs(c)] if c > 0 else -memo[abs(c)] for c in self.args[node])
            elif k == _Q:
                body = self.args[node][1]
                memo[node] = memo[abs(body)] if body > 0 else -memo[abs(body)]
            else:
                memo[node] = node
        matrix = memo[abs(root)] if root > 0 else -memo[abs(root)]
        top = max(blocks)
        prefix = [("e" if i % 2 == 0 else "a", sorted(blocks.get(i, []))) for i in range(top + 1)]
        return matrix, prefix

    # -- SAT ---------------------------------------------------------------

    def cnf(self, root: int) -> tuple[list[list[int]], dict[int, int]]:
        """Tseitin clauses over compact variable numbers, with the node-to-number map."""
        num: dict[int, int] = {}

        def n(lit: int) -> int:
            k = num.get(abs(lit))
            if k is None:
                k = num[abs(lit)] = len(num) + 1
            return k if lit > 0 else -k

        clauses: list[list[int]] = [[n(TRUE)], [n(root)]]
        for node in self._postorder(root):
            if self.kind[node] == _AND:
                g = n(node)
                kids = [n(c) for c in self.args[node]]
                for c in kids:
                    clauses.append([-g, c])
                clauses.append([g] + [-c for c in kids])
            elif self.kind[node] == _Q:
                raise ValueError("cnf expects a quantifier-free cone")
        return clauses, num

    def sat(self, root: int, project: Iterable[int]) -> Optional[dict[int, bool]]:
        if root == TRUE:
            return {v: False for v in project}
        if root == FALSE:
            return None
        clauses, num = self.cnf(root)
        sol = pycosat.solve(clauses)
        if sol == "UNSAT":
            return None
        return {v: (v in num and sol[num[v] - 1] > 0) for v in project}


def _normalize(prefix: list[tuple[str, list[int]]]) -> list[tuple[str, list[int]]]:
    out: list[tuple[str, list[int]]] = []
    for kind, vs in prefix:
        if out and (not vs or out[-1][0] == kind):
            if out[-1][0] == kind:
                out[-1] = (kind, out[-1][1] + list(vs))
            continue
        out.append((kind, list(vs)))
    if not out or out[0][0] != "e":
        out.insert(0, ("e", []))
    return out


class QbfSolver:
    """Recursive counterexample-guided abstraction refinement over prenex formulas."""

    def __init__(self, circ: Circuit):
        self.circ = circ
        self.calls = 0

    def solve(self, prefix: list[tuple[str, list[int]]], matrix: int) -> Optional[dict[int, bool]]:
        """An assignment of the first (existential) block making the formula true, or ``None``."""
        return self._solve([vs for _, vs in _normalize(prefix)], matrix)

    def _solve(self, blocks: list[list[int]], matrix: int) -> Optional[dict[int, bool]]:
        self.calls += 1
        c = self.circ
        first = blocks[0]
        if abs(matrix) == TRUE:
            return {v: False for v in first} if matrix == TRUE else None
        if len(blocks) == 1:
            return c.sat(matrix, first)
        inner, rest = blocks[1], blocks[2:]
        abstraction = TRUE
        # copies of rest[0] join the candidate block; rest[k] copies sit at level k
        abs_blocks: list[list[int]] = [list(first)] + [[] for _ in rest[1:]]
        while True:
            cand = self._solve(_compact(abs_blocks), abstraction)
            if cand is None:
                return None
            sigma = {v: cand.get(v, False) for v in first}
            reduced = c.rebuild(matrix, {v: (TRUE if b else FALSE) for v, b in sigma.items()})
            counter = self._solve(_compact([list(inner)] + [list(b) for b in rest]), -reduced)
            if counter is None:
                return sigma
            leaf = {v: (TRUE if counter.get(v, False) else FALSE) for v in inner}
            for k, block in enumerate(rest):
                for v in block:
                    nv = c.var()
                    leaf[v] = nv
                    abs_blocks[k].append(nv)
            abstraction = c.and_((abstraction, c.rebuild(matrix, leaf)))


def _compact(blocks: list[list[int]]) -> list[list[int]]:
    """Drops empty inner blocks and merges neighbours of equal kind (kind = index parity)."""
    out: list[list[int]] = [list(blocks[0])]
    last = 0
    for i, b in enumerate(blocks[1:], start=1):
        if not b:
            continue
        if i % 2 == last:
            out[-1].extend(b)
        else:
            out.append(list(b))
            last = i % 2
    return out


def decide(circ: Circuit, lit: int) -> bool:
    """Truth value of a closed circuit literal."""
    if circ.support(lit):
        raise ValueError("decide expects a closed literal")
    matrix, prefix = circ.prenex(lit)
    return QbfSolver(circ).solve(prefix, matrix) is not None
