"""Weak monadic second-order logic of k successors: syntax, bounded evaluation, builders and export.

Quantifiers range over a finite universe of tree nodes.  Two evaluators are provided:
``enum`` walks subsets directly (tiny universes only) and ``ground`` compiles the formula
into a circuit with second-order blocks and decides it with a CEGAR QBF loop.
"""

from __future__ import annotations

import itertools
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from . import qbf
from .cl import Query, Spec, make_query
from .errors import (InputError, UnboundVariable, UniverseCapExceeded, UniverseMismatch, UnknownState)
from .model import Index, index_to_str

logger = logging.getLogger(__name__)

DEFAULT_UNIVERSE_CAP = 20


# -- syntax -----------------------------------------------------------------


@dataclass(frozen=True)
class Eps:
    pass


@dataclass(frozen=True)
class V:
    name: str


@dataclass(frozen=True)
class Succ:
    term: "Term"
    d: int


Term = Union[Eps, V, Succ]
EPS = Eps()


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Mem:
    setvar: str
    term: Term


@dataclass(frozen=True)
class And:
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Or:
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Ex1:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class All1:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Ex2:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class All2:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class SetEq:
    """``X = {t1, ..., tn}``."""
    setvar: str
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class CardGeq:
    setvar: str
    n: int


@dataclass(frozen=True)
class CardEq:
    setvar: str
    n: int


Formula = Union[Eq, Mem, And, Or, Not, Implies, Iff, Ex1, All1, Ex2, All2, SetEq, CardGeq, CardEq]
TRUE_F = And(())
FALSE_F = Or(())
SUGAR = (Or, Implies, Iff, All1, All2, SetEq, CardGeq, CardEq)


def exists2(names: Iterable[str], body: Formula) -> Formula:
    for n in reversed(list(names)):
        body = Ex2(n, body)
    return body


def forall2(names: Iterable[str], body: Formula) -> Formula:
    for n in reversed(list(names)):
        body = All2(n, body)
    return body


def exists1(names: Iterable[str], body: Formula) -> Formula:
    for n in reversed(list(names)):
        body = Ex1(n, body)
    return body


class Fresh:
    """Collision-free bound-name generator (``base`` followed by a counter)."""

    def __init__(self) -> None:
        self._n = 0

    def __call__(self, base: str) -> str:
        self._n += 1
        return f"{base}{self._n}"


def term_vars(t: Term) -> set[str]:
    while isinstance(t, Succ):
        t = t.term
    return {t.name} if isinstance(t, V) else set()


def free_vars(f: Formula) -> tuple[frozenset, frozenset]:
    """(first-order, second-order) free variables."""
    if isinstance(f, Eq):
        return frozenset(term_vars(f.lhs) | term_vars(f.rhs)), frozenset()
    if isinstance(f, Mem):
        return frozenset(term_vars(f.term)), frozenset((f.setvar,))
    if isinstance(f, (And, Or)):
        fo, so = set(), set()
        for a in f.args:
            a1, a2 = free_vars(a)
            fo |= a1
            so |= a2
        return frozenset(fo), frozenset(so)
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (Implies, Iff)):
        a1, a2 = free_vars(f.lhs)
        b1, b2 = free_vars(f.rhs)
        return a1 | b1, a2 | b2
    if isinstance(f, (Ex1, All1)):
        a1, a2 = free_vars(f.body)
        return a1 - {f.var}, a2
    if isinstance(f, (Ex2, All2)):
        a1, a2 = free_vars(f.body)
        return a1, a2 - {f.var}
    if isinstance(f, SetEq):
        fo = set()
        for t in f.terms:
            fo |= term_vars(t)
        return frozenset(fo), frozenset((f.setvar,))
    if isinstance(f, (CardGeq, CardEq)):
        return frozenset(), frozenset((f.setvar,))
    raise TypeError(f"not a formula: {f!r}")


def size(f: Formula) -> int:
    if isinstance(f, (Eq, Mem, CardGeq, CardEq)):
        return 1
    if isinstance(f, SetEq):
        return 1 + len(f.terms)
    if isinstance(f, (And, Or)):
        return 1 + sum(size(a) for a in f.args)
    if isinstance(f, Not):
        return 1 + size(f.arg)
    if isinstance(f, (Implies, Iff)):
        return 1 + size(f.lhs) + size(f.rhs)
    return 1 + size(f.body)


# -- sugar expansion --------------------------------------------------------

_SUGAR_NAMES = Fresh()


def _sugar_name(avoid: Iterable[str], base: str) -> str:
    avoid = set(avoid)
    while True:
        n = _SUGAR_NAMES(f"_{base}")
        if n not in avoid:
            return n


def expand_card_geq(X: str, n: int) -> Formula:
    ys = [_sugar_name((), "c") for _ in range(n)]
    distinct = [Not(Eq(V(ys[i]), V(ys[j]))) for i in range(n) for j in range(i + 1, n)]
    return exists1(ys, And(tuple(distinct) + tuple(Mem(X, V(y)) for y in ys)))


def expand_set_eq(X: str, terms: Sequence[Term]) -> Formula:
    avoid = set()
    for t in terms:
        avoid |= term_vars(t)
    x = _sugar_name(avoid, "s")
    return All1(x, Iff(Mem(X, V(x)), Or(tuple(Eq(V(x), t) for t in terms))))


def expand_sugar(f: Formula) -> Formula:
    """Rewrites every derived form into the core connectives (=, membership, and, not, exists)."""
    e = expand_sugar
    if isinstance(f, (Eq, Mem)):
        return f
    if isinstance(f, And):
        return And(tuple(e(a) for a in f.args))
    if isinstance(f, Or):
        return Not(And(tuple(Not(e(a)) for a in f.args)))
    if isinstance(f, Not):
        return Not(e(f.arg))
    if isinstance(f, Implies):
        return Not(And((e(f.lhs), Not(e(f.rhs)))))
    if isinstance(f, Iff):
        return And((e(Implies(f.lhs, f.rhs)), e(Implies(f.rhs, f.lhs))))
    if isinstance(f, Ex1):
        return Ex1(f.var, e(f.body))
    if isinstance(f, All1):
        return Not(Ex1(f.var, Not(e(f.body))))
    if isinstance(f, Ex2):
        return Ex2(f.var, e(f.body))
    if isinstance(f, All2):
        return Not(Ex2(f.var, Not(e(f.body))))
    if isinstance(f, SetEq):
        return e(expand_set_eq(f.setvar, f.terms))
    if isinstance(f, CardGeq):
        return e(expand_card_geq(f.setvar, f.n))
    if isinstance(f, CardEq):
        return e(And((CardGeq(f.setvar, f.n), Not(CardGeq(f.setvar, f.n + 1)))))
    raise TypeError(f"not a formula: {f!r}")


# -- S-expressions ----------------------------------------------------------


def term_sexpr(t: Term) -> str:
    if isinstance(t, Eps):
        return "eps"
    if isinstance(t, V):
        return t.name
    return f"(succ {term_sexpr(t.term)} {t.d})"


def sexpr(f: Formula) -> str:
    if isinstance(f, Eq):
        return f"(= {term_sexpr(f.lhs)} {term_sexpr(f.rhs)})"
    if isinstance(f, Mem):
        return f"(in {f.setvar} {term_sexpr(f.term)})"
    if isinstance(f, And):
        return "(and" + "".join(" " + sexpr(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or" + "".join(" " + sexpr(a) for a in f.args) + ")"
    if isinstance(f, Not):
        return f"(not {sexpr(f.arg)})"
    if isinstance(f, Implies):
        return f"(implies {sexpr(f.lhs)} {sexpr(f.rhs)})"
    if isinstance(f, Iff):
        return f"(iff {sexpr(f.lhs)} {sexpr(f.rhs)})"
    if isinstance(f, (Ex1, All1, Ex2, All2)):
        tag = {Ex1: "ex1", All1: "all1", Ex2: "ex2", All2: "all2"}[type(f)]
        return f"({tag} {f.var} {sexpr(f.body)})"
    if isinstance(f, SetEq):
        return f"(seteq {f.setvar}" + "".join(" " + term_sexpr(t) for t in f.terms) + ")"
    if isinstance(f, CardGeq):
        return f"(card>= {f.setvar} {f.n})"
    if isinstance(f, CardEq):
        return f"(card= {f.setvar} {f.n})"
    raise TypeError(f"not a formula: {f!r}")


# -- valuations and universes -----------------------------------------------


@dataclass(frozen=True)
class Valuation:
    first: Mapping[str, Index] = field(default_factory=dict)
    second: Mapping[str, frozenset] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"first": {k: index_to_str(v) for k, v in sorted(self.first.items())},
                "second": {k: sorted(index_to_str(u) for u in sorted(v)) for k, v in sorted(self.second.items())}}


def order_universe(universe: Iterable[Index]) -> tuple[Index, ...]:
    return tuple(sorted(set(universe), key=lambda u: (len(u), u)))


def full_universe(kappa: int, depth: int) -> tuple[Index, ...]:
    """All nodes of the complete kappa-ary tree up to ``depth``."""
    return order_universe(u for k in range(depth + 1) for u in itertools.product(range(1, kappa + 1), repeat=k))


def prefix_universe(nodes: Iterable[Index]) -> tuple[Index, ...]:
    """Nodes together with all their ancestors."""
    out = set()
    for n in nodes:
        for k in range(len(n) + 1):
            out.add(tuple(n[:k]))
    return order_universe(out)


def _term_value(t: Term, env: Mapping[str, Index]) -> Index:
    suffix: list[int] = []
    while isinstance(t, Succ):
        suffix.append(t.d)
        t = t.term
    if isinstance(t, Eps):
        base: Index = ()
    else:
        try:
            base = env[t.name]
        except KeyError:
            raise UnboundVariable(f"first-order variable {t.name} is unbound") from None
    return base + tuple(reversed(suffix))


def _check_valuation(f: Formula, nu: Valuation, universe: tuple[Index, ...], cap: int,
                     allow_free_so: Iterable[str] = (), kappa: Optional[int] = None) -> None:
    if len(universe) > cap:
        raise UniverseCapExceeded(f"universe of {len(universe)} nodes exceeds the cap {cap}")
    if kappa is not None:
        for u in universe:
            if any(not 1 <= d <= kappa for d in u):
                raise UniverseMismatch(f"node {index_to_str(u)} uses a direction outside 1..{kappa}")
    fo, so = free_vars(f)
    missing = sorted((fo - set(nu.first)) | (so - set(nu.second) - set(allow_free_so)))
    if missing:
        raise UnboundVariable(f"unbound variables: {', '.join(missing)}")
    uset = set(universe)
    for name, u in nu.first.items():
        if u not in uset:
            raise UniverseMismatch(f"{name} = {index_to_str(u)} lies outside the universe")
    for name, s in nu.second.items():
        extra = set(s) - uset
        if extra:
            raise UniverseMismatch(f"{name} has nodes outside the universe: "
                                   + ", ".join(sorted(index_to_str(u) for u in extra)))


# -- naive evaluator --------------------------------------------------------


def _subsets(universe: tuple[Index, ...]) -> Iterator[frozenset]:
    for r in range(len(universe) + 1):
        for c in itertools.combinations(universe, r):
            yield frozenset(c)


def _enum_eval(f: Formula, fo: dict, so: dict, U: tuple[Index, ...]) -> bool:
    ev = _enum_eval
    if isinstance(f, Eq):
        return _term_value(f.lhs, fo) == _term_value(f.rhs, fo)
    if isinstance(f, Mem):
        if f.setvar not in so:
            raise UnboundVariable(f"second-order variable {f.setvar} is unbound")
        return _term_value(f.term, fo) in so[f.setvar]
    if isinstance(f, And):
        return all(ev(a, fo, so, U) for a in f.args)
    if isinstance(f, Or):
        return any(ev(a, fo, so, U) for a in f.args)
    if isinstance(f, Not):
        return not ev(f.arg, fo, so, U)
    if isinstance(f, Implies):
        return (not ev(f.lhs, fo, so, U)) or ev(f.rhs, fo, so, U)
    if isinstance(f, Iff):
        return ev(f.lhs, fo, so, U) == ev(f.rhs, fo, so, U)
    if isinstance(f, Ex1):
        return any(ev(f.body, {**fo, f.var: u}, so, U) for u in U)
    if isinstance(f, All1):
        return all(ev(f.body, {**fo, f.var: u}, so, U) for u in U)
    if isinstance(f, Ex2):
        return any(ev(f.body, fo, {**so, f.var: s}, U) for s in _subsets(U))
    if isinstance(f, All2):
        return all(ev(f.body, fo, {**so, f.var: s}, U) for s in _subsets(U))
    if isinstance(f, SetEq):
        return so[f.setvar] == frozenset(_term_value(t, fo) for t in f.terms)
    if isinstance(f, CardGeq):
        return len(so[f.setvar]) >= f.n
    if isinstance(f, CardEq):
        return len(so[f.setvar]) == f.n
    raise TypeError(f"not a formula: {f!r}")


# -- grounding evaluator ----------------------------------------------------


class _SetBind:
    """Circuit literals for the membership of each universe node in one set variable."""

    __slots__ = ("lits",)

    def __init__(self, lits: dict[Index, int]):
        self.lits = lits

    def lit(self, u: Index) -> int:
        return self.lits.get(u, qbf.FALSE)


def _const_bind(s: Iterable[Index]) -> _SetBind:
    return _SetBind({u: qbf.TRUE for u in s})


class Grounder:
    """Compiles formulas over a fixed universe into circuit literals (memoized)."""

    def __init__(self, universe: Iterable[Index], cap: int = DEFAULT_UNIVERSE_CAP,
                 circuit: Optional[qbf.Circuit] = None, eager: bool = True):
        self.U = order_universe(universe)
        self.Uset = frozenset(self.U)
        self.cap = cap
        self.circ = circuit or qbf.Circuit()
        self.eager = eager
        self._memo: dict = {}
        self._info: dict[int, tuple] = {}
        self._keep: list = []
        self.owner: dict[int, tuple[str, Index]] = {}  # block variable -> (set name, node)

    # cached per-formula data; the formula object is kept alive with its entry
    def _fv(self, f: Formula) -> tuple[tuple[str, ...], tuple[str, ...], bool]:
        key = id(f)
        hit = self._info.get(key)
        if hit is None or hit[0] is not f:
            fo, so = free_vars(f)
            hit = (f, tuple(sorted(fo)), tuple(sorted(so)), _has_so_quant(f))
            self._info[key] = hit
        return hit[1], hit[2], hit[3]

    def _cached(self, tag: str, f: Formula, make):
        key = (tag, id(f))
        hit = self._info.get(key)
        if hit is None or hit[0] is not f:
            hit = (f, make(f))
            self._info[key] = hit
        return hit[1]

    def _sorted_conjuncts(self, f: Formula) -> list:
        return self._cached("conj", f, lambda g: sorted(_conjuncts(g), key=size))

    def ground(self, f: Formula, fo: Mapping[str, Index], so: Mapping[str, _SetBind], pol: int = 1) -> int:
        tf = type(f)
        if tf is Mem:
            try:
                return so[f.setvar].lit(_term_value(f.term, fo))
            except KeyError:
                raise UnboundVariable(f"second-order variable {f.setvar} is unbound") from None
        if tf is Eq:
            return qbf.TRUE if _term_value(f.lhs, fo) == _term_value(f.rhs, fo) else qbf.FALSE
        if tf is Not and type(f.arg) in (Mem, Eq):
            return -self.ground(f.arg, fo, so, -pol)
        fo_names, so_names, has_q = self._fv(f)
        try:
            key = (id(f), pol if has_q else 0, tuple(fo[v] for v in fo_names), tuple(id(so[X]) for X in so_names))
        except KeyError as exc:
            raise UnboundVariable(f"variable {exc.args[0]} is unbound") from None
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        res = self._ground(f, fo, so, pol)
        self._memo[key] = res
        return res

    def _ground(self, f: Formula, fo, so, pol: int) -> int:
        c = self.circ
        if isinstance(f, Eq):
            return qbf.TRUE if _term_value(f.lhs, fo) == _term_value(f.rhs, fo) else qbf.FALSE
        if isinstance(f, Mem):
            return so[f.setvar].lit(_term_value(f.term, fo))
        if isinstance(f, And):
            lits = []
            for g in self._sorted_conjuncts(f):
                lit = self.ground(g, fo, so, pol)
                if lit == qbf.FALSE:
                    return qbf.FALSE
                lits.append(lit)
            return c.and_(lits)
        if isinstance(f, Or):
            lits = []
            for g in sorted(f.args, key=size):
                lit = self.ground(g, fo, so, pol)
                if lit == qbf.TRUE:
                    return qbf.TRUE
                lits.append(lit)
            return c.or_(lits)
        if isinstance(f, Not):
            return -self.ground(f.arg, fo, so, -pol)
        if isinstance(f, Implies):
            a = self.ground(f.lhs, fo, so, -pol)
            if a == qbf.FALSE:
                return qbf.TRUE
            return c.or_((-a, self.ground(f.rhs, fo, so, pol)))
        if isinstance(f, Iff):
            a_pos, a_neg = self.ground(f.lhs, fo, so, pol), self.ground(f.lhs, fo, so, -pol)
            b_pos, b_neg = self.ground(f.rhs, fo, so, pol), self.ground(f.rhs, fo, so, -pol)
            return c.and_((c.or_((-a_neg, b_pos)), c.or_((-b_neg, a_pos))))
        if isinstance(f, (Ex1, All1)):
            return self._ground_fo(f, fo, so, pol)
        if isinstance(f, (Ex2, All2)):
            return self._ground_so(f, fo, so, pol)
        if isinstance(f, SetEq):
            vals = {_term_value(t, fo) for t in f.terms}
            if not vals <= self.Uset:
                return qbf.FALSE
            bind = so[f.setvar]
            return c.and_(bind.lit(u) if u in vals else -bind.lit(u) for u in self.U)
        if isinstance(f, (CardGeq, CardEq)):
            return self.ground(self._cached("expand", f, expand_sugar), fo, so, pol)
        raise TypeError(f"not a formula: {f!r}")

    # first-order quantifier chains are expanded with early pruning
    def _chain(self, f: Formula):
        def make(g):
            kind = type(g)
            names = []
            while isinstance(g, kind):
                names.append(g.var)
                g = g.body
            conj = _conjuncts(g) if kind is Ex1 else _negated_conjuncts(g)
            depth_of = {n: i for i, n in enumerate(names)}
            groups: list[list] = [[] for _ in range(len(names) + 1)]
            for h in conj:
                fo, _ = free_vars(h)
                d = max((depth_of[v] for v in fo if v in depth_of), default=-1)
                groups[d + 1].append(h)
            for gr in groups:
                gr.sort(key=size)
            return names, groups
        return self._cached("chain", f, make)

    def _ground_fo(self, f, fo, so, pol: int) -> int:
        names, groups = self._chain(f)
        inner_pol = pol if isinstance(f, Ex1) else -pol
        c = self.circ
        results: list[int] = []
        found_true = [False]
        env = dict(fo)
        for v in names:
            env.pop(v, None)

        def conj_lits(group, env_i, acc) -> Optional[list[int]]:
            for h in group:
                lit = self.ground(h, env_i, so, inner_pol)
                if lit == qbf.FALSE:
                    return None
                if lit != qbf.TRUE:
                    acc.append(lit)
            return acc

        def rec(i: int, env_i: dict, acc: list[int]):
            if found_true[0]:
                return
            if i == len(names):
                lit = c.and_(acc)
                if lit == qbf.TRUE:
                    found_true[0] = True
                results.append(lit)
                return
            v = names[i]
            for u in self._candidates(v, groups[i + 1], env_i):
                env2 = dict(env_i)
                env2[v] = u
                acc2 = conj_lits(groups[i + 1], env2, list(acc))
                if acc2 is not None:
                    rec(i + 1, env2, acc2)
                if found_true[0]:
                    return

        start = conj_lits(groups[0], env, [])
        if start is not None:
            rec(0, env, start)
        res = qbf.TRUE if found_true[0] else c.or_(results)
        return res if isinstance(f, Ex1) else -res

    def _candidates(self, v: str, group: list, env: Mapping[str, Index]) -> Iterable[Index]:
        """Values of ``v`` worth trying; solves ``v.w = t`` equations among the conjuncts."""
        for h in group:
            if not isinstance(h, Eq):
                continue
            for a, b in ((h.lhs, h.rhs), (h.rhs, h.lhs)):
                path: list[int] = []
                t = a
                while isinstance(t, Succ):
                    path.append(t.d)
                    t = t.term
                if isinstance(t, V) and t.name == v and term_vars(b) <= set(env):
                    val = _term_value(b, env)
                    suffix = tuple(reversed(path))
                    if len(val) >= len(suffix) and val[len(val) - len(suffix):] == suffix:
                        base = val[:len(val) - len(suffix)]
                        return (base,) if base in self.Uset else ()
                    return ()
        return self.U

    def _ground_so(self, f, fo, so, pol: int) -> int:
        if len(self.U) > self.cap:
            raise UniverseCapExceeded(f"universe of {len(self.U)} nodes exceeds the cap {self.cap}")
        def make(g):
            kind = type(g)
            names = []
            while isinstance(g, kind):
                names.append(g.var)
                g = g.body
            conj = _conjuncts(g) if kind is Ex2 else _negated_conjuncts(g)
            return names, sorted(conj, key=size)
        names, conj = self._cached("block", f, make)
        inner_pol = pol if isinstance(f, Ex2) else -pol
        c = self.circ
        block: list[int] = []
        binds: dict[str, _SetBind] = {}
        for n in names:
            lits = {}
            for u in self.U:
                v = c.var()
                lits[u] = v
                block.append(v)
                self.owner[v] = (n, u)
            binds[n] = _SetBind(lits)
        block_set = set(block)
        env_so = dict(so)
        env_so.update(binds)
        self._keep.extend(binds.values())
        parts: list[int] = []
        forced: dict[int, int] = {}
        body = None
        for h in conj:
            lit = self.ground(h, fo, env_so, inner_pol)
            if lit == qbf.FALSE:
                body = qbf.FALSE
                break
            parts.append(lit)
            units = [l for l in ((lit,) if c.is_var(lit) else c.and_children(lit))
                     if c.is_var(l) and abs(l) in block_set and abs(l) not in forced]
            if units:
                for l in units:
                    forced[abs(l)] = qbf.TRUE if l > 0 else qbf.FALSE
                env_so = dict(env_so)
                for n in names:
                    cur = env_so[n]
                    if any(abs(l) in forced for l in cur.lits.values() if abs(l) != qbf.TRUE):
                        new = _SetBind({u: forced.get(abs(l), l) if l > 0 else l for u, l in cur.lits.items()})
                        self._keep.append(new)
                        env_so[n] = new
        if body is None:
            body = c.and_(parts)
        res = c.q(block, body)
        if self.eager and abs(res) != qbf.TRUE and c.support(res) == frozenset():
            res = qbf.TRUE if qbf.decide(c, res) else qbf.FALSE
        return res if isinstance(f, Ex2) else -res


def _has_so_quant(f: Formula) -> bool:
    if isinstance(f, (Ex2, All2)):
        return True
    if isinstance(f, (And, Or)):
        return any(_has_so_quant(a) for a in f.args)
    if isinstance(f, Not):
        return _has_so_quant(f.arg)
    if isinstance(f, (Implies, Iff)):
        return _has_so_quant(f.lhs) or _has_so_quant(f.rhs)
    if isinstance(f, (Ex1, All1)):
        return _has_so_quant(f.body)
    return False


def _conjuncts(f: Formula) -> list:
    if isinstance(f, And):
        out = []
        for a in f.args:
            out += _conjuncts(a)
        return out
    if isinstance(f, Not):
        return _negated_conjuncts(f.arg)
    return [f]


def _negated_conjuncts(f: Formula) -> list:
    """Conjuncts whose conjunction is equivalent to ``not f``."""
    if isinstance(f, Or):
        out = []
        for a in f.args:
            out += _negated_conjuncts(a)
        return out
    if isinstance(f, Implies):
        return _conjuncts(f.lhs) + _negated_conjuncts(f.rhs)
    if isinstance(f, Not):
        return _conjuncts(f.arg)
    return [Not(f)]


# -- public evaluation API --------------------------------------------------


def eval_formula(f: Formula, nu: Valuation = Valuation(), universe: Iterable[Index] = ((),),
                 method: str = "ground", cap: int = DEFAULT_UNIVERSE_CAP, kappa: Optional[int] = None) -> bool:
    U = order_universe(universe)
    _check_valuation(f, nu, U, cap, kappa=kappa)
    if method == "enum":
        return _enum_eval(f, dict(nu.first), {k: frozenset(v) for k, v in nu.second.items()}, U)
    if method != "ground":
        raise ValueError(f"unknown method {method!r}")
    g = Grounder(U, cap)
    lit = g.ground(f, dict(nu.first), {k: _const_bind(v) for k, v in nu.second.items()})
    if abs(lit) != qbf.TRUE:
        lit = qbf.TRUE if qbf.decide(g.circ, lit) else qbf.FALSE
    return lit == qbf.TRUE


def _symbolic_setup(f: Formula, U: tuple[Index, ...], fixed: Valuation, cap: int, kappa: Optional[int]):
    fo, so = free_vars(f)
    free_so = sorted(so - set(fixed.second))
    _check_valuation(f, Valuation(fixed.first, fixed.second), U, cap, allow_free_so=free_so, kappa=kappa)
    g = Grounder(U, cap)
    binds = {k: _const_bind(v) for k, v in fixed.second.items()}
    var_of: dict[tuple[str, Index], int] = {}
    for name in free_so:
        lits = {}
        for u in U:
            v = g.circ.var()
            lits[u] = v
            var_of[(name, u)] = v
        binds[name] = _SetBind(lits)
    return g, binds, free_so, var_of, sorted(fo - set(fixed.first))


def _decode(free_so, var_of, U, model: dict[int, bool]) -> dict[str, frozenset]:
    return {n: frozenset(u for u in U if model.get(var_of[(n, u)], False)) for n in free_so}


def bounded_sat(f: Formula, universe: Iterable[Index], fixed: Valuation = Valuation(),
                cap: int = DEFAULT_UNIVERSE_CAP, kappa: Optional[int] = None) -> Optional[Valuation]:
    """A valuation of the free variables (extending ``fixed``) satisfying ``f`` over the universe."""
    U = order_universe(universe)
    g, binds, free_so, var_of, free_fo = _symbolic_setup(f, U, fixed, cap, kappa)
    for pick in itertools.product(U, repeat=len(free_fo)):
        fo_env = dict(fixed.first)
        fo_env.update(zip(free_fo, pick))
        lit = g.ground(f, fo_env, binds)
        matrix, prefix = g.circ.prenex(lit)
        model = qbf.QbfSolver(g.circ).solve(prefix, matrix)
        if model is not None:
            second = dict(fixed.second)
            second.update(_decode(free_so, var_of, U, model))
            return Valuation(fo_env, second)
    return None


def all_models(f: Formula, universe: Iterable[Index], fixed: Valuation = Valuation(),
               cap: int = DEFAULT_UNIVERSE_CAP, limit: Optional[int] = None,
               kappa: Optional[int] = None) -> list[dict[str, frozenset]]:
    """Every assignment of the free set variables not in ``fixed`` that satisfies ``f``."""
    U = order_universe(universe)
    g, binds, free_so, var_of, free_fo = _symbolic_setup(f, U, fixed, cap, kappa)
    if free_fo:
        raise UnboundVariable(f"first-order variables must be fixed: {', '.join(free_fo)}")
    c = g.circ
    lit = g.ground(f, dict(fixed.first), binds)
    matrix, prefix = c.prenex(lit)
    proj = [var_of[(n, u)] for n in free_so for u in U]
    prefix[0] = ("e", sorted(set(prefix[0][1]) | set(proj)))
    out = []
    solver = qbf.QbfSolver(c)
    while limit is None or len(out) < limit:
        model = solver.solve(prefix, matrix)
        if model is None:
            break
        out.append(_decode(free_so, var_of, U, model))
        matrix = c.and_((matrix, c.or_(-v if model.get(v, False) else v for v in proj)))
    return out


# -- variable families ------------------------------------------------------


def _ident(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", text)


def rule_family(q: Query) -> tuple[str, ...]:
    return tuple(f"R{i + 1}" for i in range(len(q.sid.rules)))


def state_family(q_or_states, prefix: str) -> dict[str, str]:
    states = q_or_states.signature.all_states if isinstance(q_or_states, Query) else q_or_states
    return {s: f"{prefix}q_{_ident(s)}" for s in states}


def _as_query(spec_or_query: Union[Spec, Query], sentence=None) -> Query:
    if isinstance(spec_or_query, Query):
        return spec_or_query
    if sentence is None:
        raise TypeError("a sentence is required when passing a Spec")
    return make_query(spec_or_query, sentence)


Family = Mapping[str, str]  # state -> set-variable name


class Builder:
    """Formula builders over one query SID; bound names come from a shared counter."""

    def __init__(self, q: Query):
        self.q = q
        self.sig = q.signature
        self.rules = q.sid.rules
        self.kappa = q.sid.kappa
        self.R = rule_family(q)
        self.states = tuple(self.sig.all_states)
        self.fresh = Fresh()

    def family(self, prefix: str) -> dict[str, str]:
        return state_family(self.states, prefix)

    def bound_family(self, prefix: str) -> dict[str, str]:
        return self.family(self.fresh(prefix))

    def _names(self, fam: Family) -> list[str]:
        return [fam[s] for s in self.states]

    # rewriting trees
    def rewrtree(self) -> Formula:
        R, P, k = self.R, len(self.R), self.kappa
        x = self.fresh("x")
        X = V(x)
        roots = self.q.root_rules
        disjoint = [Or((Not(Mem(R[i], X)), Not(Mem(R[j], X)))) for i in range(P) for j in range(i + 1, P)]
        at_root = Mem(R[roots[0]], X) if len(roots) == 1 else Or(tuple(Mem(R[i], X) for i in roots))
        root = Iff(at_root, Eq(X, EPS))
        c1 = All1(x, And(tuple(disjoint) + (root,)))
        x2 = self.fresh("x")
        c2 = All1(x2, And(tuple(Implies(Mem(R[i], Succ(V(x2), l)), Or(tuple(Mem(R[j], V(x2)) for j in range(P))))
                                for i in range(P) for l in range(1, k + 1))))
        x3 = self.fresh("x")
        c3 = []
        for i, r in enumerate(self.rules):
            for j, a in enumerate(r.pred_atoms, start=1):
                c3.append(Implies(Mem(R[i], V(x3)),
                                  Or(tuple(Mem(R[l], Succ(V(x3), j)) for l in self.q.sid.by_head.get(a.name, ())))))
        x4 = self.fresh("x")
        c4 = []
        for i, r in enumerate(self.rules):
            for j in range(r.npred + 1, k + 1):
                c4.append(Implies(Mem(R[i], V(x4)), And(tuple(Not(Mem(R[l], Succ(V(x4), j))) for l in range(P)))))
        return And((c1, c2, All1(x3, And(tuple(c3))), All1(x4, And(tuple(c4)))))

    # markings
    def mark(self, X: Family) -> Formula:
        x = self.fresh("x")
        xv = V(x)
        parts = []
        for ct in self.sig.components:
            qs = ct.states
            for i in range(len(qs)):
                for j in range(i + 1, len(qs)):
                    parts.append(Or((Not(Mem(X[qs[i]], xv)), Not(Mem(X[qs[j]], xv)))))
            inst = [i for i, r in enumerate(self.rules) if any(a.ctype == ct.name for a in r.comp_atoms)]
            parts.append(Iff(Or(tuple(Mem(X[s], xv) for s in qs)), Or(tuple(Mem(self.R[i], xv) for i in inst))))
        return All1(x, And(tuple(parts)))

    def path(self, rule: int, var: str, x: str, y: str) -> Formula:
        from .pathauto import path_formula
        return path_formula(self.q, rule, var, x, y, self.R, fresh=self.fresh)

    # transitions
    def psi(self, rule: int, atom_pos: int, X: Family, Xp: Family) -> Formula:
        r = self.rules[rule]
        a = r.inter_atoms[atom_pos]
        itype = self.sig.interaction(a.itype)
        k = len(a.args)
        ys = [self.fresh("y") for _ in range(k + 1)]
        parts: list[Formula] = [Mem(self.R[rule], V(ys[0]))]
        parts += [self.path(rule, a.args[i], ys[0], ys[i + 1]) for i in range(k)]
        choices = [self.sig.trans(port) for (_, port) in itype.ports]
        alts = []
        for moves in itertools.product(*choices):
            eqs = []
            for s in self.states:
                eqs.append(SetEq(X[s], tuple(V(ys[i + 1]) for i in range(k) if moves[i][0] == s)))
                eqs.append(SetEq(Xp[s], tuple(V(ys[i + 1]) for i in range(k) if moves[i][2] == s)))
            alts.append(And(tuple(eqs)))
        parts.append(Or(tuple(alts)))
        comps = [ct for (ct, _) in itype.ports]
        for i in range(k):
            for j in range(i + 1, k):
                if comps[i] == comps[j]:
                    parts.append(Not(Eq(V(ys[i + 1]), V(ys[j + 1]))))
        return exists1(ys, And(tuple(parts)))

    def flow(self, X: Family, Xp: Family) -> Formula:
        return Or(tuple(self.psi(i, p, X, Xp) for i, r in enumerate(self.rules) for p in range(len(r.inter_atoms))))

    # initial configurations and invariants
    def init(self, Y: Family) -> Formula:
        x = self.fresh("x")
        xv = V(x)
        parts = []
        for s in self.states:
            carriers = [i for i, r in enumerate(self.rules) if any(a.state == s for a in r.comp_atoms)]
            parts.append(Iff(Mem(Y[s], xv), Or(tuple(Mem(self.R[i], xv) for i in carriers))))
        return And((self.mark(Y), All1(x, And(tuple(parts)))))

    def intersects(self, A: Family, B: Family) -> Formula:
        alts = []
        for s in self.states:
            x = self.fresh("x")
            alts.append(Ex1(x, And((Mem(A[s], V(x)), Mem(B[s], V(x))))))
        return Or(tuple(alts))

    def single(self, A: Family, B: Family) -> Formula:
        """Exactly one place in the intersection of two marking families."""
        alts = []
        for s in self.states:
            x = self.fresh("x")
            rest = []
            for s2 in self.states:
                z = self.fresh("x")
                both = And((Mem(A[s2], V(z)), Mem(B[s2], V(z))))
                rest.append(All1(z, Implies(both, Eq(V(z), V(x)))) if s2 == s else All1(z, Not(both)))
            alts.append(Ex1(x, And((Mem(A[s], V(x)), Mem(B[s], V(x))) + tuple(rest))))
        return Or(tuple(alts))

    def subset(self, A: Family, B: Family) -> Formula:
        x = self.fresh("x")
        return All1(x, And(tuple(Implies(Mem(A[s], V(x)), Mem(B[s], V(x))) for s in self.states)))

    def theta(self, X: Family) -> Formula:
        Y, Z = self.bound_family("Y"), self.bound_family("Z")
        body = Implies(self.flow(Y, Z), Implies(self.intersects(X, Y), self.intersects(X, Z)))
        return forall2(self._names(Y) + self._names(Z), body)

    def Theta(self, X: Family, Y: Family) -> Formula:
        Z = self.bound_family("Z")
        body = Implies(And((self.intersects(Y, Z), self.theta(Z))), self.intersects(X, Z))
        return And((self.mark(X), forall2(self._names(Z), body)))

    def omega(self, X: Family) -> Formula:
        Y, Z = self.bound_family("Y"), self.bound_family("Z")
        inv = And((Iff(Not(self.intersects(X, Y)), Not(self.intersects(X, Z))),
                   Iff(self.single(X, Y), self.single(X, Z))))
        return forall2(self._names(Y) + self._names(Z), Implies(self.flow(Y, Z), inv))

    def Omega(self, X: Family, Y: Family) -> Formula:
        Z = self.bound_family("Z")
        body = Implies(And((self.single(Y, Z), self.omega(Z))), self.single(X, Z))
        return And((self.mark(X), forall2(self._names(Z), body)))

    def deadlock(self, X: Family) -> Formula:
        Y, Z = self.bound_family("Y"), self.bound_family("Z")
        return forall2(self._names(Y) + self._names(Z), Implies(self.flow(Y, Z), Not(self.subset(Y, X))))

    def errset(self, X: Family, states: Sequence[str]) -> Formula:
        known = set(self.states)
        for s in states:
            if s not in known:
                raise UnknownState(f"unknown state {s!r}")
        need = Counter(states)
        return And(tuple(CardGeq(X[s], need[s]) for s in self.states if need[s]))

    def deadlock_vc(self) -> Formula:
        X, Y = self.family("X"), self.family("Y")
        return And((self.deadlock(X), self.Theta(X, Y), self.Omega(X, Y), self.init(Y), self.rewrtree()))

    def reach_vc(self, states: Sequence[str]) -> Formula:
        X, Y = self.family("X"), self.family("Y")
        return And((self.errset(X, states), self.Theta(X, Y), self.Omega(X, Y), self.init(Y), self.rewrtree()))


def rewrtree_formula(spec_or_query, sentence=None) -> Formula:
    return Builder(_as_query(spec_or_query, sentence)).rewrtree()


def mark_formula(spec_or_query, sentence=None, prefix: str = "X") -> Formula:
    b = Builder(_as_query(spec_or_query, sentence))
    return b.mark(b.family(prefix))


def flow_formula(spec_or_query, sentence=None, pre: str = "Y", post: str = "Z") -> Formula:
    b = Builder(_as_query(spec_or_query, sentence))
    return b.flow(b.family(pre), b.family(post))


def init_formula(spec_or_query, sentence=None, prefix: str = "Y") -> Formula:
    b = Builder(_as_query(spec_or_query, sentence))
    return b.init(b.family(prefix))


def trap_formulas(spec_or_query, sentence=None) -> tuple[Formula, Formula]:
    """(theta over X, Theta over X and the initial marking Y)."""
    b = Builder(_as_query(spec_or_query, sentence))
    return b.theta(b.family("X")), b.Theta(b.family("X"), b.family("Y"))


def mutex_formulas(spec_or_query, sentence=None) -> tuple[Formula, Formula]:
    b = Builder(_as_query(spec_or_query, sentence))
    return b.omega(b.family("X")), b.Omega(b.family("X"), b.family("Y"))


def deadlock_vc(spec_or_query, sentence=None) -> Formula:
    return Builder(_as_query(spec_or_query, sentence)).deadlock_vc()


def reach_vc(spec_or_query, sentence=None, states: Sequence[str] = ()) -> Formula:
    return Builder(_as_query(spec_or_query, sentence)).reach_vc(states)


# -- valuations induced by trees and markings -------------------------------


def tree_valuation(tree, q: Query) -> dict[str, frozenset]:
    """Rule-set values ``R_i`` of a rewriting tree."""
    R = rule_family(q)
    out = {name: set() for name in R}
    for node, ri in tree.labels:
        out[R[ri]].add(node)
    return {k: frozenset(v) for k, v in out.items()}


def marking_valuation(marking: Iterable, fam: Family) -> dict[str, frozenset]:
    out = {name: set() for name in fam.values()}
    for (state, u) in marking:
        out[fam[state]].add(u)
    return {k: frozenset(v) for k, v in out.items()}


def valuation_marking(values: Mapping[str, frozenset], fam: Family) -> frozenset:
    return frozenset((s, u) for s, name in fam.items() for u in values.get(name, ()))


# -- external solver export -------------------------------------------------


_MONA_HEADER_FCNS = """# Encoding of {k} successors in two: child d of node v is v.0 followed by d-1 steps .1
# (first-child / next-sibling).  A node is valid when the path from the root never takes
# .1 at the root and never takes {k} or more consecutive .1 steps after a .0 step.
# Every quantifier is relativised to valid nodes.
"""


def _mona_term(t: Term, fcns: bool) -> str:
    suffix: list[int] = []
    while isinstance(t, Succ):
        suffix.append(t.d)
        t = t.term
    base = "root" if isinstance(t, Eps) else t.name
    steps = []
    for d in reversed(suffix):
        steps.extend([0] + [1] * (d - 1) if fcns else [d - 1])
    return base + "".join(f".{s}" for s in steps)


def _mona(f: Formula, fcns: bool) -> str:
    m = lambda g: _mona(g, fcns)  # noqa: E731
    if isinstance(f, Eq):
        return f"({_mona_term(f.lhs, fcns)} = {_mona_term(f.rhs, fcns)})"
    if isinstance(f, Mem):
        return f"({_mona_term(f.term, fcns)} in {f.setvar})"
    if isinstance(f, And):
        return "true" if not f.args else "(" + " & ".join(m(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "false" if not f.args else "(" + " | ".join(m(a) for a in f.args) + ")"
    if isinstance(f, Not):
        return f"(~{m(f.arg)})"
    if isinstance(f, Implies):
        return f"({m(f.lhs)} => {m(f.rhs)})"
    if isinstance(f, Iff):
        return f"({m(f.lhs)} <=> {m(f.rhs)})"
    if isinstance(f, Ex1):
        body = f"(valid({f.var}) & {m(f.body)})" if fcns else m(f.body)
        return f"(ex1 {f.var}: {body})"
    if isinstance(f, All1):
        body = f"(valid({f.var}) => {m(f.body)})" if fcns else m(f.body)
        return f"(all1 {f.var}: {body})"
    if isinstance(f, Ex2):
        body = f"(validset({f.var}) & {m(f.body)})" if fcns else m(f.body)
        return f"(ex2 {f.var}: {body})"
    if isinstance(f, All2):
        body = f"(validset({f.var}) => {m(f.body)})" if fcns else m(f.body)
        return f"(all2 {f.var}: {body})"
    return m(expand_sugar(f)) if isinstance(f, (CardGeq, CardEq)) else m(_expand_set_eq_named(f))


def _expand_set_eq_named(f: SetEq) -> Formula:
    avoid = set()
    for t in f.terms:
        avoid |= term_vars(t)
    x = "s_"
    while x in avoid:
        x += "_"
    return All1(x, Iff(Mem(f.setvar, V(x)), Or(tuple(Eq(V(x), t) for t in f.terms))))


def _deterministic_card(f: Formula) -> Formula:
    """Card sugar with stable bound names, for byte-stable exports."""
    if isinstance(f, CardGeq):
        ys = [f"c{i}_" for i in range(1, f.n + 1)]
        distinct = [Not(Eq(V(ys[i]), V(ys[j]))) for i in range(f.n) for j in range(i + 1, f.n)]
        return exists1(ys, And(tuple(distinct) + tuple(Mem(f.setvar, V(y)) for y in ys)))
    if isinstance(f, CardEq):
        return And((_deterministic_card(CardGeq(f.setvar, f.n)), Not(_deterministic_card(CardGeq(f.setvar, f.n + 1)))))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_deterministic_card(a) for a in f.args))
    if isinstance(f, Not):
        return Not(_deterministic_card(f.arg))
    if isinstance(f, (Implies, Iff)):
        return type(f)(_deterministic_card(f.lhs), _deterministic_card(f.rhs))
    if isinstance(f, (Ex1, All1, Ex2, All2)):
        return type(f)(f.var, _deterministic_card(f.body))
    return f


def export_solver(f: Formula, kappa: int, title: str = "") -> str:
    """Solver source text (ws2s dialect); more than two successors use the FCNS encoding."""
    f = _deterministic_card(f)
    fo, so = free_vars(f)
    fcns = kappa > 2
    lines = []
    if title:
        lines.append(f"# {title}")
    lines.append(f"# successors: {kappa}")
    if fcns:
        lines.append(_MONA_HEADER_FCNS.format(k=kappa).rstrip("\n"))
    lines.append("ws2s;")
    if fcns:
        ones = "".join(".1" for _ in range(kappa))
        lines.append("pred anc(var1 x, var1 y) = all2 S: ((y in S & (all1 z: ((z.0 in S | z.1 in S) => z in S)))"
                     " => x in S);")
        lines.append(f"pred valid(var1 x) = ~anc(root.1, x) & ~(ex1 y: anc(y.0{ones}, x));")
        lines.append("pred validset(var2 X) = all1 x: (x in X => valid(x));")
    if fo:
        lines.append("var1 " + ", ".join(sorted(fo)) + ";")
    if so:
        lines.append("var2 " + ", ".join(_natural_sorted(so)) + ";")
    body = _mona(f, fcns)
    if fcns:
        guards = [f"valid({x})" for x in sorted(fo)] + [f"validset({X})" for X in _natural_sorted(so)]
        if guards:
            body = "(" + " & ".join(guards) + f" & {body})"
    lines.append(body + ";")
    return "\n".join(lines) + "\n"


def _natural_sorted(names: Iterable[str]) -> list[str]:
    return sorted(names, key=lambda s: [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)])


# -- grammar check for the emitted subset ------------------------------------

_TOK = re.compile(r"\s*(=>|<=>|ex1|ex2|all1|all2|var1|var2|pred|ws2s|true|false|root|in|[A-Za-z_][A-Za-z0-9_]*|"
                  r"\.[01]|[();:,=&|~])")


class MonaSyntaxError(InputError):
    pass


def check_solver_syntax(text: str) -> int:
    """Parses the emitted dialect; returns the number of top-level declarations."""
    src = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    toks: list[str] = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOK.match(src, pos)
        if not m:
            raise MonaSyntaxError(f"unexpected character at offset {pos}: {src[pos:pos + 20]!r}")
        toks.append(m.group(1))
        pos = m.end()
    p = _MonaParser(toks)
    return p.program()


class _MonaParser:
    KEYWORDS = {"ex1", "ex2", "all1", "all2", "var1", "var2", "pred", "ws2s", "true", "false", "root", "in"}

    def __init__(self, toks: list[str]):
        self.toks = toks
        self.i = 0
        self.preds: dict[str, list[str]] = {}

    def peek(self) -> Optional[str]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected: Optional[str] = None) -> str:
        t = self.peek()
        if t is None or (expected is not None and t != expected):
            raise MonaSyntaxError(f"expected {expected or 'token'} but found {t!r} at token {self.i}")
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.take()
        if t in self.KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", t):
            raise MonaSyntaxError(f"expected identifier, found {t!r}")
        return t

    def program(self) -> int:
        self.take("ws2s")
        self.take(";")
        count = 0
        while self.peek() is not None:
            t = self.peek()
            if t == "pred":
                self.take()
                name = self.ident()
                self.take("(")
                kinds = []
                while True:
                    kinds.append(self.take())
                    if kinds[-1] not in ("var1", "var2"):
                        raise MonaSyntaxError("parameter kind must be var1 or var2")
                    self.ident()
                    if self.peek() == ",":
                        self.take()
                        continue
                    break
                self.take(")")
                self.take("=")
                self.preds[name] = kinds
                self.formula()
            elif t in ("var1", "var2"):
                self.take()
                self.ident()
                while self.peek() == ",":
                    self.take()
                    self.ident()
            else:
                self.formula()
            self.take(";")
            count += 1
        return count

    def formula(self) -> None:
        self.implication()

    def implication(self) -> None:
        self.disjunction()
        while self.peek() in ("=>", "<=>"):
            self.take()
            self.disjunction()

    def disjunction(self) -> None:
        self.conjunction()
        while self.peek() == "|":
            self.take()
            self.conjunction()

    def conjunction(self) -> None:
        self.unary()
        while self.peek() == "&":
            self.take()
            self.unary()

    def unary(self) -> None:
        t = self.peek()
        if t == "~":
            self.take()
            self.unary()
        elif t in ("ex1", "ex2", "all1", "all2"):
            self.take()
            self.ident()
            while self.peek() == ",":
                self.take()
                self.ident()
            self.take(":")
            self.formula()
        elif t in ("true", "false"):
            self.take()
        elif t == "(":
            self.take()
            self.formula()
            self.take(")")
        elif t is not None and t in self.preds:
            self.take()
            self.take("(")
            for k, kind in enumerate(self.preds[t]):
                if k:
                    self.take(",")
                if kind == "var1":
                    self.term()
                else:
                    self.ident()
            self.take(")")
        else:
            self.term()
            op = self.take()
            if op == "=":
                self.term()
            elif op == "in":
                self.ident()
            else:
                raise MonaSyntaxError(f"expected '=' or 'in', found {op!r}")

    def term(self) -> None:
        t = self.take()
        if t != "root" and (t in self.KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", t)):
            raise MonaSyntaxError(f"expected a term, found {t!r}")
        while self.peek() in (".0", ".1"):
            self.take()
