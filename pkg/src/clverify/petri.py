"""Petri-net semantics of an architecture, explicit exploration and structural invariants."""

from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

from .errors import CapExceeded, NotEnabled
from .model import Architecture, Index, Place, Signature, index_to_str, place_to_str

logger = logging.getLogger(__name__)

DEFAULT_BFS_CAP = 10 ** 6
DEFAULT_MUTEX_PLACE_CAP = 24
DEFAULT_PRODUCT_CAP = 10 ** 6


@dataclass(frozen=True, order=True)
class TransitionId:
    itype: str
    indices: tuple[Index, ...]
    moves: tuple[tuple[str, str, str], ...]  # one component transition per position

    def __str__(self) -> str:
        return f"{self.itype}[{', '.join(index_to_str(u) for u in self.indices)}]"


@dataclass(frozen=True, eq=False)
class PetriNet:
    places: tuple[Place, ...]
    transitions: tuple[TransitionId, ...]
    pre: dict = field(repr=False)
    post: dict = field(repr=False)

    @cached_property
    def place_set(self) -> frozenset:
        return frozenset(self.places)

    @cached_property
    def producers(self) -> dict[Place, tuple[TransitionId, ...]]:
        table: dict[Place, list] = {p: [] for p in self.places}
        for t in self.transitions:
            for p in self.post[t]:
                table[p].append(t)
        return {p: tuple(ts) for p, ts in table.items()}

    @cached_property
    def consumers(self) -> dict[Place, tuple[TransitionId, ...]]:
        table: dict[Place, list] = {p: [] for p in self.places}
        for t in self.transitions:
            for p in self.pre[t]:
                table[p].append(t)
        return {p: tuple(ts) for p, ts in table.items()}

    def to_json(self) -> dict:
        def pl(p):
            return [p[0], index_to_str(p[1])]
        return {
            "places": [pl(p) for p in self.places],
            "transitions": [{"type": t.itype, "tuple": [index_to_str(u) for u in t.indices],
                             "pre": [pl(p) for p in sorted(self.pre[t])],
                             "post": [pl(p) for p in sorted(self.post[t])]} for t in self.transitions],
        }


def build_net(sig: Signature, arch: Architecture) -> PetriNet:
    places = sorted((q, u) for ct, us in arch.components.items() for u in us
                    for q in sig.component(ct).states)
    place_set = set(places)
    transitions = []
    pre, post = {}, {}
    for itype in sorted(arch.interactions):
        ports = sig.interaction(itype).ports
        for tup in sorted(arch.tuples(itype)):
            if any(tup[i] == tup[j] and ports[i][0] == ports[j][0]
                   for i in range(len(tup)) for j in range(i + 1, len(tup))):
                continue
            choices = [sig.trans(port) for (_, port) in ports]
            for moves in itertools.product(*choices):
                pre_t = frozenset((m[0], u) for m, u in zip(moves, tup))
                post_t = frozenset((m[2], u) for m, u in zip(moves, tup))
                if not (pre_t | post_t) <= place_set:
                    continue  # dangling endpoint: the interaction can never fire
                t = TransitionId(itype, tup, tuple(moves))
                transitions.append(t)
                pre[t] = pre_t
                post[t] = post_t
    transitions.sort()
    return PetriNet(tuple(places), tuple(transitions), pre, post)


def enabled(net: PetriNet, m: frozenset) -> list[TransitionId]:
    return [t for t in net.transitions if net.pre[t] <= m]


def fire(net: PetriNet, m: frozenset, t: TransitionId) -> frozenset:
    if not net.pre[t] <= m:
        raise NotEnabled(f"{t} is not enabled")
    return (m - net.pre[t]) | net.post[t]


def is_deadlock(net: PetriNet, m: frozenset) -> bool:
    return not any(net.pre[t] <= m for t in net.transitions)


@dataclass(frozen=True)
class ReachResult:
    markings: frozenset
    exhausted: bool
    parents: dict = field(repr=False, default_factory=dict)

    def path_to(self, m: frozenset) -> list[TransitionId]:
        seq = []
        while True:
            step = self.parents.get(m)
            if step is None:
                break
            prev, t = step
            seq.append(t)
            m = prev
        return list(reversed(seq))


def reach_set(net: PetriNet, m0: frozenset, cap: int = DEFAULT_BFS_CAP) -> ReachResult:
    m0 = frozenset(m0)
    seen = {m0}
    parents: dict = {}
    queue = deque([m0])
    exhausted = False
    while queue:
        m = queue.popleft()
        for t in enabled(net, m):
            m2 = (m - net.pre[t]) | net.post[t]
            if m2 not in seen:
                if len(seen) >= cap:
                    exhausted = True
                    queue.clear()
                    break
                seen.add(m2)
                parents[m2] = (m, t)
                queue.append(m2)
    return ReachResult(frozenset(seen), exhausted, parents)


def is_precise(sig: Signature, arch: Architecture, m: Iterable[Place]) -> bool:
    m = set(m)
    covered = set()
    for ct, us in arch.components.items():
        states = sig.component(ct).states
        for u in us:
            marked = [q for q in states if (q, u) in m]
            if len(marked) != 1:
                return False
            covered.add((marked[0], u))
    return covered == m


def precise_markings(sig: Signature, arch: Architecture, cap: int = DEFAULT_PRODUCT_CAP):
    """Every precise marking of ``arch``, in a deterministic order."""
    slots = [(u, sig.component(ct).states) for ct, us in sorted(arch.components.items()) for u in sorted(us)]
    total = 1
    for _, states in slots:
        total *= len(states)
        if total > cap:
            raise CapExceeded(f"more than {cap} precise markings")
    for pick in itertools.product(*[states for _, states in slots]):
        yield frozenset((q, u) for (u, _), q in zip(slots, pick))


# -- structural invariants --------------------------------------------------


def is_trap(net: PetriNet, sigma: frozenset, m0: Optional[frozenset] = None) -> bool:
    if m0 is not None and not (sigma & m0):
        return False
    return all(not (sigma & net.pre[t]) or (sigma & net.post[t]) for t in net.transitions)


def is_mutex(net: PetriNet, sigma: frozenset, m0: frozenset) -> bool:
    if len(sigma & m0) != 1:
        return False
    for t in net.transitions:
        a, b = len(sigma & net.pre[t]), len(sigma & net.post[t])
        if a != b or a > 1:
            return False
    return True


def max_trap_within(net: PetriNet, allowed: Iterable[Place]) -> frozenset:
    """Largest set inside ``allowed`` closed under the trap condition (greatest fixpoint)."""
    sigma = set(allowed) & net.place_set
    work = deque(net.transitions)
    queued = set(net.transitions)
    while work:
        t = work.popleft()
        queued.discard(t)
        hit = sigma & net.pre[t]
        if hit and not (sigma & net.post[t]):
            sigma -= hit
            for p in hit:
                # transitions producing into removed places may now violate the condition
                for t2 in net.producers[p]:
                    if t2 not in queued:
                        queued.add(t2)
                        work.append(t2)
    return frozenset(sigma)


def violates_trap_invariant(net: PetriNet, m0: frozenset, m: frozenset) -> Optional[frozenset]:
    """A trap marked initially but empty in ``m``, or ``None`` when ``m`` meets every such trap."""
    sigma = max_trap_within(net, net.place_set - m)
    return sigma if sigma & m0 else None


def enumerate_mutexes(net: PetriNet, m0: frozenset, place_cap: int = DEFAULT_MUTEX_PLACE_CAP) -> list[frozenset]:
    if len(net.places) > place_cap:
        raise CapExceeded(f"{len(net.places)} places exceed the mutex cap {place_cap}")
    m0 = frozenset(m0)
    if not m0:
        return []
    places = list(net.places)
    pos = {p: i for i, p in enumerate(places)}
    touching: list[list[tuple[int, bool]]] = [[] for _ in places]  # (transition slot, is_pre)
    tlist = list(net.transitions)
    for ti, t in enumerate(tlist):
        for p in net.pre[t]:
            touching[pos[p]].append((ti, True))
        for p in net.post[t]:
            touching[pos[p]].append((ti, False))
    # remaining undecided places per transition side, to prune unreachable balances
    remaining_pre = [len(net.pre[t]) for t in tlist]
    remaining_post = [len(net.post[t]) for t in tlist]
    cnt_pre = [0] * len(tlist)
    cnt_post = [0] * len(tlist)
    out: list[frozenset] = []
    chosen: list[Place] = []
    init_hits = [0]

    def feasible(ti: int) -> bool:
        a, b = cnt_pre[ti], cnt_post[ti]
        if a > 1 or b > 1:
            return False
        if a > b + remaining_post[ti] or b > a + remaining_pre[ti]:
            return False
        return True

    def rec(i: int):
        if i == len(places):
            if init_hits[0] == 1:
                out.append(frozenset(chosen))
            return
        p = places[i]
        for include in (True, False):
            if include and p in m0 and init_hits[0] >= 1:
                continue
            if not include and p in m0 and init_hits[0] == 0 and not any(q in m0 for q in places[i + 1:]):
                continue
            for ti, is_pre in touching[i]:
                if is_pre:
                    remaining_pre[ti] -= 1
                    cnt_pre[ti] += include
                else:
                    remaining_post[ti] -= 1
                    cnt_post[ti] += include
            ok = all(feasible(ti) for ti, _ in touching[i])
            if ok:
                if include:
                    chosen.append(p)
                    init_hits[0] += p in m0
                rec(i + 1)
                if include:
                    chosen.pop()
                    init_hits[0] -= p in m0
            for ti, is_pre in touching[i]:
                if is_pre:
                    remaining_pre[ti] += 1
                    cnt_pre[ti] -= include
                else:
                    remaining_post[ti] += 1
                    cnt_post[ti] -= include

    rec(0)
    for sigma in out:
        assert is_mutex(net, sigma, m0), sigma
    return out


@dataclass(frozen=True)
class InvariantOptions:
    use_mutexes: bool = True
    place_cap: int = DEFAULT_MUTEX_PLACE_CAP
    fallback_to_traps: bool = True


@dataclass(frozen=True)
class InvariantResult:
    holds: bool
    trap: Optional[frozenset] = None
    mutex: Optional[frozenset] = None
    mutexes_skipped: bool = False


class InvariantChecker:
    """Caches the mutex list of one (net, initial marking) pair across many membership queries."""

    def __init__(self, net: PetriNet, m0: frozenset, opts: InvariantOptions = InvariantOptions()):
        self.net = net
        self.m0 = frozenset(m0)
        self.opts = opts
        self.mutexes: list[frozenset] = []
        self.mutexes_skipped = not opts.use_mutexes
        if opts.use_mutexes:
            try:
                self.mutexes = enumerate_mutexes(net, self.m0, opts.place_cap)
            except CapExceeded:
                if not opts.fallback_to_traps:
                    raise
                logger.info("mutex enumeration capped out; using traps only")
                self.mutexes_skipped = True

    def check(self, m: frozenset) -> InvariantResult:
        trap = violates_trap_invariant(self.net, self.m0, m)
        if trap is not None:
            return InvariantResult(False, trap=trap, mutexes_skipped=self.mutexes_skipped)
        for sigma in self.mutexes:
            if len(sigma & m) != 1:
                return InvariantResult(False, mutex=sigma, mutexes_skipped=self.mutexes_skipped)
        return InvariantResult(True, mutexes_skipped=self.mutexes_skipped)


def in_invariants(net: PetriNet, m0: frozenset, m: frozenset,
                  opts: InvariantOptions = InvariantOptions()) -> InvariantResult:
    return InvariantChecker(net, m0, opts).check(frozenset(m))


def format_marking(m: Iterable[Place]) -> str:
    return "{" + ", ".join(place_to_str(p) for p in sorted(m, key=lambda p: (p[1], p[0]))) + "}"
