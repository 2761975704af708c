"""Signatures, architectures, configurations and the renaming algebra over them.

Indices are integer sequences everywhere: ``()`` is the root/empty sequence and
``(1, 2)`` is written ``"1.2"`` in external documents (``"eps"`` for the root).
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

from .errors import DisjointnessError, InputError, TightnessError

logger = logging.getLogger(__name__)

Index = tuple[int, ...]
Place = tuple[str, Index]
Transition = tuple[str, str, str]
Marking = frozenset  # frozenset[Place]

EPS: Index = ()


def index_to_str(u: Index) -> str:
    return "eps" if not u else ".".join(str(d) for d in u)


def index_from_str(text: str) -> Index:
    text = text.strip()
    if text in ("eps", "", "ε"):
        return ()
    try:
        path = tuple(int(part) for part in text.split("."))
    except ValueError as exc:
        raise InputError(f"bad index {text!r}") from exc
    if any(d < 1 for d in path):
        raise InputError(f"index digits must be >= 1: {text!r}")
    return path


def place_to_str(p: Place) -> str:
    return f"{p[0]}[{index_to_str(p[1])}]"


# -- signatures -------------------------------------------------------------


@dataclass(frozen=True)
class ComponentType:
    name: str
    ports: tuple[str, ...]
    states: tuple[str, ...]
    transitions: tuple[Transition, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(tuple(t) for t in self.transitions))


@dataclass(frozen=True)
class InteractionType:
    name: str
    ports: tuple[tuple[str, str], ...]  # (component type, port) per position

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(tuple(p) for p in self.ports))

    @property
    def arity(self) -> int:
        return len(self.ports)


@dataclass(frozen=True)
class Signature:
    """Component types (with their behaviors) and interaction types."""

    components: tuple[ComponentType, ...]
    interactions: tuple[InteractionType, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "interactions", tuple(self.interactions))

    @cached_property
    def _components_by_name(self) -> dict[str, ComponentType]:
        return {c.name: c for c in self.components}

    @cached_property
    def _interactions_by_name(self) -> dict[str, InteractionType]:
        return {i.name: i for i in self.interactions}

    @cached_property
    def _port_owner(self) -> dict[str, str]:
        owners: dict[str, str] = {}
        for c in self.components:
            for p in c.ports:
                owners.setdefault(p, c.name)
        return owners

    @cached_property
    def _state_owner(self) -> dict[str, str]:
        owners: dict[str, str] = {}
        for c in self.components:
            for q in c.states:
                owners.setdefault(q, c.name)
        return owners

    @cached_property
    def _trans_by_port(self) -> dict[str, tuple[Transition, ...]]:
        table: dict[str, list[Transition]] = defaultdict(list)
        for c in self.components:
            for t in c.transitions:
                table[t[1]].append(t)
        return {p: tuple(ts) for p, ts in table.items()}

    def component(self, name: str) -> ComponentType:
        return self._components_by_name[name]

    def interaction(self, name: str) -> InteractionType:
        return self._interactions_by_name[name]

    def has_component(self, name: str) -> bool:
        return name in self._components_by_name

    def has_interaction(self, name: str) -> bool:
        return name in self._interactions_by_name

    def port_owner(self, port: str) -> str:
        return self._port_owner[port]

    def state_owner(self, state: str) -> str:
        return self._state_owner[state]

    def trans(self, port: str) -> tuple[Transition, ...]:
        return self._trans_by_port.get(port, ())

    def position_type(self, itype: str, k: int) -> str:
        """Component type owning the port at 0-based position ``k`` of ``itype``."""
        return self.interaction(itype).ports[k][0]

    @cached_property
    def all_states(self) -> tuple[str, ...]:
        return tuple(q for c in self.components for q in c.states)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    location: str = ""
    severity: str = "error"

    def __str__(self) -> str:
        where = f" [{self.location}]" if self.location else ""
        return f"{self.severity}: {self.code}: {self.message}{where}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    def __add__(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.issues + other.issues)

    def __len__(self) -> int:
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)


def validate_signature(sig: Signature) -> ValidationReport:
    issues: list[ValidationIssue] = []
    seen_ports: dict[str, str] = {}
    seen_states: dict[str, str] = {}
    seen_names: set[str] = set()
    for c in sig.components:
        if c.name in seen_names:
            issues.append(ValidationIssue("duplicate-name", f"type {c.name} declared twice", c.name))
        seen_names.add(c.name)
        for p in c.ports:
            if p in seen_ports:
                issues.append(ValidationIssue(
                    "port-uniqueness", f"port {p} declared by both {seen_ports[p]} and {c.name}", c.name))
            else:
                seen_ports[p] = c.name
        for q in c.states:
            if q in seen_states:
                issues.append(ValidationIssue(
                    "state-disjointness", f"state {q} declared by both {seen_states[q]} and {c.name}", c.name))
            else:
                seen_states[q] = c.name
        for (q, p, q2) in c.transitions:
            for s in (q, q2):
                if s not in c.states:
                    issues.append(ValidationIssue(
                        "undeclared-state", f"transition {q} -{p}-> {q2} uses unknown state {s}", c.name))
            if p not in c.ports:
                issues.append(ValidationIssue(
                    "undeclared-port", f"transition {q} -{p}-> {q2} uses unknown port {p}", c.name))
        labelled = {p for (_, p, _) in c.transitions}
        for p in c.ports:
            if p not in labelled:
                issues.append(ValidationIssue(
                    "unused-port", f"port {p} labels no transition", c.name, severity="warning"))
    for i in sig.interactions:
        if i.name in seen_names:
            issues.append(ValidationIssue("duplicate-name", f"name {i.name} declared twice", i.name))
        seen_names.add(i.name)
        if not i.ports:
            issues.append(ValidationIssue("empty-interaction", "interaction has no ports", i.name))
        for (cname, p) in i.ports:
            comp = next((c for c in sig.components if c.name == cname), None)
            if comp is None:
                issues.append(ValidationIssue(
                    "port-resolution", f"unknown component type {cname}", i.name))
            elif p not in comp.ports:
                issues.append(ValidationIssue(
                    "port-resolution", f"{cname} has no port {p}", i.name))
    return ValidationReport(tuple(issues))


# -- architectures and configurations ---------------------------------------


def _freeze_map(m: Mapping) -> Mapping:
    items = {k: frozenset(v) for k, v in m.items() if v}
    return MappingProxyType(dict(sorted(items.items())))


@dataclass(frozen=True)
class Architecture:
    components: Mapping[str, frozenset[Index]] = field(default_factory=dict)
    interactions: Mapping[str, frozenset[tuple[Index, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "components", _freeze_map(self.components))
        object.__setattr__(self, "interactions", _freeze_map(self.interactions))

    def __eq__(self, other):
        if not isinstance(other, Architecture):
            return NotImplemented
        return dict(self.components) == dict(other.components) and \
            dict(self.interactions) == dict(other.interactions)

    def __hash__(self):
        return hash((tuple(self.components.items()), tuple(self.interactions.items())))

    def instances(self, ctype: str) -> frozenset[Index]:
        return self.components.get(ctype, frozenset())

    def tuples(self, itype: str) -> frozenset[tuple[Index, ...]]:
        return self.interactions.get(itype, frozenset())

    def size(self) -> int:
        return sum(len(v) for v in self.components.values())


@dataclass(frozen=True)
class Configuration:
    architecture: Architecture
    marking: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "marking", frozenset(self.marking))


def compose(c1: Configuration, c2: Configuration) -> Configuration:
    a1, a2 = c1.architecture, c2.architecture
    comps: dict[str, set[Index]] = {}
    for ctype in set(a1.components) | set(a2.components):
        s1, s2 = a1.instances(ctype), a2.instances(ctype)
        common = s1 & s2
        if common:
            raise DisjointnessError(ctype, min(common))
        comps[ctype] = s1 | s2
    inters: dict[str, set] = {}
    for itype in set(a1.interactions) | set(a2.interactions):
        s1, s2 = a1.tuples(itype), a2.tuples(itype)
        common = s1 & s2
        if common:
            raise DisjointnessError(itype, min(common))
        inters[itype] = s1 | s2
    return Configuration(Architecture(comps, inters), c1.marking | c2.marking)


def is_tight_architecture(arch: Architecture, sig: Signature) -> tuple[bool, Optional[tuple]]:
    """Return ``(True, None)`` or ``(False, (itype, tuple, position))`` for the first dangling endpoint.

    Positions in the witness are 1-based.
    """
    for itype, tuples in arch.interactions.items():
        ports = sig.interaction(itype).ports
        for tup in sorted(tuples):
            for k, u in enumerate(tup):
                if u not in arch.instances(ports[k][0]):
                    return False, (itype, tup, k + 1)
    return True, None


# -- renamings --------------------------------------------------------------


@dataclass(frozen=True)
class TypedRenaming:
    """One finite injective map per component type, identity outside its domain."""

    per_type: Mapping[str, Mapping[Index, Index]] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {k: MappingProxyType(dict(v)) for k, v in self.per_type.items()}
        object.__setattr__(self, "per_type", MappingProxyType(dict(sorted(frozen.items()))))

    def __eq__(self, other):
        if not isinstance(other, TypedRenaming):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self):
        return hash(tuple(sorted((k, tuple(sorted(v.items()))) for k, v in self._canonical().items())))

    def _canonical(self) -> dict:
        out = {}
        for k, v in self.per_type.items():
            nontrivial = {a: b for a, b in v.items() if a != b}
            if nontrivial:
                out[k] = nontrivial
        return out

    def apply(self, ctype: str, u: Index) -> Index:
        m = self.per_type.get(ctype)
        return m.get(u, u) if m is not None else u

    def inverse(self) -> "TypedRenaming":
        return TypedRenaming({k: {b: a for a, b in v.items()} for k, v in self.per_type.items()})

    def is_injective(self) -> bool:
        return all(len(set(v.values())) == len(v) for v in self.per_type.values())


def rename_indices(c: Configuration, f: TypedRenaming, sig: Signature) -> Configuration:
    tight, witness = is_tight_architecture(c.architecture, sig)
    if not tight:
        raise TightnessError(f"dangling interaction endpoint {witness}")
    arch = c.architecture
    comps = {ct: {f.apply(ct, u) for u in us} for ct, us in arch.components.items()}
    inters = {}
    for itype, tuples in arch.interactions.items():
        ports = sig.interaction(itype).ports
        inters[itype] = {tuple(f.apply(ports[k][0], u) for k, u in enumerate(tup)) for tup in tuples}
    marking = {(q, f.apply(sig.state_owner(q), u)) for (q, u) in c.marking}
    return Configuration(Architecture(comps, inters), marking)


def _vertex_signatures(c: Configuration, sig: Signature) -> dict[tuple[str, Index], tuple]:
    arch = c.architecture
    marked: dict[tuple[str, Index], set[str]] = defaultdict(set)
    for (q, u) in c.marking:
        marked[(sig.state_owner(q), u)].add(q)
    incid: dict[tuple[str, Index], Counter] = defaultdict(Counter)
    for itype, tuples in arch.interactions.items():
        ports = sig.interaction(itype).ports
        for tup in tuples:
            for k, u in enumerate(tup):
                incid[(ports[k][0], u)][(itype, k)] += 1
    out = {}
    for ct, us in arch.components.items():
        for u in us:
            out[(ct, u)] = (tuple(sorted(marked[(ct, u)])), tuple(sorted(incid[(ct, u)].items())))
    return out


def find_symmetry(c1: Configuration, c2: Configuration, sig: Signature) -> Optional[TypedRenaming]:
    """Search a typed renaming mapping ``c1`` onto ``c2``; ``None`` when none exists."""
    a1, a2 = c1.architecture, c2.architecture
    if set(a1.components) != set(a2.components) or set(a1.interactions) != set(a2.interactions):
        return None
    if any(len(a1.instances(t)) != len(a2.instances(t)) for t in a1.components):
        return None
    if any(len(a1.tuples(t)) != len(a2.tuples(t)) for t in a1.interactions):
        return None
    if len(c1.marking) != len(c2.marking):
        return None
    sig1 = _vertex_signatures(c1, sig)
    sig2 = _vertex_signatures(c2, sig)
    if Counter((v[0], s) for v, s in sig1.items()) != Counter((v[0], s) for v, s in sig2.items()):
        return None

    # constraints: each tuple of c1 must land in c2's tuple set
    tuple_vars: list[tuple[str, tuple, tuple[tuple[str, Index], ...]]] = []
    for itype, tuples in a1.interactions.items():
        ports = sig.interaction(itype).ports
        for tup in sorted(tuples):
            tuple_vars.append((itype, tup, tuple((ports[k][0], u) for k, u in enumerate(tup))))
    watch: dict[tuple[str, Index], list[int]] = defaultdict(list)
    for idx, (_, _, vs) in enumerate(tuple_vars):
        for v in set(vs):
            watch[v].append(idx)

    # variable order: BFS over the interaction graph, starting from most constrained vertices
    neighbours: dict[tuple[str, Index], set] = defaultdict(set)
    for _, _, vs in tuple_vars:
        for v in vs:
            neighbours[v].update(vs)
    candidates: dict[tuple[str, Index], list[Index]] = {}
    by_sig2: dict[tuple, list[Index]] = defaultdict(list)
    for (ct, v), s in sorted(sig2.items()):
        by_sig2[(ct, s)].append(v)
    for (ct, u), s in sig1.items():
        candidates[(ct, u)] = by_sig2[(ct, s)]
    order: list[tuple[str, Index]] = []
    seen: set = set()
    for start in sorted(sig1, key=lambda v: (len(candidates[v]), v)):
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            v = queue.pop(0)
            order.append(v)
            for w in sorted(neighbours[v] - seen, key=lambda w: (len(candidates[w]), w)):
                seen.add(w)
                queue.append(w)

    assign: dict[tuple[str, Index], Index] = {}
    used: dict[str, set[Index]] = defaultdict(set)

    def consistent(v) -> bool:
        for idx in watch[v]:
            itype, _, vs = tuple_vars[idx]
            if all(w in assign for w in vs):
                image = tuple(assign[w] for w in vs)
                if image not in a2.tuples(itype):
                    return False
        return True

    def search(pos: int) -> bool:
        if pos == len(order):
            return True
        v = order[pos]
        ct = v[0]
        for target in candidates[v]:
            if target in used[ct]:
                continue
            assign[v] = target
            used[ct].add(target)
            if consistent(v) and search(pos + 1):
                return True
            del assign[v]
            used[ct].discard(target)
        return False

    if not search(0):
        return None
    per_type: dict[str, dict[Index, Index]] = defaultdict(dict)
    for (ct, u), v in assign.items():
        per_type[ct][u] = v
    f = TypedRenaming(per_type)
    if rename_indices(c1, f, sig) != c2:  # pragma: no cover - guarded by construction
        logger.warning("symmetry witness failed re-check")
        return None
    return f


def random_renaming(arch: Architecture, rng: random.Random, spread: int = 3) -> TypedRenaming:
    """A random injective per-type renaming of ``arch``'s instances into fresh short indices."""
    per_type = {}
    for ct, us in arch.components.items():
        pool = sorted({(a,) for a in range(1, spread * len(us) + 2)} |
                      {(a, b) for a in range(1, 3) for b in range(1, spread + 1)} | set(us))
        targets = rng.sample(pool, len(us))
        per_type[ct] = dict(zip(sorted(us), targets))
    return TypedRenaming(per_type)


# -- JSON -------------------------------------------------------------------


def configuration_to_json(c: Configuration) -> dict:
    arch = c.architecture
    return {
        "components": {ct: [index_to_str(u) for u in sorted(us)] for ct, us in arch.components.items()},
        "interactions": {it: [[index_to_str(u) for u in tup] for tup in sorted(ts)]
                         for it, ts in arch.interactions.items()},
        "marking": [[q, index_to_str(u)] for (q, u) in sorted(c.marking, key=lambda p: (p[1], p[0]))],
    }


def configuration_from_json(doc: dict | str) -> Configuration:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        comps = {ct: {index_from_str(u) for u in us} for ct, us in doc.get("components", {}).items()}
        inters = {it: {tuple(index_from_str(u) for u in tup) for tup in ts}
                  for it, ts in doc.get("interactions", {}).items()}
        marking = {(q, index_from_str(u)) for q, u in doc.get("marking", [])}
    except (AttributeError, TypeError, ValueError) as exc:
        raise InputError(f"malformed configuration document: {exc}") from exc
    return Configuration(Architecture(comps, inters), marking)


def make_configuration(components: Mapping[str, Iterable[Index]],
                       interactions: Mapping[str, Iterable[tuple[Index, ...]]],
                       marking: Iterable[Place]) -> Configuration:
    return Configuration(Architecture(components, interactions), frozenset(marking))
