"""Configuration Logic: AST, concrete syntax, normal form, profiles, tightness, satisfaction."""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Union

from .errors import BoundExhausted, ParseError, ParseErrors, ProfileConflict, TightnessError, Unconstrained
from .model import (ComponentType, Configuration, InteractionType, Signature, TypedRenaming,
                    ValidationIssue, ValidationReport, is_tight_architecture, validate_signature)

logger = logging.getLogger(__name__)


# -- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Emp:
    pass


@dataclass(frozen=True)
class CompAtom:
    ctype: str
    state: Optional[str]
    var: str


@dataclass(frozen=True)
class InterAtom:
    itype: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class PredAtom:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Star:
    left: "ClFormula"
    right: "ClFormula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "ClFormula"


ClFormula = Union[Emp, CompAtom, InterAtom, PredAtom, Star, Exists]
Atom = Union[CompAtom, InterAtom, PredAtom]


def star(*parts: ClFormula) -> ClFormula:
    parts = tuple(p for p in parts if not isinstance(p, Emp))
    if not parts:
        return Emp()
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Star(p, out)
    return out


def exists(names, body: ClFormula) -> ClFormula:
    for v in reversed(tuple(names)):
        body = Exists(v, body)
    return body


def atoms_of(f: ClFormula) -> list[Atom]:
    """Atoms in left-to-right syntactic order."""
    out: list[Atom] = []

    def walk(g):
        if isinstance(g, Star):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Exists):
            walk(g.body)
        elif not isinstance(g, Emp):
            out.append(g)

    walk(f)
    return out


def bound_vars(f: ClFormula) -> list[str]:
    out: list[str] = []

    def walk(g):
        if isinstance(g, Star):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Exists):
            out.append(g.var)
            walk(g.body)

    walk(f)
    return out


def atom_vars(a: Atom) -> tuple[str, ...]:
    return (a.var,) if isinstance(a, CompAtom) else a.args


def free_vars(f: ClFormula) -> set[str]:
    if isinstance(f, Emp):
        return set()
    if isinstance(f, (CompAtom, InterAtom, PredAtom)):
        return set(atom_vars(f))
    if isinstance(f, Star):
        return free_vars(f.left) | free_vars(f.right)
    return free_vars(f.body) - {f.var}


def rename_free(f: ClFormula, sub: Mapping[str, str]) -> ClFormula:
    if isinstance(f, Emp):
        return f
    if isinstance(f, CompAtom):
        return CompAtom(f.ctype, f.state, sub.get(f.var, f.var))
    if isinstance(f, InterAtom):
        return InterAtom(f.itype, tuple(sub.get(v, v) for v in f.args))
    if isinstance(f, PredAtom):
        return PredAtom(f.name, tuple(sub.get(v, v) for v in f.args))
    if isinstance(f, Star):
        return Star(rename_free(f.left, sub), rename_free(f.right, sub))
    inner = {k: v for k, v in sub.items() if k != f.var}
    return Exists(f.var, rename_free(f.body, inner))


@dataclass(frozen=True)
class Rule:
    head: str
    params: tuple[str, ...]
    body: ClFormula

    @cached_property
    def atoms(self) -> tuple[Atom, ...]:
        return tuple(atoms_of(self.body))

    @cached_property
    def existentials(self) -> tuple[str, ...]:
        return tuple(bound_vars(self.body))

    @cached_property
    def comp_atoms(self) -> tuple[CompAtom, ...]:
        return tuple(a for a in self.atoms if isinstance(a, CompAtom))

    @cached_property
    def inter_atoms(self) -> tuple[InterAtom, ...]:
        return tuple(a for a in self.atoms if isinstance(a, InterAtom))

    @cached_property
    def pred_atoms(self) -> tuple[PredAtom, ...]:
        return tuple(a for a in self.atoms if isinstance(a, PredAtom))

    @property
    def npred(self) -> int:
        return len(self.pred_atoms)

    @cached_property
    def local_vars(self) -> tuple[str, ...]:
        return self.params + tuple(v for v in self.existentials if v not in self.params)


@dataclass(frozen=True)
class Sid:
    rules: tuple[Rule, ...]

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    @cached_property
    def kappa(self) -> int:
        return max([1] + [r.npred for r in self.rules])

    @cached_property
    def by_head(self) -> Mapping[str, tuple[int, ...]]:
        table: dict[str, list[int]] = {}
        for i, r in enumerate(self.rules):
            table.setdefault(r.head, []).append(i)
        return MappingProxyType({k: tuple(v) for k, v in table.items()})

    def arity(self, pred: str) -> int:
        return len(self.rules[self.by_head[pred][0]].params)

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True, eq=False)
class Spec:
    signature: Signature
    sid: Sid
    sentences: Mapping[str, ClFormula] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sentences", MappingProxyType(dict(self.sentences)))


Profile = Mapping[str, tuple[str, ...]]


# -- printing ---------------------------------------------------------------


def format_formula(f: ClFormula) -> str:
    if isinstance(f, Exists):
        names = []
        g: ClFormula = f
        while isinstance(g, Exists):
            names.append(g.var)
            g = g.body
        return f"exists {' '.join(names)} . {format_formula(g)}"
    if isinstance(f, Star):
        return " * ".join(_format_unit(p) for p in _star_parts(f))
    return _format_unit(f)


def _star_parts(f: ClFormula) -> list[ClFormula]:
    if isinstance(f, Star):
        return _star_parts(f.left) + _star_parts(f.right)
    return [f]


def _format_unit(f: ClFormula) -> str:
    if isinstance(f, Emp):
        return "emp"
    if isinstance(f, CompAtom):
        return f"{f.ctype}@{f.state}({f.var})" if f.state is not None else f"{f.ctype}({f.var})"
    if isinstance(f, (InterAtom, PredAtom)):
        name = f.itype if isinstance(f, InterAtom) else f.name
        return f"{name}({', '.join(f.args)})"
    return f"({format_formula(f)})"


def format_rule(r: Rule) -> str:
    return f"{r.head}({', '.join(r.params)}) <= {format_formula(r.body)};"


def format_spec(spec: Spec) -> str:
    lines: list[str] = []
    sig = spec.signature
    for c in sig.components:
        parts = [f"ports: {', '.join(c.ports)};", f"states: {', '.join(c.states)};"]
        parts += [f"{q} -{p}-> {q2};" for (q, p, q2) in c.transitions]
        lines.append(f"component {c.name} {{ " + " ".join(parts) + " }")
    for i in sig.interactions:
        lines.append(f"interaction {i.name} = ({', '.join(f'{c}.{p}' for c, p in i.ports)});")
    for r in spec.sid.rules:
        lines.append(format_rule(r))
    for name, f in spec.sentences.items():
        lines.append(f"sentence {name} = {format_formula(f)};")
    return "\n".join(lines) + "\n"


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*) |
    (?P<arrow><=|->) | (?P<id>[A-Za-z_][A-Za-z0-9_']*) |
    (?P<sym>[-{}();:,.=*@]) | (?P<bad>.)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, start = 1, 0
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        col = m.start() - start + 1
        if kind == "nl":
            line += 1
            start = m.end()
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "bad":
            raise ParseErrors([ParseError(f"unexpected character {m.group()!r}", line, col)])
        toks.append(_Tok("sym" if kind in ("sym", "arrow") else "id", m.group(), line, col))
    toks.append(_Tok("eof", "", line, 1))
    return toks


@dataclass
class _RawAtom:
    name: str
    state: Optional[str]
    args: tuple[str, ...]
    line: int
    col: int


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.peek()
        shown = tok.text or "end of input"
        return ParseError(f"{msg} (at {shown!r})", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            raise self.error(f"expected {text!r}")
        return self.next()

    def ident(self) -> _Tok:
        t = self.peek()
        if t.kind != "id":
            raise self.error("expected identifier")
        return self.next()

    def id_list(self) -> list[str]:
        out = [self.ident().text]
        while self.peek().text == ",":
            self.next()
            out.append(self.ident().text)
        return out

    # formulas are parsed into a raw tree with unresolved atoms
    def formula(self):
        if self.peek().text == "exists":
            self.next()
            names = [self.ident().text]
            while self.peek().kind == "id":
                names.append(self.next().text)
            self.expect(".")
            body = self.formula()
            return ("exists", names, body)
        parts = [self.unit()]
        while self.peek().text == "*":
            self.next()
            parts.append(self.unit())
        return ("star", parts) if len(parts) > 1 else parts[0]

    def unit(self):
        t = self.peek()
        if t.text == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if t.kind != "id":
            raise self.error("expected atom")
        if t.text == "emp":
            self.next()
            return ("emp",)
        name = self.next()
        state = None
        if self.peek().text == "@":
            self.next()
            state = self.ident().text
        self.expect("(")
        args: list[str] = []
        if self.peek().text != ")":
            args = self.id_list()
        self.expect(")")
        return ("atom", _RawAtom(name.text, state, tuple(args), name.line, name.col))


def parse_spec(text: str) -> Spec:
    """Parse a spec file; raise :class:`ParseErrors` listing every problem found."""
    p = _Parser(text)
    components: list[ComponentType] = []
    interactions: list[tuple[str, list[tuple[str, str]], _Tok]] = []
    raw_rules: list[tuple[_Tok, list[str], object]] = []
    raw_sentences: list[tuple[_Tok, object]] = []
    errors: list[ParseError] = []
    while p.peek().kind != "eof":
        start = p.pos
        try:
            t = p.peek()
            if t.text == "component" and p.peek(1).kind == "id" and p.peek(2).text == "{":
                components.append(_parse_component(p))
            elif t.text == "interaction" and p.peek(1).kind == "id" and p.peek(2).text == "=":
                p.next()
                name = p.ident()
                p.expect("=")
                p.expect("(")
                ports = [_qualified(p)]
                while p.peek().text == ",":
                    p.next()
                    ports.append(_qualified(p))
                p.expect(")")
                p.expect(";")
                interactions.append((name.text, ports, name))
            elif t.text == "sentence" and p.peek(1).kind == "id" and p.peek(2).text == "=":
                p.next()
                name = p.ident()
                p.expect("=")
                f = p.formula()
                p.expect(";")
                raw_sentences.append((name, f))
            else:
                head = p.ident()
                p.expect("(")
                params: list[str] = []
                if p.peek().text != ")":
                    params = p.id_list()
                p.expect(")")
                p.expect("<=")
                f = p.formula()
                p.expect(";")
                raw_rules.append((head, params, f))
        except ParseError as err:
            errors.append(err)
            # resynchronise after the next ';' or '}'
            p.pos = max(p.pos, start + 1)
            while p.peek().kind != "eof" and p.peek().text not in (";", "}"):
                p.next()
            if p.peek().kind != "eof":
                p.next()
    if errors:
        raise ParseErrors(errors)

    comp_names = {c.name for c in components}
    port_owner = {}
    for c in components:
        for port in c.ports:
            port_owner.setdefault(port, c.name)
    inter_types = []
    for name, ports, tok in interactions:
        for (cname, port) in ports:
            if cname not in comp_names:
                errors.append(ParseError(f"unknown component type {cname} in interaction {name}"
                                         f"{_nearest(cname, comp_names)}", tok.line, tok.col))
            elif port_owner.get(port) != cname:
                errors.append(ParseError(f"component type {cname} has no port {port}", tok.line, tok.col))
        inter_types.append(InteractionType(name, tuple(ports)))
    sig = Signature(tuple(components), tuple(inter_types))
    preds: dict[str, int] = {}
    for head, params, _ in raw_rules:
        if head.text in comp_names or sig.has_interaction(head.text):
            errors.append(ParseError(f"rule head {head.text} clashes with a type name", head.line, head.col))
        if preds.setdefault(head.text, len(params)) != len(params):
            errors.append(ParseError(f"predicate {head.text} used with two arities", head.line, head.col))
    resolver = _Resolver(sig, preds, errors)
    rules = []
    for head, params, raw in raw_rules:
        if len(set(params)) != len(params):
            errors.append(ParseError(f"repeated parameter in head of {head.text}", head.line, head.col))
        body = resolver.resolve(raw, set(params))
        missing = free_vars(body) - set(params)
        if missing:
            errors.append(ParseError(f"free variables {sorted(missing)} not among parameters of {head.text}",
                                     head.line, head.col))
        rules.append(Rule(head.text, tuple(params), body))
    sentences = {}
    for name, raw in raw_sentences:
        f = resolver.resolve(raw, set())
        if free_vars(f):
            errors.append(ParseError(f"sentence {name.text} is not closed: {sorted(free_vars(f))}",
                                     name.line, name.col))
        sentences[name.text] = f
    if errors:
        raise ParseErrors(errors)
    return Spec(sig, Sid(tuple(rules)), sentences)


def parse_formula(text: str, spec: Spec) -> ClFormula:
    p = _Parser(text)
    raw = p.formula()
    if p.peek().kind != "eof":
        raise ParseErrors([p.error("trailing input")])
    errors: list[ParseError] = []
    preds = {r.head: len(r.params) for r in spec.sid.rules}
    f = _Resolver(spec.signature, preds, errors).resolve(raw, set())
    if errors:
        raise ParseErrors(errors)
    return f


def _parse_component(p: _Parser) -> ComponentType:
    p.expect("component")
    name = p.ident().text
    p.expect("{")
    ports: list[str] = []
    states: list[str] = []
    transitions = []
    while p.peek().text != "}":
        t = p.peek()
        if t.text == "ports" and p.peek(1).text == ":":
            p.next()
            p.next()
            ports += p.id_list()
            p.expect(";")
        elif t.text == "states" and p.peek(1).text == ":":
            p.next()
            p.next()
            states += p.id_list()
            p.expect(";")
        else:
            q = p.ident().text
            p.expect("-")
            port = p.ident().text
            p.expect("->")
            q2 = p.ident().text
            p.expect(";")
            transitions.append((q, port, q2))
    p.expect("}")
    return ComponentType(name, tuple(ports), tuple(states), tuple(transitions))


def _qualified(p: _Parser) -> tuple[str, str]:
    c = p.ident().text
    p.expect(".")
    return c, p.ident().text


def _nearest(name: str, candidates) -> str:
    import difflib
    close = difflib.get_close_matches(name, sorted(candidates), n=1)
    return f" (did you mean {close[0]}?)" if close else ""


class _Resolver:
    """Turns raw parse trees into AST nodes, resolving atom kinds and α-renaming binders."""

    def __init__(self, sig: Signature, preds: Mapping[str, int], errors: list[ParseError]):
        self.sig = sig
        self.preds = preds
        self.errors = errors

    def resolve(self, raw, taken: set[str]) -> ClFormula:
        used = set(taken)
        return self._go(raw, {}, used)

    def _go(self, raw, env: dict[str, str], used: set[str]) -> ClFormula:
        kind = raw[0]
        if kind == "emp":
            return Emp()
        if kind == "star":
            return star(*[self._go(r, env, used) for r in raw[1]])
        if kind == "exists":
            env = dict(env)
            names = []
            for v in raw[1]:
                fresh = v
                k = 1
                while fresh in used:
                    k += 1
                    fresh = f"{v}_{k}"
                used.add(fresh)
                env[v] = fresh
                names.append(fresh)
            return exists(names, self._go(raw[2], env, used))
        atom: _RawAtom = raw[1]
        args = tuple(env.get(a, a) for a in atom.args)
        sig = self.sig
        if sig.has_component(atom.name):
            ctype = sig.component(atom.name)
            if len(args) != 1:
                self.errors.append(ParseError(f"component atom {atom.name} takes one argument",
                                              atom.line, atom.col))
                return Emp()
            if atom.state is not None and atom.state not in ctype.states:
                self.errors.append(ParseError(f"{atom.name} has no state {atom.state}", atom.line, atom.col))
            return CompAtom(atom.name, atom.state, args[0])
        if atom.state is not None:
            self.errors.append(ParseError(f"state annotation on non-component {atom.name}",
                                          atom.line, atom.col))
        if sig.has_interaction(atom.name):
            if len(args) != sig.interaction(atom.name).arity:
                self.errors.append(ParseError(f"interaction {atom.name} expects "
                                              f"{sig.interaction(atom.name).arity} arguments",
                                              atom.line, atom.col))
            return InterAtom(atom.name, args)
        if atom.name in self.preds:
            if len(args) != self.preds[atom.name]:
                self.errors.append(ParseError(f"predicate {atom.name} expects {self.preds[atom.name]} "
                                              "arguments", atom.line, atom.col))
            return PredAtom(atom.name, args)
        known = set(self.preds) | {c.name for c in sig.components} | {i.name for i in sig.interactions}
        self.errors.append(ParseError(f"unknown identifier {atom.name}{_nearest(atom.name, known)}",
                                      atom.line, atom.col))
        return Emp()


# -- desugaring and queries -------------------------------------------------


def desugar_formula(f: ClFormula, sig: Signature) -> list[ClFormula]:
    """All state-annotated variants of ``f`` in declared state order (one per stateless atom choice)."""
    holes = [a for a in atoms_of(f) if isinstance(a, CompAtom) and a.state is None]
    if not holes:
        return [f]
    choices = [sig.component(a.ctype).states for a in holes]
    out = []
    for pick in itertools.product(*choices):
        it = iter(pick)
        out.append(_fill_states(f, it))
    return out


def _fill_states(f: ClFormula, it) -> ClFormula:
    if isinstance(f, CompAtom) and f.state is None:
        return CompAtom(f.ctype, next(it), f.var)
    if isinstance(f, Star):
        left = _fill_states(f.left, it)
        return Star(left, _fill_states(f.right, it))
    if isinstance(f, Exists):
        return Exists(f.var, _fill_states(f.body, it))
    return f


def desugar_stateless_atoms(sid: Sid, sig: Signature) -> Sid:
    rules: list[Rule] = []
    for r in sid.rules:
        for body in desugar_formula(r.body, sig):
            rules.append(Rule(r.head, r.params, body))
    return Sid(tuple(rules))


@dataclass(frozen=True, eq=False)
class Query:
    """The SID a sentence is checked against: sentence rules first, desugared."""

    spec: Spec
    sentence: ClFormula
    name: str
    sid: Sid
    root_head: str

    @property
    def signature(self) -> Signature:
        return self.spec.signature

    @cached_property
    def root_rules(self) -> tuple[int, ...]:
        return self.sid.by_head[self.root_head]


_QUERY_CACHE: dict[tuple[int, object], Query] = {}


def resolve_sentence(spec: Spec, sentence: Union[str, ClFormula]) -> tuple[str, ClFormula]:
    if not isinstance(sentence, str):
        return "Sentence", sentence
    if sentence in spec.sentences:
        return sentence, spec.sentences[sentence]
    if sentence in spec.sid.by_head and spec.sid.arity(sentence) == 0:
        return sentence, PredAtom(sentence, ())
    return "Sentence", parse_formula(sentence, spec)


def _reachable(first: list[Rule], rest: list[Rule]) -> tuple[Rule, ...]:
    """Keeps the rules whose heads are reachable from the sentence rules, in order."""
    rules = first + rest
    seen = {r.head for r in first}
    todo = list(seen)
    while todo:
        h = todo.pop()
        for r in rules:
            if r.head == h:
                for a in r.pred_atoms:
                    if a.name not in seen:
                        seen.add(a.name)
                        todo.append(a.name)
    return tuple(r for r in rules if r.head in seen)


def make_query(spec: Spec, sentence: Union[str, ClFormula]) -> Query:
    key = (id(spec), sentence)
    cached = _QUERY_CACHE.get(key)
    if cached is not None and cached.spec is spec:
        return cached
    name, f = resolve_sentence(spec, sentence)
    if free_vars(f):
        raise TightnessError(f"sentence has free variables {sorted(free_vars(f))}")
    if isinstance(f, PredAtom) and not f.args and f.name in spec.sid.by_head:
        head = f.name
        first = [r for r in spec.sid.rules if r.head == head]
        rest = [r for r in spec.sid.rules if r.head != head]
    else:
        head = name if name not in spec.sid.by_head else f"{name}_query"
        while head in spec.sid.by_head:
            head += "_"
        first = [Rule(head, (), f)]
        rest = list(spec.sid.rules)
    sid = desugar_stateless_atoms(Sid(_reachable(first, rest)), spec.signature)
    q = Query(spec, f, name, sid, head)
    _QUERY_CACHE[key] = q
    return q


# -- normal form ------------------------------------------------------------


def phi_vars_of(comps) -> set[str]:
    return {a.var for a in comps}


def validate_normal_form(sid: Sid) -> ValidationReport:
    """Check every rule against the two admissible rule shapes.

    Zero-arity heads may carry their component atom on any variable and are exempt from coverage.
    """
    issues: list[ValidationIssue] = []
    for idx, r in enumerate(sid.rules, start=1):
        where = f"rule {idx}: {r.head}"
        if len(set(r.params)) != len(r.params):
            issues.append(ValidationIssue("repeated-parameter", "head parameters must be distinct", where))
        fv = free_vars(r.body)
        if fv != set(r.params):
            issues.append(ValidationIssue("free-variables",
                                          f"body variables {sorted(fv)} differ from parameters", where))
        stateless = [a for a in r.comp_atoms if a.state is None]
        if stateless:
            issues.append(ValidationIssue("stateless-atom", "stateless component atom (desugar first)", where))
        comps, inters, preds = r.comp_atoms, r.inter_atoms, r.pred_atoms
        if not preds:
            ok = (len(r.params) == 1 and len(comps) == 1 and comps[0].var == r.params[0]
                  and not inters and not r.existentials)
            # a closed single-component sentence is its own one-node tree
            ok = ok or (not r.params and len(comps) <= 1 and set(r.existentials) <= phi_vars_of(comps))
            if not ok:
                issues.append(ValidationIssue(
                    "form", "a rule without predicate atoms must be a single component atom on its "
                            "unique parameter", where))
            continue
        if len(comps) > 1:
            issues.append(ValidationIssue("form", "at most one component atom per rule", where))
        phi_vars = {a.var for a in comps}
        if comps and r.params and comps[0].var != r.params[0]:
            issues.append(ValidationIssue("form", "the component atom must be on the first parameter", where))
        seen: dict[str, int] = {}
        for j, a in enumerate(preds, start=1):
            for v in a.args:
                if v in seen:
                    issues.append(ValidationIssue(
                        "disjointness", f"variable {v} occurs in predicate atoms {seen[v]} and {j}", where))
                else:
                    seen[v] = j
        if r.params:
            expected = (set(r.params) - phi_vars) | set(r.existentials)
            if set(seen) != expected:
                issues.append(ValidationIssue(
                    "coverage", f"predicate arguments {sorted(seen)} should be {sorted(expected)}", where))
        else:
            dangling = set(r.existentials) - phi_vars - set(seen)
            if dangling:
                issues.append(ValidationIssue(
                    "coverage", f"existentials {sorted(dangling)} reach no component atom", where,
                    severity="warning"))
    return ValidationReport(tuple(issues))


# -- profiles and tightness -------------------------------------------------


def infer_profiles(sid: Sid, sig: Signature) -> dict[str, tuple[str, ...]]:
    arity = {r.head: len(r.params) for r in sid.rules}
    prof: dict[tuple[str, int], str] = {}
    changed = True
    while changed:
        changed = False
        for r in sid.rules:
            for k, x in enumerate(r.params):
                found: list[str] = [a.ctype for a in r.comp_atoms if a.var == x]
                for a in r.pred_atoms:
                    for ell, y in enumerate(a.args):
                        if y == x and (a.name, ell) in prof:
                            found.append(prof[(a.name, ell)])
                for ctype in found:
                    cur = prof.get((r.head, k))
                    if cur is None:
                        prof[(r.head, k)] = ctype
                        changed = True
                    elif cur != ctype:
                        raise ProfileConflict((r.head, k + 1), cur, ctype)
    out = {}
    for head, n in arity.items():
        row = []
        for k in range(n):
            if (head, k) not in prof:
                raise Unconstrained((head, k + 1))
            row.append(prof[(head, k)])
        out[head] = tuple(row)
    return out


def _formula_tightness(f: ClFormula, sig: Signature, prof: Profile, where: str) -> list[ValidationIssue]:
    issues = []
    atoms = atoms_of(f)
    comps = [a for a in atoms if isinstance(a, CompAtom)]
    preds = [a for a in atoms if isinstance(a, PredAtom)]
    for a in atoms:
        if not isinstance(a, InterAtom):
            continue
        for k, x in enumerate(a.args):
            need = sig.position_type(a.itype, k)
            ok = any(c.var == x and c.ctype == need for c in comps) or any(
                y == x and prof.get(b.name, ())[ell:ell + 1] == (need,)
                for b in preds for ell, y in enumerate(b.args))
            if not ok:
                issues.append(ValidationIssue(
                    "loose-interaction", f"{a.itype}({', '.join(a.args)}) position {k + 1}: {x} is not "
                                         f"attached to a {need} component", where))
    return issues


def check_tight(sentence: Optional[ClFormula], spec: Spec, prof: Profile,
                sid: Optional[Sid] = None) -> ValidationReport:
    sid = sid or spec.sid
    sig = spec.signature
    issues: list[ValidationIssue] = []
    for idx, r in enumerate(sid.rules, start=1):
        where = f"rule {idx}: {r.head}"
        issues += _formula_tightness(r.body, sig, prof, where)
        for k, x in enumerate(r.params):
            need = prof.get(r.head, ())[k:k + 1]
            ok = any(c.var == x and (c.ctype,) == need for c in r.comp_atoms) or any(
                y == x and prof.get(b.name, ())[ell:ell + 1] == need
                for b in r.pred_atoms for ell, y in enumerate(b.args))
            if not ok:
                issues.append(ValidationIssue(
                    "loose-parameter", f"parameter {x} is not attached to a component", where))
    if sentence is not None:
        issues += _formula_tightness(sentence, sig, prof, "sentence")
    return ValidationReport(tuple(issues))


def validate_query(q: Query) -> ValidationReport:
    report = validate_signature(q.signature)
    report += validate_normal_form(q.sid)
    try:
        prof = infer_profiles(q.sid, q.signature)
    except (ProfileConflict, Unconstrained) as err:
        return report + ValidationReport((ValidationIssue("profile", str(err)),))
    return report + check_tight(None, q.spec, prof, sid=q.sid)


# -- satisfaction -----------------------------------------------------------


@dataclass(frozen=True)
class ModelsResult:
    holds: bool
    tree: Optional[object] = None
    renaming: Optional[TypedRenaming] = None


def models(c: Configuration, sentence: Union[str, ClFormula], spec: Spec, max_nodes: int = 8) -> ModelsResult:
    """Decide ``c |= sentence`` by matching ``c`` against canonical models up to symmetry.

    Raises :class:`BoundExhausted` when the node budget cut off trees that could still match.
    """
    from .rewriting import TreeSearch, canonical_model

    q = make_query(spec, sentence)
    report = validate_query(q)
    if not report.ok:
        raise TightnessError("; ".join(str(i) for i in report.errors))
    tight, witness = is_tight_architecture(c.architecture, spec.signature)
    if not tight:
        raise TightnessError(f"configuration is not tight: {witness}")
    return models_in(c, q, max_nodes)


def models_in(c: Configuration, q: Query, max_nodes: int) -> ModelsResult:
    from .model import find_symmetry
    from .rewriting import TreeSearch, canonical_model
    from .errors import DisjointnessError

    arch = c.architecture
    target = {ct: len(us) for ct, us in arch.components.items()}
    size = sum(target.values())
    search = TreeSearch(q, max_nodes, component_budget=size)
    for tree in search:
        if search.component_counts(tree) != target:
            continue
        try:
            canon = canonical_model(tree, q)
        except DisjointnessError:
            continue
        f = find_symmetry(canon, c, q.signature)
        if f is not None:
            return ModelsResult(True, tree, f)
    if search.cut:
        raise BoundExhausted(f"no match within {max_nodes} nodes, larger trees not excluded")
    return ModelsResult(False)
