"""Compiles a Post-Turing program and an input word into a linear component system.

One component type plays three roles along a chain: the control unit on the left,
tape cells in the middle and a sink on the right.  Commands travel rightwards from
the control unit to the head cell; read answers travel back leftwards.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional

from .cl import Spec, parse_spec
from .errors import InputError, ParseError, WordTooShort
from .model import ComponentType, Configuration, InteractionType, Signature

logger = logging.getLogger(__name__)

COMPONENT = "PT"

# Port inventory: interaction name -> (port of the left component, port of the right one).
# Commands flow left to right, so the sender's out-port comes first; read answers
# flow right to left, so the receiver's in-port comes first.
COMMANDS = ("write_0", "write_1", "right", "left", "read", "right_bang", "left_bang")
ANSWERS = ("read_0", "read_1")
BINARY: dict[str, tuple[str, str]] = {
    **{a: (f"out_{a}", f"in_{a}") for a in COMMANDS},
    **{a: (f"in_{a}", f"out_{a}") for a in ANSWERS},
}
UNARY: dict[str, str] = {"err": "out_err"}
# Messages a tape cell without the head passes on unchanged.
FORWARDED = ("write_0", "write_1", "right", "left", "read", "read_0", "read_1")
# Every binary message; each gets an intermediate tape state.
MESSAGES = tuple(BINARY)

KINDS = ("write0", "write1", "goRight", "goLeft", "gotoIfRead0", "gotoIfRead1", "stop")


@dataclass(frozen=True)
class Statement:
    kind: str
    target: Optional[int] = None  # 1-based goto target


@dataclass(frozen=True)
class PtProgram:
    statements: tuple[Statement, ...]

    def __len__(self) -> int:
        return len(self.statements)

    def format(self) -> str:
        return "\n".join(f"{i}: {_format_statement(s)}" for i, s in enumerate(self.statements, 1)) + "\n"


_TEXT = {"write0": "write 0", "write1": "write 1", "goRight": "go right", "goLeft": "go left", "stop": "stop"}


def _format_statement(s: Statement) -> str:
    if s.kind == "gotoIfRead0":
        return f"goto step {s.target} if read 0"
    if s.kind == "gotoIfRead1":
        return f"goto step {s.target} if read 1"
    return _TEXT[s.kind]


_STATEMENT = re.compile(r"""
    \s*(?P<index>\d+)\s*:\s*
    (?: (?P<write>write)\s+(?P<bit>[01])
      | go\s+(?P<dir>right|left)
      | goto\s+step\s+(?P<target>\d+)\s+if\s+read\s+(?P<rbit>[01])
      | (?P<stop>stop) )\s*$
""", re.VERBOSE)


def parse_pt_program(text: str) -> PtProgram:
    """Statements ``i: stmt``, one per line or separated by ``;``; ``#`` starts a comment."""
    found: list[tuple[int, Statement, int]] = []
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for chunk in line.split(";"):
            if not chunk.strip():
                continue
            m = _STATEMENT.match(chunk)
            if m is None:
                raise ParseError(f"cannot parse statement {chunk.strip()!r}", line_no)
            if m["write"]:
                st = Statement("write" + m["bit"])
            elif m["dir"]:
                st = Statement("goRight" if m["dir"] == "right" else "goLeft")
            elif m["target"]:
                st = Statement("gotoIfRead" + m["rbit"], int(m["target"]))
            else:
                st = Statement("stop")
            found.append((int(m["index"]), st, line_no))
    if not found:
        raise ParseError("empty program")
    for expected, (index, _, line_no) in enumerate(found, 1):
        if index != expected:
            raise ParseError(f"statement number {index} out of sequence, expected {expected}", line_no)
    m_len = len(found)
    for _, st, line_no in found:
        if st.target is not None and not 1 <= st.target <= m_len:
            raise ParseError(f"goto target {st.target} outside 1..{m_len}", line_no)
    return PtProgram(tuple(st for _, st, _ in found))


# -- behavior ---------------------------------------------------------------


def control_state(i: int, waiting: bool = False) -> str:
    return f"c{i}_" if waiting else f"c{i}"


def tape_state(bit: int, head: bool, message: Optional[str] = None) -> str:
    base = f"t{bit}_{'top' if head else 'bot'}"
    return f"{base}_{message}" if message else base


def _control(p: PtProgram) -> tuple[list[str], list[tuple[str, str, str]]]:
    m = len(p)
    states = [s for i in range(1, m + 2) for s in (control_state(i), control_state(i, True))]
    ts: list[tuple[str, str, str]] = []
    for i, st in enumerate(p.statements, 1):
        here, wait, nxt = control_state(i), control_state(i, True), control_state(i + 1)
        if st.kind in ("write0", "write1"):
            ts.append((here, BINARY[f"write_{st.kind[-1]}"][0], nxt))
        elif st.kind == "goRight":
            ts.append((here, BINARY["right"][0], nxt))
        elif st.kind == "goLeft":
            ts += [(here, BINARY["left"][0], nxt),
                   (here, BINARY["left_bang"][0], wait),
                   (wait, UNARY["err"], wait)]
        elif st.kind in ("gotoIfRead0", "gotoIfRead1"):
            hit = st.kind[-1]
            miss = "1" if hit == "0" else "0"
            ts += [(here, BINARY["read"][0], wait),
                   (wait, BINARY[f"read_{hit}"][0], control_state(st.target)),
                   (wait, BINARY[f"read_{miss}"][0], nxt)]
    return states, ts


def _tape() -> tuple[list[str], list[tuple[str, str, str]]]:
    states: list[str] = []
    ts: list[tuple[str, str, str]] = []
    for g in (0, 1):
        for head in (False, True):
            states.append(tape_state(g, head))
            states += [tape_state(g, head, a) for a in MESSAGES]
        bot, top = tape_state(g, False), tape_state(g, True)
        for a in FORWARDED:
            inp, out = _recv(a), _send(a)
            ts += [(bot, inp, tape_state(g, False, a)), (tape_state(g, False, a), out, bot)]
        ts.append((bot, _recv("right_bang"), top))
        ts.append((tape_state(g, False, "left"), _send("left_bang"), top))
        for g2 in (0, 1):
            ts.append((top, _recv(f"write_{g2}"), tape_state(g2, True)))
        ts += [(top, _recv("read"), tape_state(g, True, "read")),
               (tape_state(g, True, "read"), _send(f"read_{g}"), top),
               (top, _recv("right"), tape_state(g, True, "right")),
               (tape_state(g, True, "right"), _send("right_bang"), bot),
               (top, _recv("left_bang"), bot)]
    return states, ts


def _recv(a: str) -> str:
    return f"in_{a}"


def _send(a: str) -> str:
    return f"out_{a}"


def _sink() -> tuple[list[str], list[tuple[str, str, str]]]:
    return ["idle", "busy"], [("idle", _recv("right_bang"), "busy"), ("busy", UNARY["err"], "busy")]


def encode_behavior(p: PtProgram) -> Signature:
    """Signature whose single component type carries the control, tape and sink machines."""
    parts = [_control(p), _tape(), _sink()]
    states = [s for st, _ in parts for s in st]
    transitions = [t for _, ts in parts for t in ts]
    ports = [q for pair in BINARY.values() for q in pair] + list(UNARY.values())
    comp = ComponentType(COMPONENT, tuple(ports), tuple(states), tuple(transitions))
    inters = [InteractionType(a, ((COMPONENT, l), (COMPONENT, r))) for a, (l, r) in BINARY.items()]
    inters += [InteractionType(a, ((COMPONENT, port),)) for a, port in UNARY.items()]
    return Signature((comp,), tuple(inters))


def _signature_text(sig: Signature) -> str:
    comp = sig.components[0]
    lines = [f"component {comp.name} {{",
             f"  ports: {', '.join(comp.ports)};",
             f"  states: {', '.join(comp.states)};"]
    lines += [f"  {q} -{port}-> {q2};" for q, port, q2 in comp.transitions]
    lines.append("}")
    for it in sig.interactions:
        lines.append(f"interaction {it.name} = ({', '.join(f'{c}.{p}' for c, p in it.ports)});")
    return "\n".join(lines)


# -- rules ------------------------------------------------------------------


def _cell(state: str, x: str) -> str:
    return " * ".join([f"{COMPONENT}@{state}({x})"] + [f"{a}({x})" for a in UNARY])


def _leaf(state: str) -> str:
    return f"{COMPONENT}@{state}(x)"


def _units(x: str) -> str:
    return " * ".join(f"{a}({x})" for a in UNARY)


def _link(x: str, y: str) -> str:
    return " * ".join(f"{a}({x}, {y})" for a in BINARY)


def _rules(word: str, padding: Optional[int]) -> list[str]:
    n = len(word)
    zero = tape_state(0, False)
    # leaf rules hold a bare component atom, so their unary atoms sit in the parent rule
    rules = [f"Zero(x) <= {_leaf(zero)};"]
    # Word: the head sits on the first letter; one rule per cell
    for k in range(1, n):
        state = tape_state(int(word[k - 1]), k == 1)
        head = "Word" if k == 1 else f"Word{k}"
        if k < n - 1:
            rules.append(f"{head}(x, y) <= exists z . {_cell(state, 'x')} * {_link('x', 'z')} * Word{k + 1}(z, y);")
        else:
            rules.append(f"{head}(x, y) <= {_cell(state, 'x')} * {_link('x', 'y')} * {_units('y')} * Last(y);")
    rules.append(f"Last(x) <= {_leaf(tape_state(int(word[-1]), False))};")

    if padding is None:
        rules += [f"Zeroes(x, y) <= {_cell(zero, 'x')} * {_link('x', 'y')} * {_units('y')} * Zero(y);",
                  f"Zeroes(x, y) <= exists z . {_cell(zero, 'x')} * {_link('x', 'z')} * Zeroes(z, y);"]
        pad = "Zeroes"
    elif padding >= 2:
        for k in range(2, padding + 1):
            if k == 2:
                rules.append(f"Pad2(x, y) <= {_cell(zero, 'x')} * {_link('x', 'y')} * {_units('y')} * Zero(y);")
            else:
                rules.append(f"Pad{k}(x, y) <= exists z . {_cell(zero, 'x')} * {_link('x', 'z')} * Pad{k - 1}(z, y);")
        pad = f"Pad{padding}"
    else:
        pad = None

    if pad is not None:
        rules.append(f"Tape(x, y) <= exists z1 w1 w2 z2 . {pad}(x, z1) * {_link('z1', 'w1')} * Word(w1, w2)"
                     f" * {_link('w2', 'z2')} * {pad}(z2, y);")
    elif padding == 1:
        rules.append(f"Tape(x, y) <= exists w1 w2 . {_units('x')} * Zero(x) * {_link('x', 'w1')} * Word(w1, w2)"
                     f" * {_link('w2', 'y')} * {_units('y')} * Zero(y);")
    else:
        rules.append("Tape(x, y) <= Word(x, y);")
    rules.append(f"Init(x, y) <= exists z1 z2 . {_cell(control_state(1), 'x')} * {_link('x', 'z1')}"
                 f" * Tape(z1, z2) * {_link('z2', 'y')} * {_units('y')} * Sink(y);")
    rules.append(f"Sink(x) <= {_leaf('idle')};")
    return rules


def _check_program(p: PtProgram) -> None:
    stops = [i for i, s in enumerate(p.statements, 1) if s.kind == "stop"]
    if stops != [len(p)]:
        logger.warning("program does not have a unique stop statement as its last step (stops at %s)", stops)


def encode_spec_text(word: str, p: PtProgram, padding: Optional[int] = None) -> str:
    """Spec text with the signature, the rules and the sentence ``phi_w``.

    ``padding`` is the number of zero cells on each side of the word; ``None`` leaves it unbounded.
    """
    if not re.fullmatch(r"[01]*", word):
        raise InputError(f"input word must be a bit string, got {word!r}")
    if len(word) < 2:
        raise WordTooShort(f"input word must have at least two letters, got {word!r}")
    if padding is not None and padding < 0:
        raise InputError("padding must be non-negative")
    _check_program(p)
    header = ["# Post-Turing program:"] + [f"#   {line}" for line in p.format().splitlines()]
    header.append(f"# input word: {word}, padding: {'unbounded' if padding is None else padding}")
    body = [_signature_text(encode_behavior(p)), ""] + _rules(word, padding)
    body += ["", "sentence phi_w = exists x y . Init(x, y);"]
    return "\n".join(header + body) + "\n"


def encode_spec(word: str, p: PtProgram, padding: Optional[int] = None) -> Spec:
    return parse_spec(encode_spec_text(word, p, padding))


def encode_init(word: str, p: PtProgram, padding: Optional[int] = None):
    """The SID and the sentence ``exists x y . Init(x, y)``."""
    spec = encode_spec(word, p, padding)
    return spec.sid, spec.sentences["phi_w"]


def is_linear(c: Configuration) -> bool:
    """Whether the architecture is a single chain where consecutive components share every binary interaction."""
    arch = c.architecture
    nodes = arch.instances(COMPONENT)
    if not nodes:
        return False
    if any(arch.tuples(a) != frozenset((u,) for u in nodes) for a in UNARY):
        return False
    edges = arch.tuples(next(iter(BINARY)))
    if any(arch.tuples(a) != edges for a in BINARY):
        return False
    succ = {}
    for u, v in edges:
        if u in succ or u == v:
            return False
        succ[u] = v
    starts = nodes - {v for _, v in edges}
    if len(starts) != 1 or len(set(succ.values())) != len(succ):
        return False
    u, seen = next(iter(starts)), 1
    while u in succ:
        u = succ[u]
        seen += 1
    return seen == len(nodes)
