"""Exception hierarchy shared by every clverify module."""

from __future__ import annotations


class ClverifyError(Exception):
    """Base class for all errors raised by the toolchain."""


class InputError(ClverifyError):
    """Malformed user input (spec files, programs, JSON documents)."""


class ParseError(InputError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}" if line else message)


class ParseErrors(InputError):
    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class DisjointnessError(ClverifyError):
    def __init__(self, kind: str, overlap):
        self.kind = kind
        self.overlap = overlap
        super().__init__(f"composition undefined: {kind} overlaps at {overlap!r}")


class TightnessError(ClverifyError):
    pass


class NormalFormViolation(ClverifyError):
    pass


class ProfileConflict(ClverifyError):
    def __init__(self, position, first: str, second: str):
        self.position = position
        self.first = first
        self.second = second
        super().__init__(f"profile conflict at {position}: {first} vs {second}")


class Unconstrained(ClverifyError):
    def __init__(self, position):
        self.position = position
        super().__init__(f"profile position {position} is never bound to a component type")


class BoundExhausted(ClverifyError):
    """A search hit its node/marking budget before it could certify an answer."""


class CapExceeded(ClverifyError):
    pass


class NotEnabled(ClverifyError):
    pass


class UnknownVariable(ClverifyError):
    pass


class StartRuleMismatch(ClverifyError):
    pass


class UnboundVariable(ClverifyError):
    pass


class UniverseCapExceeded(CapExceeded):
    pass


class UniverseMismatch(ClverifyError):
    pass


class UnknownState(InputError):
    pass


class WordTooShort(InputError):
    pass
