"""Error types raised by the language front end and interpreter."""

from __future__ import annotations


class AblSyntaxError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{msg} (line {line}, col {col})" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


class ValidationError(Exception):
    """Static rejection of a parsed class.

    kind is one of: freeVariable, unknownActivity, badBlockingPlacement,
    missingNext, asyncForbidden.
    """

    def __init__(self, kind: str, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{kind}: {msg}" + (f" (line {line}, col {col})" if line else ""))
        self.kind = kind
        self.msg = msg
        self.line = line
        self.col = col


class AblRuntimeError(Exception):
    """Agent-level runtime fault (typeMismatch, unknownName, arityMismatch)."""

    def __init__(self, kind: str, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{kind}: {msg}" + (f" (line {line}, col {col})" if line else ""))
        self.kind = kind
        self.msg = msg
        self.line = line
        self.col = col
