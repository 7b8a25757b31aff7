"""AST node definitions.

Nodes compare structurally; source positions are carried for error reports
but excluded from equality so parse(canonicalize(x)) == x holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Pos:
    line: int = 0
    col: int = 0


NO_POS = Pos()


@dataclass(frozen=True, eq=False)
class Node:
    pos: Pos = field(default=NO_POS, repr=False)

    def _key(self):
        return tuple(
            getattr(self, f) for f in self.__dataclass_fields__ if f != "pos"
        )

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__,))


# --- expressions ---


@dataclass(frozen=True, eq=False)
class Lit(Node):
    value: object = None  # None | bool | float | str


@dataclass(frozen=True, eq=False)
class Ident(Node):
    name: str = ""


@dataclass(frozen=True, eq=False)
class This(Node):
    pass


@dataclass(frozen=True, eq=False)
class Member(Node):
    obj: "Expr" = None
    field_name: str = ""


@dataclass(frozen=True, eq=False)
class Index(Node):
    obj: "Expr" = None
    index: "Expr" = None


@dataclass(frozen=True, eq=False)
class ArrayLit(Node):
    items: tuple = ()


@dataclass(frozen=True, eq=False)
class RecordLit(Node):
    pairs: tuple = ()  # tuple[(str, Expr), ...] (insertion order)


@dataclass(frozen=True, eq=False)
class Unary(Node):
    op: str = ""
    operand: "Expr" = None


@dataclass(frozen=True, eq=False)
class Binary(Node):
    op: str = ""
    left: "Expr" = None
    right: "Expr" = None


@dataclass(frozen=True, eq=False)
class Ternary(Node):
    cond: "Expr" = None
    then: "Expr" = None
    orelse: "Expr" = None


@dataclass(frozen=True, eq=False)
class Call(Node):
    callee: "Expr" = None
    args: tuple = ()


@dataclass(frozen=True, eq=False)
class Func(Node):
    params: tuple = ()
    body: tuple = ()  # tuple[Stmt, ...]


Expr = Union[Lit, Ident, This, Member, Index, ArrayLit, RecordLit,
             Unary, Binary, Ternary, Call, Func]


# --- statements ---


@dataclass(frozen=True, eq=False)
class Let(Node):
    name: str = ""
    expr: Expr = None


@dataclass(frozen=True, eq=False)
class Assign(Node):
    target: Expr = None  # Ident | Member | Index
    expr: Expr = None


@dataclass(frozen=True, eq=False)
class If(Node):
    cond: Expr = None
    then: tuple = ()
    orelse: tuple = ()


@dataclass(frozen=True, eq=False)
class While(Node):
    cond: Expr = None
    body: tuple = ()


@dataclass(frozen=True, eq=False)
class ForOf(Node):
    var: str = ""
    iterable: Expr = None
    body: tuple = ()


@dataclass(frozen=True, eq=False)
class Return(Node):
    expr: Optional[Expr] = None


@dataclass(frozen=True, eq=False)
class ExprStmt(Node):
    expr: Expr = None


Stmt = Union[Let, Assign, If, While, ForOf, Return, ExprStmt]


# --- compiled program objects ---


@dataclass(frozen=True)
class FunctionValue:
    """A pure code value: parameters and body, nothing captured."""

    params: tuple
    body: tuple

    def __eq__(self, other):
        return (
            isinstance(other, FunctionValue)
            and self.params == other.params
            and self.body == other.body
        )

    def __hash__(self):
        return hash((self.params, len(self.body)))


@dataclass(frozen=True)
class Static:
    target: str


@dataclass(frozen=True)
class Dynamic:
    fn: FunctionValue
    bound_arg: object = None
    has_bound_arg: bool = False


TransitionRule = Union[Static, Dynamic]


@dataclass
class AgentClass:
    """A parsed, validated agent class constructor.

    bodyVarInit keeps declaration order; activities/transitions/handlers
    preserve source order everywhere (map iteration order is insertion
    order throughout the runtime).
    """

    name: str
    params: tuple
    body_init: dict  # str -> Expr
    activities: dict  # str -> FunctionValue
    transitions: dict  # str -> TransitionRule
    handlers: dict  # str -> FunctionValue
    next: Optional[str]
