"""Tree-walking interpreter with fuel metering and a closed namespace.

Execution of a function touches only its locals/params, the owning agent's
body store (`this`), and the builtin environment it was given.  Fuel is
decremented on every statement and loop iteration; exhaustion or passing
the wall-clock slice deadline raises at a statement boundary, never in the
middle of one, so stores are always consistent when control returns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..values import deep_equal, truthy, value_text
from .errors import AblRuntimeError
from .nodes import (
    ArrayLit, Assign, Binary, Call, ExprStmt, ForOf, Func, FunctionValue,
    Ident, If, Index, Let, Lit, Member, RecordLit, Return, Ternary, This,
    Unary, While,
)

DEFAULT_STEPS = 2_000_000
CLOCK_CHECK_INTERVAL = 256
MAX_CALL_DEPTH = 64


class ScheduleInterrupt(Exception):
    """Time slice or step budget exhausted."""


class AgentStopInterrupt(Exception):
    """Agent ended its own execution (kill, moveto); not an error."""


@dataclass
class BlockReason:
    kind: str  # "sleep" | "tuple"
    timeout_ms: Optional[float] = None
    # tuple waits
    op: str = ""  # "inp" | "rd" | "alt"
    patterns: list = field(default_factory=list)
    callback: object = None


class BlockSignal(Exception):
    def __init__(self, reason: BlockReason):
        super().__init__(reason.kind)
        self.reason = reason


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class Fuel:
    """Step budget plus a wall-clock slice deadline."""

    __slots__ = ("steps_remaining", "slice_deadline", "clock", "_tick")

    def __init__(self, steps: int = DEFAULT_STEPS,
                 slice_ms: Optional[float] = None,
                 clock: Callable[[], float] = time.monotonic):
        self.steps_remaining = steps
        self.clock = clock
        self.slice_deadline = (clock() + slice_ms / 1000.0) if slice_ms else None
        self._tick = 0

    def spend(self):
        self.steps_remaining -= 1
        if self.steps_remaining <= 0:
            raise ScheduleInterrupt()
        self._tick += 1
        if self._tick >= CLOCK_CHECK_INTERVAL:
            self._tick = 0
            if self.slice_deadline is not None and self.clock() > self.slice_deadline:
                raise ScheduleInterrupt()


class Builtin:
    """Host operation exposed to agent code.

    attrs holds sub-operations reachable by member access (inp.try).
    """

    __slots__ = ("name", "fn", "min_args", "max_args", "wants_interp", "attrs")

    def __init__(self, name: str, fn, min_args: int = 0,
                 max_args: Optional[int] = None, wants_interp: bool = False,
                 attrs: Optional[dict] = None):
        self.name = name
        self.fn = fn
        self.min_args = min_args
        self.max_args = max_args
        self.wants_interp = wants_interp
        self.attrs = attrs

    def __repr__(self):
        return f"<builtin {self.name}>"


@dataclass
class Closure:
    """A function value plus the frame it was created in.

    Class-level functions carry no frame; literals created during a call
    may reach enclosing locals while the frames are live (callbacks run
    within the same statement).  Only the code travels on serialization.
    """

    fn: FunctionValue
    frame: Optional["Frame"] = None

    def __repr__(self):
        return f"<function/{len(self.fn.params)}>"


class Frame:
    __slots__ = ("vars", "parent")

    def __init__(self, parent: Optional["Frame"] = None):
        self.vars: dict = {}
        self.parent = parent

    def lookup(self, name: str):
        f = self
        while f is not None:
            if name in f.vars:
                return f, f.vars[name]
            f = f.parent
        return None, None

    def assign(self, name: str, value) -> bool:
        f = self
        while f is not None:
            if name in f.vars:
                f.vars[name] = value
                return True
            f = f.parent
        return False


@dataclass
class EvalOutcome:
    kind: str  # "returned" | "blocked" | "schedule" | "error"
    value: object = None
    reason: Optional[BlockReason] = None
    error: Optional[AblRuntimeError] = None

    @property
    def returned(self) -> bool:
        return self.kind == "returned"


class Interp:
    def __init__(self, env: dict, self_store: dict, fuel: Fuel):
        self.env = env
        self.this = self_store
        self.fuel = fuel
        self.depth = 0

    # -- calls --

    def call_function(self, value, args: list):
        if isinstance(value, Builtin):
            n = len(args)
            if n < value.min_args or (value.max_args is not None and n > value.max_args):
                raise AblRuntimeError("arityMismatch",
                                      f"{value.name} called with {n} arguments")
            if value.wants_interp:
                return value.fn(self, *args)
            return value.fn(*args)
        if isinstance(value, (Closure, FunctionValue)):
            closure = value if isinstance(value, Closure) else Closure(value)
            if self.depth >= MAX_CALL_DEPTH:
                raise AblRuntimeError("typeMismatch", "call depth exceeded")
            frame = Frame(closure.frame)
            params = closure.fn.params
            for i, p in enumerate(params):
                frame.vars[p] = args[i] if i < len(args) else None
            self.depth += 1
            try:
                self.exec_block(closure.fn.body, frame)
            except _ReturnSignal as r:
                return r.value
            finally:
                self.depth -= 1
            return None
        raise AblRuntimeError("typeMismatch", f"{value_text(value)} is not callable")

    # -- statements --

    def exec_block(self, stmts, frame: Frame):
        for s in stmts:
            self.fuel.spend()
            self.exec_stmt(s, frame)

    def exec_stmt(self, s, frame: Frame):
        if isinstance(s, Let):
            frame.vars[s.name] = self.eval_expr(s.expr, frame)
        elif isinstance(s, Assign):
            self.exec_assign(s, frame)
        elif isinstance(s, If):
            if truthy(self.eval_expr(s.cond, frame)):
                self.exec_block(s.then, frame)
            else:
                self.exec_block(s.orelse, frame)
        elif isinstance(s, While):
            while True:
                self.fuel.spend()
                if not truthy(self.eval_expr(s.cond, frame)):
                    break
                self.exec_block(s.body, frame)
        elif isinstance(s, ForOf):
            seq = self._iterable(self.eval_expr(s.iterable, frame), s)
            for item in seq:
                self.fuel.spend()
                frame.vars[s.var] = item
                self.exec_block(s.body, frame)
        elif isinstance(s, Return):
            value = self.eval_expr(s.expr, frame) if s.expr is not None else None
            raise _ReturnSignal(value)
        elif isinstance(s, ExprStmt):
            self.eval_expr(s.expr, frame)
        else:
            raise AblRuntimeError("typeMismatch",
                                  f"unexpected statement {type(s).__name__}")

    @staticmethod
    def _iterable(v, s):
        if isinstance(v, list):
            return list(v)
        if isinstance(v, dict):
            return list(v.values())
        if isinstance(v, str):
            return list(v)
        if isinstance(v, float) or isinstance(v, int):
            return [float(i) for i in range(int(v))]
        raise AblRuntimeError("typeMismatch", "for-of needs an array, record, "
                              "string, or count", s.pos.line, s.pos.col)

    def exec_assign(self, s: Assign, frame: Frame):
        value = self.eval_expr(s.expr, frame)
        t = s.target
        if isinstance(t, Ident):
            if not frame.assign(t.name, value):
                raise AblRuntimeError("unknownName",
                                      f"assignment to undeclared name '{t.name}'",
                                      t.pos.line, t.pos.col)
        elif isinstance(t, Member):
            obj = self.eval_expr(t.obj, frame)
            if isinstance(obj, dict):
                obj[t.field_name] = value
            else:
                raise AblRuntimeError("typeMismatch",
                                      f"cannot set field on {value_text(obj)}",
                                      t.pos.line, t.pos.col)
        elif isinstance(t, Index):
            obj = self.eval_expr(t.obj, frame)
            idx = self.eval_expr(t.index, frame)
            if isinstance(obj, list):
                i = self._int_index(idx, t)
                if 0 <= i < len(obj):
                    obj[i] = value
                elif i == len(obj):
                    obj.append(value)
                else:
                    raise AblRuntimeError("typeMismatch",
                                          f"index {i} out of range",
                                          t.pos.line, t.pos.col)
            elif isinstance(obj, dict):
                if not isinstance(idx, str):
                    raise AblRuntimeError("typeMismatch", "record keys are strings",
                                          t.pos.line, t.pos.col)
                obj[idx] = value
            else:
                raise AblRuntimeError("typeMismatch",
                                      f"cannot index {value_text(obj)}",
                                      t.pos.line, t.pos.col)

    @staticmethod
    def _int_index(idx, node) -> int:
        if isinstance(idx, bool) or not isinstance(idx, (int, float)):
            raise AblRuntimeError("typeMismatch", "array index must be a number",
                                  node.pos.line, node.pos.col)
        return int(idx)

    # -- expressions --

    def eval_expr(self, e, frame: Frame):
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Ident):
            f, v = frame.lookup(e.name)
            if f is not None:
                return v
            if e.name in self.env:
                return self.env[e.name]
            raise AblRuntimeError("unknownName", f"unknown name '{e.name}'",
                                  e.pos.line, e.pos.col)
        if isinstance(e, This):
            return self.this
        if isinstance(e, Member):
            obj = self.eval_expr(e.obj, frame)
            return self._member(obj, e.field_name, e)
        if isinstance(e, Index):
            obj = self.eval_expr(e.obj, frame)
            idx = self.eval_expr(e.index, frame)
            if isinstance(obj, list):
                i = self._int_index(idx, e)
                return obj[i] if 0 <= i < len(obj) else None
            if isinstance(obj, str):
                i = self._int_index(idx, e)
                return obj[i] if 0 <= i < len(obj) else None
            if isinstance(obj, dict):
                return obj.get(idx) if isinstance(idx, str) else None
            raise AblRuntimeError("typeMismatch",
                                  f"cannot index {value_text(obj)}",
                                  e.pos.line, e.pos.col)
        if isinstance(e, ArrayLit):
            return [self.eval_expr(x, frame) for x in e.items]
        if isinstance(e, RecordLit):
            return {k: self.eval_expr(v, frame) for k, v in e.pairs}
        if isinstance(e, Unary):
            v = self.eval_expr(e.operand, frame)
            if e.op == "!":
                return not truthy(v)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise AblRuntimeError("typeMismatch", "unary '-' needs a number",
                                      e.pos.line, e.pos.col)
            return -float(v)
        if isinstance(e, Binary):
            return self._binary(e, frame)
        if isinstance(e, Ternary):
            if truthy(self.eval_expr(e.cond, frame)):
                return self.eval_expr(e.then, frame)
            return self.eval_expr(e.orelse, frame)
        if isinstance(e, Call):
            callee = self.eval_expr(e.callee, frame)
            args = [self.eval_expr(a, frame) for a in e.args]
            try:
                return self.call_function(callee, args)
            except AblRuntimeError as err:
                if not err.line:
                    err.line, err.col = e.pos.line, e.pos.col
                raise
        if isinstance(e, Func):
            return Closure(FunctionValue(params=e.params, body=e.body), frame)
        raise AblRuntimeError("typeMismatch", f"unexpected node {type(e).__name__}")

    def _member(self, obj, name: str, e):
        if isinstance(obj, dict):
            return obj.get(name)
        if isinstance(obj, (list, str)) and name == "length":
            return float(len(obj))
        if isinstance(obj, Builtin) and obj.attrs and name in obj.attrs:
            return obj.attrs[name]
        raise AblRuntimeError("typeMismatch",
                              f"cannot read field '{name}' of {value_text(obj)}",
                              e.pos.line, e.pos.col)

    def _binary(self, e: Binary, frame: Frame):
        op = e.op
        if op == "&&":
            left = self.eval_expr(e.left, frame)
            return self.eval_expr(e.right, frame) if truthy(left) else left
        if op == "||":
            left = self.eval_expr(e.left, frame)
            return left if truthy(left) else self.eval_expr(e.right, frame)
        left = self.eval_expr(e.left, frame)
        right = self.eval_expr(e.right, frame)
        if op == "==":
            return deep_equal(left, right)
        if op == "!=":
            return not deep_equal(left, right)
        if op == "+":
            if isinstance(left, str) or isinstance(right, str):
                return value_text(left) + value_text(right)
            return self._num(left, e) + self._num(right, e)
        if op in ("-", "*", "/", "%"):
            a, b = self._num(left, e), self._num(right, e)
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if b == 0.0:
                    if a == 0.0 or math.isnan(a):
                        return math.nan
                    return math.copysign(math.inf, a) * math.copysign(1.0, b)
                return a / b
            if b == 0.0 or math.isnan(a) or math.isinf(a):
                return math.nan
            return math.fmod(a, b)
        if op in ("<", ">", "<=", ">="):
            if isinstance(left, str) and isinstance(right, str):
                a, b = left, right
            else:
                a, b = self._num(left, e), self._num(right, e)
            if op == "<":
                return a < b
            if op == ">":
                return a > b
            if op == "<=":
                return a <= b
            return a >= b
        raise AblRuntimeError("typeMismatch", f"unknown operator {op}")

    @staticmethod
    def _num(v, e) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise AblRuntimeError("typeMismatch",
                                  f"expected a number, got {value_text(v)}",
                                  e.pos.line, e.pos.col)
        return float(v)


def evaluate_function(fn, self_store: dict, args: list, env: dict,
                      fuel: Optional[Fuel] = None) -> EvalOutcome:
    """Run a function value to an outcome; never lets agent faults escape."""
    fuel = fuel or Fuel()
    interp = Interp(env, self_store, fuel)
    try:
        value = interp.call_function(fn, list(args))
        return EvalOutcome("returned", value=value)
    except BlockSignal as b:
        return EvalOutcome("blocked", reason=b.reason)
    except ScheduleInterrupt:
        return EvalOutcome("schedule")
    except AgentStopInterrupt:
        return EvalOutcome("returned")
    except AblRuntimeError as err:
        return EvalOutcome("error", error=err)
    except RecursionError:
        return EvalOutcome("error", error=AblRuntimeError("typeMismatch",
                                                          "recursion too deep"))
    except ZeroDivisionError:
        return EvalOutcome("error", error=AblRuntimeError("typeMismatch",
                                                          "division fault"))


def call_value(interp: Interp, value, args: list):
    """Invoke an agent-supplied callback from inside a builtin."""
    return interp.call_function(value, list(args))
