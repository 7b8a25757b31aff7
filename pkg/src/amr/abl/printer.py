"""Canonical source emission: parse(canonicalize(x)) == x structurally.

Output is deterministic: two-space indent, `let` for declarations, braces
on every block, map fields in insertion order, minimal parentheses driven
by operator precedence.
"""

from __future__ import annotations

from ..values import number_text
from .nodes import (
    AgentClass, ArrayLit, Assign, Binary, Call, Dynamic, ExprStmt, ForOf,
    Func, FunctionValue, Ident, If, Index, Let, Lit, Member, RecordLit,
    Return, Static, Ternary, This, Unary, While,
)

_PREC = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, ">": 4, "<=": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
_TERNARY_PREC = 0
_UNARY_PREC = 7

_IDENT_OK = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_$")


def _is_plain_key(key: str) -> bool:
    return bool(key) and not key[0].isdigit() and all(c in _IDENT_OK for c in key)


def quote_string(s: str) -> str:
    out = ["'"]
    for c in s:
        if c == "'":
            out.append("\\'")
        elif c == "\\":
            out.append("\\\\")
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        else:
            out.append(c)
    out.append("'")
    return "".join(out)


def expr_text(e, prec: int = -1) -> str:
    if isinstance(e, Lit):
        v = e.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return quote_string(v)
        return number_text(v)
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, This):
        return "this"
    if isinstance(e, Member):
        return f"{expr_text(e.obj, _UNARY_PREC + 1)}.{e.field_name}"
    if isinstance(e, Index):
        return f"{expr_text(e.obj, _UNARY_PREC + 1)}[{expr_text(e.index)}]"
    if isinstance(e, ArrayLit):
        return "[" + ", ".join(expr_text(x) for x in e.items) + "]"
    if isinstance(e, RecordLit):
        parts = []
        for k, v in e.pairs:
            key = k if _is_plain_key(k) else quote_string(k)
            parts.append(f"{key}: {expr_text(v)}")
        return "{ " + ", ".join(parts) + " }" if parts else "{}"
    if isinstance(e, Unary):
        inner = expr_text(e.operand, _UNARY_PREC)
        if e.op == "-" and inner.startswith("-"):
            inner = " " + inner  # keep '- -x' from lexing as '--'
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        text = f"{expr_text(e.left, p)} {e.op} {expr_text(e.right, p + 1)}"
        return f"({text})" if p < prec else text
    if isinstance(e, Ternary):
        text = (f"{expr_text(e.cond, _TERNARY_PREC + 1)} ? "
                f"{expr_text(e.then)} : {expr_text(e.orelse)}")
        return f"({text})" if _TERNARY_PREC < prec else text
    if isinstance(e, Call):
        callee = expr_text(e.callee, _UNARY_PREC + 1)
        return f"{callee}(" + ", ".join(expr_text(a) for a in e.args) + ")"
    if isinstance(e, Func):
        return func_text(e.params, e.body, 0)
    raise TypeError(f"unprintable node {type(e).__name__}")


def func_text(params, body, indent: int) -> str:
    head = "(" + ", ".join(params) + ") => "
    return head + block_text(body, indent)


def block_text(stmts, indent: int) -> str:
    if not stmts:
        return "{}"
    pad = "  " * (indent + 1)
    lines = ["{"]
    for s in stmts:
        lines.append(pad + stmt_text(s, indent + 1))
    lines.append("  " * indent + "}")
    return "\n".join(lines)


def stmt_text(s, indent: int) -> str:
    if isinstance(s, Let):
        return f"let {s.name} = {expr_text(s.expr)};"
    if isinstance(s, Assign):
        return f"{expr_text(s.target)} = {expr_text(s.expr)};"
    if isinstance(s, If):
        text = f"if ({expr_text(s.cond)}) {block_text(s.then, indent)}"
        if s.orelse:
            text += f" else {block_text(s.orelse, indent)}"
        return text
    if isinstance(s, While):
        return f"while ({expr_text(s.cond)}) {block_text(s.body, indent)}"
    if isinstance(s, ForOf):
        return (f"for (let {s.var} of {expr_text(s.iterable)}) "
                f"{block_text(s.body, indent)}")
    if isinstance(s, Return):
        return "return;" if s.expr is None else f"return {expr_text(s.expr)};"
    if isinstance(s, ExprStmt):
        return f"{expr_text(s.expr)};"
    raise TypeError(f"unprintable statement {type(s).__name__}")


def function_source(fn: FunctionValue) -> str:
    """Canonical text of a function value (the serialization form)."""
    return func_text(fn.params, fn.body, 0)


def class_source(cls: AgentClass) -> str:
    lines = [f"function {cls.name}(" + ", ".join(cls.params) + ") {"]
    for name, expr in cls.body_init.items():
        lines.append(f"  this.{name} = {expr_text(expr)};")
    lines.append("  this.act = {")
    for name, fn in cls.activities.items():
        key = name if _is_plain_key(name) else quote_string(name)
        lines.append(f"    {key}: {func_text(fn.params, fn.body, 2)},")
    lines.append("  };")
    lines.append("  this.trans = {")
    for name, rule in cls.transitions.items():
        key = name if _is_plain_key(name) else quote_string(name)
        if isinstance(rule, Static):
            lines.append(f"    {key}: {quote_string(rule.target)},")
        else:
            lines.append(f"    {key}: {func_text(rule.fn.params, rule.fn.body, 2)},")
    lines.append("  };")
    if cls.handlers:
        lines.append("  this.on = {")
        for name, fn in cls.handlers.items():
            key = name if _is_plain_key(name) else quote_string(name)
            lines.append(f"    {key}: {func_text(fn.params, fn.body, 2)},")
        lines.append("  };")
    if cls.next is not None:
        lines.append(f"  this.next = {quote_string(cls.next)};")
    lines.append("}")
    return "\n".join(lines)


def canonicalize(x) -> str:
    """Deterministic text for a class or function value."""
    if isinstance(x, AgentClass):
        return class_source(x)
    if isinstance(x, FunctionValue):
        return function_source(x)
    if isinstance(x, Func):
        return function_source(FunctionValue(params=x.params, body=x.body))
    raise TypeError(f"cannot canonicalize {type(x).__name__}")
