"""Static validation of parsed agent classes.

Checks, in order: the transition graph references real activities, a start
activity exists, no function references a name outside its lexical scope
plus the builtin environment, and blocking operations sit only in legal
positions (at most one per activity, terminal, or inside scheduling-block
elements).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError
from .nodes import (
    AgentClass, ArrayLit, Assign, Binary, Call, Dynamic, ExprStmt, ForOf,
    Func, FunctionValue, Ident, If, Index, Let, Lit, Member, RecordLit,
    Return, Static, Ternary, This, Unary, While,
)

BLOCKING = {"sleep", "inp", "rd", "alt"}

# Call-capable namespaces whose members are distinct table entries.
DOTTED_ROOTS = {"act", "trans", "timer", "inp", "rd", "alt"}


@dataclass
class AnalysisReport:
    names_used: set = field(default_factory=set)
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _builtin_universe() -> set:
    from ..aios.optable import NAME_UNIVERSE
    return NAME_UNIVERSE


# --- scope / free-variable walk ---


class _Scope:
    __slots__ = ("names", "parent")

    def __init__(self, names, parent=None):
        self.names = set(names)
        self.parent = parent

    def resolves(self, name: str) -> bool:
        s = self
        while s is not None:
            if name in s.names:
                return True
            s = s.parent
        return False


def _check_expr(e, scope: _Scope, env: set):
    if isinstance(e, (Lit, This)) or e is None:
        return
    if isinstance(e, Ident):
        if not scope.resolves(e.name) and e.name not in env:
            raise ValidationError("freeVariable",
                                  f"unknown name '{e.name}'",
                                  e.pos.line, e.pos.col)
        return
    if isinstance(e, Member):
        _check_expr(e.obj, scope, env)
        return
    if isinstance(e, Index):
        _check_expr(e.obj, scope, env)
        _check_expr(e.index, scope, env)
        return
    if isinstance(e, ArrayLit):
        for x in e.items:
            _check_expr(x, scope, env)
        return
    if isinstance(e, RecordLit):
        for _, v in e.pairs:
            _check_expr(v, scope, env)
        return
    if isinstance(e, Unary):
        _check_expr(e.operand, scope, env)
        return
    if isinstance(e, Binary):
        _check_expr(e.left, scope, env)
        _check_expr(e.right, scope, env)
        return
    if isinstance(e, Ternary):
        _check_expr(e.cond, scope, env)
        _check_expr(e.then, scope, env)
        _check_expr(e.orelse, scope, env)
        return
    if isinstance(e, Call):
        _check_expr(e.callee, scope, env)
        for a in e.args:
            _check_expr(a, scope, env)
        return
    if isinstance(e, Func):
        _check_block(e.body, _Scope(e.params, scope), env)
        return
    raise TypeError(f"unexpected node {type(e).__name__}")


def _check_block(stmts, scope: _Scope, env: set):
    for s in stmts:
        if isinstance(s, Let):
            _check_expr(s.expr, scope, env)
            scope.names.add(s.name)
        elif isinstance(s, Assign):
            _check_expr(s.target, scope, env)
            _check_expr(s.expr, scope, env)
        elif isinstance(s, If):
            _check_expr(s.cond, scope, env)
            _check_block(s.then, _Scope((), scope), env)
            _check_block(s.orelse, _Scope((), scope), env)
        elif isinstance(s, While):
            _check_expr(s.cond, scope, env)
            _check_block(s.body, _Scope((), scope), env)
        elif isinstance(s, ForOf):
            _check_expr(s.iterable, scope, env)
            _check_block(s.body, _Scope((s.var,), scope), env)
        elif isinstance(s, Return):
            _check_expr(s.expr, scope, env)
        elif isinstance(s, ExprStmt):
            _check_expr(s.expr, scope, env)
        else:
            raise TypeError(f"unexpected statement {type(s).__name__}")


# --- blocking placement ---


def _blocking_name(e) -> str:
    """Name of the blocking op if expression e is a blocking call."""
    if not isinstance(e, Call):
        return ""
    c = e.callee
    if isinstance(c, Ident) and c.name in BLOCKING:
        return c.name
    if (isinstance(c, Member) and isinstance(c.obj, Ident)
            and c.obj.name in BLOCKING and c.field_name == "try"):
        return f"{c.obj.name}.try"
    return ""


def _is_block_ctor(e) -> str:
    if isinstance(e, Call) and isinstance(e.callee, Ident) and e.callee.name in ("B", "L", "I"):
        return e.callee.name
    return ""


def _block_elements(call: Call):
    """Function literals acting as scheduling-block elements of B/L/I."""
    kind = call.callee.name
    arrays = []
    if kind == "B" and call.args and isinstance(call.args[0], ArrayLit):
        arrays.append(call.args[0])
    elif kind == "L" and len(call.args) >= 4 and isinstance(call.args[3], ArrayLit):
        arrays.append(call.args[3])
    elif kind == "I" and len(call.args) >= 3 and isinstance(call.args[2], ArrayLit):
        arrays.append(call.args[2])
    for arr in arrays:
        for item in arr.items:
            if isinstance(item, Func):
                yield item


def _scan_blocking(stmts, hits: list, warnings: list, element_funcs: set):
    """Collect (name, stmt, terminal) for blocking calls outside nested
    function literals; recursion into literals only reports violations."""

    def walk_expr(e, in_nested: bool):
        if e is None or isinstance(e, (Lit, Ident, This)):
            return
        name = _blocking_name(e)
        if name:
            hits.append((name, e, False, in_nested))
            # still scan args (callbacks must stay clean)
        kind = _is_block_ctor(e)
        if kind:
            for el in _block_elements(e):
                element_funcs.add(id(el))
        if isinstance(e, Member):
            walk_expr(e.obj, in_nested)
        elif isinstance(e, Index):
            walk_expr(e.obj, in_nested)
            walk_expr(e.index, in_nested)
        elif isinstance(e, ArrayLit):
            for x in e.items:
                walk_expr(x, in_nested)
        elif isinstance(e, RecordLit):
            for _, v in e.pairs:
                walk_expr(v, in_nested)
        elif isinstance(e, Unary):
            walk_expr(e.operand, in_nested)
        elif isinstance(e, Binary):
            walk_expr(e.left, in_nested)
            walk_expr(e.right, in_nested)
        elif isinstance(e, Ternary):
            walk_expr(e.cond, in_nested)
            walk_expr(e.then, in_nested)
            walk_expr(e.orelse, in_nested)
        elif isinstance(e, Call):
            walk_expr(e.callee, in_nested)
            for a in e.args:
                walk_expr(a, in_nested)
        elif isinstance(e, Func):
            if id(e) in element_funcs:
                _check_blocking_body(e.body, f"scheduling-block element", warnings)
            else:
                _require_nonblocking(e.body, "nested function")

    def walk_stmts(body, terminal_ids):
        for s in body:
            if isinstance(s, ExprStmt):
                name = _blocking_name(s.expr)
                if name:
                    hits.append((name, s.expr, id(s) in terminal_ids, False))
                    kind = _is_block_ctor(s.expr)
                    if kind:
                        for el in _block_elements(s.expr):
                            element_funcs.add(id(el))
                    for a in s.expr.args:
                        walk_expr(a, False)
                    continue
                walk_expr(s.expr, False)
            elif isinstance(s, Let):
                walk_expr(s.expr, False)
            elif isinstance(s, Assign):
                walk_expr(s.target, False)
                walk_expr(s.expr, False)
            elif isinstance(s, If):
                walk_expr(s.cond, False)
                sub_term = _terminal_ids(s.then) if id(s) in terminal_ids else set()
                walk_stmts(s.then, sub_term)
                sub_term = _terminal_ids(s.orelse) if id(s) in terminal_ids else set()
                walk_stmts(s.orelse, sub_term)
            elif isinstance(s, (While, ForOf)):
                walk_expr(s.cond if isinstance(s, While) else s.iterable, False)
                walk_stmts(s.body, set())  # loops are never terminal
            elif isinstance(s, Return):
                walk_expr(s.expr, False)

    walk_stmts(stmts, _terminal_ids(stmts))


def _terminal_ids(stmts) -> set:
    return {id(stmts[-1])} if stmts else set()


def _require_nonblocking(stmts, where: str):
    hits: list = []
    _scan_blocking(stmts, hits, [], set())
    for name, node, _, _ in hits:
        raise ValidationError(
            "badBlockingPlacement",
            f"blocking operation '{name}' not allowed in {where}",
            node.pos.line, node.pos.col)


def _check_blocking_body(stmts, where: str, warnings: list):
    """A body allowed at most one terminal blocking call."""
    hits: list = []
    element_funcs: set = set()
    _scan_blocking(stmts, hits, warnings, element_funcs)
    top = [h for h in hits]
    if len(top) > 1:
        name, node, _, _ = top[1]
        raise ValidationError(
            "badBlockingPlacement",
            f"more than one blocking operation in {where} ('{name}')",
            node.pos.line, node.pos.col)
    if top:
        name, node, terminal, nested = top[0]
        if nested or not terminal:
            raise ValidationError(
                "badBlockingPlacement",
                f"blocking operation '{name}' must be the final statement of {where}",
                node.pos.line, node.pos.col)


def _scan_moveto_warnings(name: str, fn: FunctionValue, warnings: list):
    def walk(e, inside_block_el: bool):
        if isinstance(e, Call):
            if isinstance(e.callee, Ident) and e.callee.name == "moveto" and inside_block_el:
                warnings.append(
                    f"{name}: moveto inside a scheduling block bloats snapshots")
            kind = _is_block_ctor(e)
            elements = set(id(x) for x in _block_elements(e)) if kind else set()
            walk_any(e.callee, inside_block_el)
            for a in e.args:
                if isinstance(a, ArrayLit):
                    for item in a.items:
                        walk_any(item, inside_block_el or id(item) in elements)
                else:
                    walk_any(a, inside_block_el)
            return
        walk_any(e, inside_block_el)

    def walk_any(e, inside):
        if e is None or isinstance(e, (Lit, Ident, This)):
            return
        if isinstance(e, Call):
            walk(e, inside)
        elif isinstance(e, Func):
            for s in e.body:
                walk_stmt(s, inside)
        elif isinstance(e, Member):
            walk_any(e.obj, inside)
        elif isinstance(e, Index):
            walk_any(e.obj, inside)
            walk_any(e.index, inside)
        elif isinstance(e, (ArrayLit,)):
            for x in e.items:
                walk_any(x, inside)
        elif isinstance(e, RecordLit):
            for _, v in e.pairs:
                walk_any(v, inside)
        elif isinstance(e, Unary):
            walk_any(e.operand, inside)
        elif isinstance(e, Binary):
            walk_any(e.left, inside)
            walk_any(e.right, inside)
        elif isinstance(e, Ternary):
            walk_any(e.cond, inside)
            walk_any(e.then, inside)
            walk_any(e.orelse, inside)

    def walk_stmt(s, inside):
        for attr in ("expr", "cond", "iterable", "target"):
            walk_any(getattr(s, attr, None), inside)
        for attr in ("then", "orelse", "body"):
            for sub in getattr(s, attr, ()):
                walk_stmt(sub, inside)

    for s in fn.body:
        walk_stmt(s, False)


# --- entry points ---


def validate_class(cls: AgentClass, env_names=None) -> list:
    """Raise ValidationError on the first defect; return warnings."""
    env = set(env_names) if env_names is not None else _builtin_universe()
    warnings: list = []

    if cls.next is None:
        raise ValidationError("missingNext",
                              f"class '{cls.name}' sets no start activity")
    if cls.next not in cls.activities:
        raise ValidationError("unknownActivity",
                              f"start activity '{cls.next}' is not defined")
    for key, rule in cls.transitions.items():
        if key not in cls.activities:
            raise ValidationError("unknownActivity",
                                  f"transition from unknown activity '{key}'")
        if isinstance(rule, Static) and rule.target not in cls.activities:
            raise ValidationError("unknownActivity",
                                  f"transition '{key}' targets unknown activity "
                                  f"'{rule.target}'")

    ctor_scope = _Scope(cls.params)
    for name, expr in cls.body_init.items():
        _check_expr(expr, ctor_scope, env)

    for name, fn in cls.activities.items():
        _check_block(fn.body, _Scope(fn.params), env)
        _check_blocking_body(fn.body, f"activity '{name}'", warnings)
        _scan_moveto_warnings(name, fn, warnings)
    for name, rule in cls.transitions.items():
        if isinstance(rule, Dynamic):
            if len(rule.fn.params) > 1:
                raise ValidationError(
                    "unknownActivity",
                    f"transition '{name}' function takes at most one parameter")
            _check_block(rule.fn.body, _Scope(rule.fn.params), env)
            _require_nonblocking(rule.fn.body, f"transition '{name}'")
    for name, fn in cls.handlers.items():
        _check_block(fn.body, _Scope(fn.params), env)
        _require_nonblocking(fn.body, f"handler '{name}'")
    for name, expr in cls.body_init.items():
        if isinstance(expr, Func):
            _require_nonblocking(expr.body, f"body variable '{name}'")

    return warnings


def validate_function(fn: FunctionValue, env_names=None):
    """Standalone check used when code arrives over the wire."""
    env = set(env_names) if env_names is not None else _builtin_universe()
    _check_block(fn.body, _Scope(fn.params), env)


def analyze_names(cls: AgentClass) -> set:
    """Environment-level names the class touches (roots and dotted ops)."""
    used: set = set()

    def expr(e, scope: _Scope):
        if e is None or isinstance(e, (Lit, This)):
            return
        if isinstance(e, Ident):
            if not scope.resolves(e.name):
                used.add(e.name)
            return
        if isinstance(e, Member):
            if (isinstance(e.obj, Ident) and not scope.resolves(e.obj.name)
                    and e.obj.name in DOTTED_ROOTS):
                used.add(f"{e.obj.name}.{e.field_name}")
                return
            expr(e.obj, scope)
            return
        if isinstance(e, Index):
            expr(e.obj, scope)
            expr(e.index, scope)
        elif isinstance(e, ArrayLit):
            for x in e.items:
                expr(x, scope)
        elif isinstance(e, RecordLit):
            for _, v in e.pairs:
                expr(v, scope)
        elif isinstance(e, Unary):
            expr(e.operand, scope)
        elif isinstance(e, Binary):
            expr(e.left, scope)
            expr(e.right, scope)
        elif isinstance(e, Ternary):
            expr(e.cond, scope)
            expr(e.then, scope)
            expr(e.orelse, scope)
        elif isinstance(e, Call):
            expr(e.callee, scope)
            for a in e.args:
                expr(a, scope)
        elif isinstance(e, Func):
            block(e.body, _Scope(e.params, scope))

    def block(stmts, scope: _Scope):
        for s in stmts:
            if isinstance(s, Let):
                expr(s.expr, scope)
                scope.names.add(s.name)
            elif isinstance(s, Assign):
                expr(s.target, scope)
                expr(s.expr, scope)
            elif isinstance(s, If):
                expr(s.cond, scope)
                block(s.then, _Scope((), scope))
                block(s.orelse, _Scope((), scope))
            elif isinstance(s, While):
                expr(s.cond, scope)
                block(s.body, _Scope((), scope))
            elif isinstance(s, ForOf):
                expr(s.iterable, scope)
                block(s.body, _Scope((s.var,), scope))
            elif isinstance(s, Return):
                expr(s.expr, scope)
            elif isinstance(s, ExprStmt):
                expr(s.expr, scope)

    ctor = _Scope(cls.params)
    for e in cls.body_init.values():
        expr(e, ctor)
    for fn in cls.activities.values():
        block(fn.body, _Scope(fn.params))
    for rule in cls.transitions.values():
        if isinstance(rule, Dynamic):
            block(rule.fn.body, _Scope(rule.fn.params))
    for fn in cls.handlers.values():
        block(fn.body, _Scope(fn.params))
    return used


def validate_against_level(cls: AgentClass, level: int, optable) -> AnalysisReport:
    """Report builtins the class uses that its privilege level lacks."""
    used = analyze_names(cls)
    table = optable.names_for_level(level)
    known = optable.all_names()
    report = AnalysisReport(names_used=used)
    for name in sorted(used):
        if name in table:
            continue
        if "." in name and name not in known:
            # member access on a builtin value, not an op of its own
            if name.split(".", 1)[0] in table:
                continue
        report.violations.append(
            f"'{name}' is not available at privilege level {level}")
    return report
