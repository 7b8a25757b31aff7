"""Pure computation builtins: math, array/record helpers, conversions.

Most helpers are polymorphic over arrays and records; record iteration
visits values in insertion order.  Randomness comes from the owning
world's seeded generator so runs replay exactly.
"""

from __future__ import annotations

import math

from ..abl.errors import AblRuntimeError
from ..abl.interp import Builtin, call_value
from ..values import deep_copy, deep_equal, is_number, truthy, value_text


def _num(v, what="argument") -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise AblRuntimeError("typeMismatch", f"{what} must be a number")
    return float(v)


def _values(x) -> list:
    if isinstance(x, list):
        return x
    if isinstance(x, dict):
        return list(x.values())
    raise AblRuntimeError("typeMismatch", "expected an array or record")


def _is_vec(v) -> bool:
    return isinstance(v, dict) and set(v.keys()) >= {"x", "y"} \
        and is_number(v.get("x")) and is_number(v.get("y"))


def _zip_numeric(a, b, op):
    if is_number(a) and is_number(b):
        return op(float(a), float(b))
    if _is_vec(a) and _is_vec(b):
        return {"x": op(float(a["x"]), float(b["x"])),
                "y": op(float(a["y"]), float(b["y"]))}
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        return [_zip_numeric(x, y, op) for x, y in zip(a, b)]
    raise AblRuntimeError("typeMismatch", "operands do not combine")


def _abs(x):
    if _is_vec(x):
        return math.hypot(float(x["x"]), float(x["y"]))
    return abs(_num(x))


def _angle(v):
    if not _is_vec(v):
        raise AblRuntimeError("typeMismatch", "angle needs a vector")
    return math.atan2(float(v["y"]), float(v["x"]))


def _distance(a, b):
    if _is_vec(a) and _is_vec(b):
        return math.hypot(float(a["x"]) - float(b["x"]),
                          float(a["y"]) - float(b["y"]))
    return abs(_num(a) - _num(b))


def _neg(x):
    if is_number(x):
        return -float(x)
    if _is_vec(x):
        return {"x": -float(x["x"]), "y": -float(x["y"])}
    if isinstance(x, list):
        return [_neg(e) for e in x]
    if isinstance(x, dict):
        return {k: _neg(v) for k, v in x.items()}
    raise AblRuntimeError("typeMismatch", "neg needs numeric data")


def _zero(x):
    if is_number(x):
        return float(x) == 0.0
    if isinstance(x, list):
        return all(_zero(e) for e in x)
    if isinstance(x, dict):
        return all(_zero(v) for v in x.values())
    return False


def _extreme(picker):
    def fn(*args):
        if len(args) == 1:
            vals = [_num(v) for v in _values(args[0])]
            if not vals:
                return None
            return picker(vals)
        if len(args) == 2:
            return picker([_num(args[0]), _num(args[1])])
        raise AblRuntimeError("arityMismatch", "expected one collection or two numbers")
    return fn


def _sum(x):
    return float(sum(_num(v) for v in _values(x)))


def _concat(a, b):
    if isinstance(a, list) and isinstance(b, list):
        return list(a) + list(b)
    if isinstance(a, dict) and isinstance(b, dict):
        out = dict(a)
        out.update(b)
        return out
    if isinstance(a, str) and isinstance(b, str):
        return a + b
    raise AblRuntimeError("typeMismatch", "concat needs two arrays, records, or strings")


def _contains(x, e):
    if isinstance(x, str):
        return isinstance(e, str) and e in x
    return any(deep_equal(v, e) for v in _values(x))


def _empty(x):
    if x is None:
        return True
    if isinstance(x, (list, dict, str)):
        return len(x) == 0
    return False


def _flatten(x):
    out = []
    for v in _values(x):
        if isinstance(v, (list, dict)):
            out.extend(_values(v))
        else:
            out.append(v)
    return out


def _head(x):
    vals = _values(x)
    return vals[0] if vals else None


def _last(x):
    vals = _values(x)
    return vals[-1] if vals else None


def _tail(x):
    return _values(x)[1:]


def _matrix(*dims):
    """Nested zero-filled arrays: matrix(n), matrix(n, m), matrix(n, m, init)."""
    if not dims:
        return []
    init = 0.0
    if len(dims) >= 3:
        init = dims[2]
        dims = dims[:2]
    n = int(_num(dims[0]))
    if len(dims) == 1:
        return [deep_copy(init) for _ in range(n)]
    m = int(_num(dims[1]))
    return [[deep_copy(init) for _ in range(m)] for _ in range(n)]


def _reverse(x):
    return list(reversed(_values(x)))


def _without(x, e):
    if isinstance(x, dict):
        return {k: v for k, v in x.items() if not (isinstance(e, str) and k == e)}
    return [v for v in _values(x) if not deep_equal(v, e)]


def _int(x):
    if isinstance(x, str):
        try:
            return float(int(float(x)))
        except ValueError:
            return math.nan
    if isinstance(x, bool):
        return 1.0 if x else 0.0
    v = _num(x)
    if math.isnan(v) or math.isinf(v):
        return v
    return float(math.trunc(v))


def _string(x):
    return value_text(x)


def _object(x):
    """Record from an array of [key, value] pairs (or a record copy)."""
    if isinstance(x, dict):
        return deep_copy(x)
    if isinstance(x, list):
        out = {}
        for pair in x:
            if (isinstance(pair, list) and len(pair) == 2
                    and isinstance(pair[0], str)):
                out[pair[0]] = pair[1]
            else:
                raise AblRuntimeError("typeMismatch", "object needs [key, value] pairs")
        return out
    raise AblRuntimeError("typeMismatch", "object needs an array or record")


def _make_random(rng):
    def _random(*args):
        if len(args) == 1:
            seq = args[0]
            if isinstance(seq, list):
                if not seq:
                    return None
                return seq[rng.randrange(len(seq))]
            raise AblRuntimeError("typeMismatch", "random(x) picks from an array")
        if len(args) == 2:
            a, b = _num(args[0]), _num(args[1])
            return a + rng.random() * (b - a)
        if len(args) == 3:
            a, b, step = _num(args[0]), _num(args[1]), _num(args[2])
            if step <= 0:
                raise AblRuntimeError("typeMismatch", "random step must be positive")
            n = max(1, int((b - a) / step))
            return a + rng.randrange(n) * step
        raise AblRuntimeError("arityMismatch", "random takes 1 to 3 arguments")
    return _random


def _iter(interp, x, fn):
    if isinstance(x, list):
        for i, v in enumerate(x):
            call_value(interp, fn, [v, float(i)])
    elif isinstance(x, dict):
        for k, v in x.items():
            call_value(interp, fn, [v, k])
    else:
        raise AblRuntimeError("typeMismatch", "iter needs an array or record")
    return None


def _map(interp, x, fn):
    if isinstance(x, list):
        return [call_value(interp, fn, [v, float(i)]) for i, v in enumerate(x)]
    if isinstance(x, dict):
        return {k: call_value(interp, fn, [v, k]) for k, v in x.items()}
    raise AblRuntimeError("typeMismatch", "map needs an array or record")


def _filter(interp, x, fn):
    if isinstance(x, list):
        return [v for i, v in enumerate(x)
                if truthy(call_value(interp, fn, [v, float(i)]))]
    if isinstance(x, dict):
        return {k: v for k, v in x.items()
                if truthy(call_value(interp, fn, [v, k]))}
    raise AblRuntimeError("typeMismatch", "filter needs an array or record")


def _reduce(interp, x, fn, init=None):
    acc = init
    if isinstance(x, list):
        for v in x:
            acc = call_value(interp, fn, [acc, v])
    elif isinstance(x, dict):
        for k, v in x.items():
            acc = call_value(interp, fn, [acc, v, k])
    else:
        raise AblRuntimeError("typeMismatch", "reduce needs an array or record")
    return acc


def _sort(interp, x, cmp=None):
    vals = list(_values(x))
    if cmp is None:
        try:
            return sorted(vals, key=lambda v: (0, float(v)) if is_number(v) else (1, str(v)))
        except (TypeError, ValueError):
            raise AblRuntimeError("typeMismatch", "sort needs numbers or strings")
    import functools

    def compare(a, b):
        r = call_value(interp, cmp, [a, b])
        return int(_num(r, "comparator result"))

    return sorted(vals, key=functools.cmp_to_key(compare))


def pure_builtins(rng) -> dict:
    """Name -> Builtin map for the computation set (levels 0 and up)."""
    b = Builtin
    table = {
        "abs": b("abs", _abs, 1, 1),
        "add": b("add", lambda a, c: _zip_numeric(a, c, lambda x, y: x + y), 2, 2),
        "angle": b("angle", _angle, 1, 1),
        "delta": b("delta", lambda a, c: _zip_numeric(c, a, lambda x, y: x - y), 2, 2),
        "distance": b("distance", _distance, 2, 2),
        "div": b("div", lambda a, c: _num(a) / _num(c) if _num(c) != 0
                 else math.copysign(math.inf, _num(a)) if _num(a) != 0 else math.nan, 2, 2),
        "equal": b("equal", deep_equal, 2, 2),
        "max": b("max", _extreme(max), 1, 2),
        "min": b("min", _extreme(min), 1, 2),
        "neg": b("neg", _neg, 1, 1),
        "random": b("random", _make_random(rng), 1, 3),
        "sum": b("sum", _sum, 1, 1),
        "zero": b("zero", _zero, 1, 1),
        "concat": b("concat", _concat, 2, 2),
        "contains": b("contains", _contains, 2, 2),
        "copy": b("copy", deep_copy, 1, 1),
        "empty": b("empty", _empty, 1, 1),
        "filter": b("filter", _filter, 2, 2, wants_interp=True),
        "flatten": b("flatten", _flatten, 1, 1),
        "head": b("head", _head, 1, 1),
        "isin": b("isin", _contains, 2, 2),
        "iter": b("iter", _iter, 2, 2, wants_interp=True),
        "last": b("last", _last, 1, 1),
        "map": b("map", _map, 2, 2, wants_interp=True),
        "matrix": b("matrix", _matrix, 1, 3),
        "reduce": b("reduce", _reduce, 2, 3, wants_interp=True),
        "reverse": b("reverse", _reverse, 1, 1),
        "sort": b("sort", _sort, 1, 2, wants_interp=True),
        "tail": b("tail", _tail, 1, 1),
        "without": b("without", _without, 2, 2),
        "Vector": b("Vector", lambda x, y: {"x": _num(x), "y": _num(y)}, 2, 2),
        "int": b("int", _int, 1, 1),
        "object": b("object", _object, 1, 1),
        "string": b("string", _string, 1, 1),
    }
    return table
