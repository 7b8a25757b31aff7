"""Assembles the per-process builtin environment for one privilege level.

Every operation a program can name lives here, closed over the world and
the owning process.  The level table filters what actually lands in the
environment, so a call to an op outside the agent's level fails as an
unknown name, exactly like any other free identifier.
"""

from __future__ import annotations

from ..abl.errors import AblRuntimeError
from ..abl.interp import (
    AgentStopInterrupt, BlockReason, BlockSignal, Builtin, call_value,
)
from ..values import deep_copy, value_text
from ..tuplespace import Waiter
from .. import signals as signals_mod
from .blocks import IteratorBlock, LinearBlock, LoopBlock
from .builtins import pure_builtins
from .optable import names_for_level

DIRECTIONS = ("NORTH", "SOUTH", "WEST", "EAST", "NW", "NE", "SW", "SE",
              "UP", "DOWN", "ORIGIN", "FORWARD", "BACKWARD", "OPPOSITE",
              "LEFT", "RIGHT")

OPPOSITES = {"NORTH": "SOUTH", "SOUTH": "NORTH", "WEST": "EAST",
             "EAST": "WEST", "NW": "SE", "SE": "NW", "NE": "SW", "SW": "NE",
             "UP": "DOWN", "DOWN": "UP", "LEFT": "RIGHT", "RIGHT": "LEFT",
             "FORWARD": "BACKWARD", "BACKWARD": "FORWARD"}


def dir_table() -> dict:
    table: dict = {name: name for name in DIRECTIONS}
    table["DELTA"] = Builtin("DIR.DELTA", lambda addr: {"tag": "DIR.DELTA", "delta": addr}, 1, 1)
    table["RANGE"] = Builtin("DIR.RANGE", lambda r: {"tag": "DIR.RANGE", "radius": float(r)}, 1, 1)
    table["NODE"] = Builtin("DIR.NODE", lambda node: {"tag": "DIR.NODE", "node": node}, 1, 1)
    table["IP"] = Builtin("DIR.IP", lambda addr: {"tag": "DIR.IP", "ip": addr}, 1, 1)
    table["PATH"] = Builtin("DIR.PATH", lambda path: {"tag": "DIR.PATH", "path": path}, 1, 1)
    table["CAP"] = Builtin("DIR.CAP", lambda cap: {"tag": "DIR.CAP", "cap": cap}, 1, 1)
    table["opposite"] = Builtin("DIR.opposite", _dir_opposite, 1, 1)
    return table


def _dir_opposite(d):
    if isinstance(d, str) and d in OPPOSITES:
        return OPPOSITES[d]
    return None


def _tmo(value, what="timeout") -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise AblRuntimeError("typeMismatch", f"{what} must be a number")
    return float(value)


def bind_env(world, proc) -> dict:
    """Builtin table for proc at its current level."""
    allowed = names_for_level(proc.level)
    env: dict = {}

    def expose(name: str, value):
        if name in allowed:
            env[name] = value

    for name, builtin in pure_builtins(world.rng).items():
        expose(name, builtin)

    node = lambda: proc.node  # noqa: E731  (migration moves the process)

    # -- logging / environment sensors --

    def _log(*args):
        world.agent_log(proc, " ".join(value_text(a) for a in args))
        return None

    expose("log", Builtin("log", _log, 0, None))
    expose("me", Builtin("me", lambda: proc.id, 0, 0))
    expose("myClass", Builtin("myClass", lambda: proc.class_name, 0, 0))
    expose("myNode", Builtin("myNode", lambda: node().id, 0, 0))
    expose("myParent", Builtin("myParent", lambda: proc.parent, 0, 0))
    expose("myPosition", Builtin("myPosition",
                                 lambda: deep_copy(node().position), 0, 0))
    expose("privilege", Builtin("privilege", lambda: float(proc.level), 0, 0))
    expose("time", Builtin("time", lambda: world.now(), 0, 0))

    def _info(kind=None):
        kind = kind or "node"
        if kind == "node":
            return {"id": node().id, "position": deep_copy(node().position),
                    "location": {}, "type": world.kind}
        if kind == "version":
            return world.version
        if kind == "host":
            return {"name": world.name, "nodes": float(len(world.node_ids()))}
        if kind == "process":
            r = proc.resources
            return {"id": proc.id, "level": float(proc.level),
                    "cpu": r.cpu_used_ms, "cpulimit": r.cpu_limit_ms,
                    "schedule": r.slice_ms}
        return None

    expose("info", Builtin("info", _info, 0, 1))

    def _negotiate(what, value, cap):
        from ..scheduler import negotiate_enforce
        if not isinstance(what, str):
            raise AblRuntimeError("typeMismatch", "negotiate parameter name")
        return negotiate_enforce(world, proc, what, value, cap)

    expose("negotiate", Builtin("negotiate", _negotiate, 3, 3))

    # -- control --

    def _sleep(tmo=None):
        reason = BlockReason("sleep",
                             timeout_ms=None if tmo is None else _tmo(tmo))
        raise BlockSignal(reason)

    def _wakeup(aid=None):
        target = proc if aid is None else world.find_process(str(aid))
        if target is not None and not target.dead and target.suspended:
            target.do_wakeup()
            world.wake()
        return None

    def _kill(aid=None):
        if aid is None or aid == proc.id:
            proc.mark_kill()
            raise AgentStopInterrupt()
        signals_mod.kill_agent(world, node(), proc.id, str(aid))
        return None

    expose("sleep", Builtin("sleep", _sleep, 0, 1))
    expose("wakeup", Builtin("wakeup", _wakeup, 0, 1))
    expose("kill", Builtin("kill", _kill, 0, 1))

    def _timer_add(tmo, sig, arg=None, repeat=False):
        from ..scheduler import Timer
        period = _tmo(tmo)
        proc.timers[str(sig)] = Timer(period, str(sig), arg, bool(repeat),
                                      world.now() + period)
        world.wake()
        return None

    def _timer_delete(sig):
        proc.timers.pop(str(sig), None)
        return None

    expose("timer", Builtin("timer", lambda: None, 0, 0, attrs={
        "add": Builtin("timer.add", _timer_add, 2, 4),
        "delete": Builtin("timer.delete", _timer_delete, 1, 1),
    }))

    # -- scheduling blocks --

    def _unwrap(fns):
        if not isinstance(fns, list):
            raise AblRuntimeError("typeMismatch", "expected an array of functions")
        return fns

    def _B(fns):
        proc.schedule.append(LinearBlock(_unwrap(fns)))
        return None

    def _L(init, cond, nxt, fns, finalize=None):
        proc.schedule.append(LoopBlock(init, cond, nxt, _unwrap(fns), finalize))
        return None

    def _I(data, nxt, fns, finalize=None):
        proc.schedule.append(IteratorBlock(data, nxt, _unwrap(fns), finalize))
        return None

    expose("B", Builtin("B", _B, 1, 1))
    expose("L", Builtin("L", _L, 4, 5))
    expose("I", Builtin("I", _I, 3, 4))

    # -- tuple spaces (local) --

    def _charge_ts():
        proc.resources.ts_ops_used += 1

    def _out(t):
        _charge_ts()
        node().store.out(t, world.now())
        world.wake()
        return None

    def _mark(t, tmo):
        _charge_ts()
        node().store.mark(t, _tmo(tmo), world.now())
        return None

    def _wait(op: str, patterns: list, cb, deadline_ms):
        store = node().store
        found = store.try_take(patterns, consume=op in ("inp", "alt"),
                               now=world.now())
        if found is not None:
            if cb is not None:
                raise _CallbackNow(cb, found)
            return None
        deadline = None if deadline_ms is None else world.now() + deadline_ms
        waiter = Waiter(patterns=patterns, consume=op in ("inp", "alt"),
                        deliver=lambda result: proc.deliver_wait_result(cb, result),
                        deadline=deadline, owner=proc.id)
        store.add_waiter(waiter)
        proc.suspend_tuple_wait(waiter, cb)
        raise BlockSignal(BlockReason("tuple", timeout_ms=deadline_ms, op=op,
                                      patterns=patterns))

    class _CallbackNow(Exception):
        def __init__(self, cb, result):
            self.cb = cb
            self.result = result

    def _tuple_op(interp, op, patterns, cb):
        _charge_ts()
        try:
            _wait(op, patterns, cb, None)
        except _CallbackNow as c:
            call_value(interp, c.cb, [c.result])
        return None

    def _tuple_try(interp, op, tmo, patterns, cb):
        _charge_ts()
        try:
            _wait(op, patterns, cb, _tmo(tmo))
        except _CallbackNow as c:
            call_value(interp, c.cb, [c.result])
        return None

    def _pattern_arg(p):
        if not isinstance(p, list):
            raise AblRuntimeError("typeMismatch", "pattern must be an array")
        return p

    def _patterns_arg(ps):
        if not isinstance(ps, list) or not ps:
            raise AblRuntimeError("typeMismatch", "expected a pattern array")
        if all(isinstance(p, list) for p in ps):
            return ps
        raise AblRuntimeError("typeMismatch", "expected a pattern array")

    expose("inp", Builtin(
        "inp", lambda interp, p, cb=None: _tuple_op(interp, "inp", [_pattern_arg(p)], cb),
        1, 2, wants_interp=True, attrs={
            "try": Builtin("inp.try",
                           lambda interp, tmo, p, cb=None:
                           _tuple_try(interp, "inp", tmo, [_pattern_arg(p)], cb),
                           2, 3, wants_interp=True)}))
    expose("rd", Builtin(
        "rd", lambda interp, p, cb=None: _tuple_op(interp, "rd", [_pattern_arg(p)], cb),
        1, 2, wants_interp=True, attrs={
            "try": Builtin("rd.try",
                           lambda interp, tmo, p, cb=None:
                           _tuple_try(interp, "rd", tmo, [_pattern_arg(p)], cb),
                           2, 3, wants_interp=True)}))
    expose("alt", Builtin(
        "alt", lambda interp, ps, cb=None: _tuple_op(interp, "alt", _patterns_arg(ps), cb),
        1, 2, wants_interp=True, attrs={
            "try": Builtin("alt.try",
                           lambda interp, tmo, ps, cb=None:
                           _tuple_try(interp, "alt", tmo, _patterns_arg(ps), cb),
                           2, 3, wants_interp=True)}))

    expose("out", Builtin("out", _out, 1, 1))
    expose("mark", Builtin("mark", _mark, 2, 2))

    def _ts(interp, p, update):
        _charge_ts()
        if isinstance(update, (int, float)) and not isinstance(update, bool):
            return node().store.ts(_pattern_arg(p), float(update), world.now())
        return node().store.ts(_pattern_arg(p),
                               lambda t: call_value(interp, update, [t]),
                               world.now())

    expose("ts", Builtin("ts", _ts, 2, 2, wants_interp=True))

    def _rm(p, remove_all=False):
        _charge_ts()
        return float(node().store.rm(_pattern_arg(p), bool(remove_all),
                                     world.now()))

    def _test(p):
        _charge_ts()
        return node().store.test(_pattern_arg(p), world.now())

    expose("rm", Builtin("rm", _rm, 1, 2))
    expose("test", Builtin("test", _test, 1, 1))
    expose("exists", Builtin("exists", _test, 1, 1))

    # -- tuple spaces (remote, level 2+) --

    def _collect(to, p):
        _charge_ts()
        world.remote_tuple_op("collect", proc, str(to), _pattern_arg(p))
        return None

    def _copyto(to, p):
        _charge_ts()
        world.remote_tuple_op("copyto", proc, str(to), _pattern_arg(p))
        return None

    def _store(to, t):
        _charge_ts()
        world.remote_tuple_op("store", proc, str(to), t)
        return None

    expose("collect", Builtin("collect", _collect, 2, 2))
    expose("copyto", Builtin("copyto", _copyto, 2, 2))
    expose("store", Builtin("store", _store, 2, 2))

    # -- signals --

    def _send(to, sig, arg=None):
        signals_mod.send(world, node(), proc.id, str(to), str(sig), arg)
        return None

    def _broadcast(ac, range_hops, sig, arg=None):
        signals_mod.broadcast(world, node(), proc.id, str(ac),
                              int(_tmo(range_hops, "range")), str(sig), arg)
        return None

    expose("send", Builtin("send", _send, 2, 3))
    expose("broadcast", Builtin("broadcast", _broadcast, 3, 4))

    # -- agent management --

    def _create(ac, args=None, level=None):
        from ..world import WorldError
        lvl = proc.level if level is None else int(_tmo(level, "level"))
        try:
            return world.create_agent(str(ac), args, lvl, node_id=node().id,
                                      parent=proc.id, creator=proc)
        except WorldError as e:
            raise AblRuntimeError(e.kind, str(e)) from None

    def _fork(overrides=None):
        from ..world import WorldError
        try:
            return world.fork_agent(proc, overrides or {})
        except WorldError as e:
            raise AblRuntimeError(e.kind, str(e)) from None

    expose("create", Builtin("create", _create, 1, 3))
    expose("fork", Builtin("fork", _fork, 0, 1))

    # -- code morphing --

    def _fn_of(value, what):
        from ..abl.interp import Closure
        from ..abl.nodes import FunctionValue
        if isinstance(value, Closure):
            return value.fn
        if isinstance(value, FunctionValue):
            return value
        raise AblRuntimeError("typeMismatch", f"{what} must be a function")

    def _act_add(name, fn):
        proc.activities[str(name)] = _fn_of(fn, "activity")
        return None

    def _act_update(name, fn):
        if str(name) not in proc.activities:
            raise AblRuntimeError("unknownName", f"activity '{name}' does not exist")
        proc.activities[str(name)] = _fn_of(fn, "activity")
        return None

    def _act_delete(name):
        fn = proc.activities.pop(str(name), None)
        if fn is None:
            raise AblRuntimeError("unknownName", f"activity '{name}' does not exist")
        return fn

    def _rule_of(target, data=None, has_data=False):
        from ..abl.nodes import Dynamic, Static
        from ..abl.interp import Closure
        from ..abl.nodes import FunctionValue
        if isinstance(target, str):
            return Static(target=target)
        if isinstance(target, (Closure, FunctionValue)):
            fn = target.fn if isinstance(target, Closure) else target
            return Dynamic(fn=fn, bound_arg=data, has_bound_arg=has_data)
        raise AblRuntimeError("typeMismatch",
                              "transition target must be a name or function")

    def _trans_add(start, end=None, data=None):
        has_data = data is not None
        proc.transitions[str(start)] = _rule_of(end, data, has_data)
        return None

    def _trans_update(start, end=None, data=None):
        if str(start) not in proc.transitions:
            raise AblRuntimeError("unknownName",
                                  f"transition '{start}' does not exist")
        proc.transitions[str(start)] = _rule_of(end, data, data is not None)
        return None

    def _trans_delete(start):
        rule = proc.transitions.pop(str(start), None)
        if rule is None:
            raise AblRuntimeError("unknownName",
                                  f"transition '{start}' does not exist")
        from ..abl.nodes import Static
        return rule.target if isinstance(rule, Static) else rule.fn

    expose("act", Builtin("act", lambda: None, 0, 0, attrs={
        "add": Builtin("act.add", _act_add, 2, 2),
        "update": Builtin("act.update", _act_update, 2, 2),
        "delete": Builtin("act.delete", _act_delete, 1, 1),
    }))
    expose("trans", Builtin("trans", lambda: None, 0, 0, attrs={
        "add": Builtin("trans.add", _trans_add, 2, 3),
        "update": Builtin("trans.update", _trans_update, 2, 3),
        "delete": Builtin("trans.delete", _trans_delete, 1, 1),
    }))

    # -- mobility --

    def _moveto(direction):
        proc.move_request = direction
        raise AgentStopInterrupt()

    def _link(direction):
        return world.link_query(proc, direction)

    expose("moveto", Builtin("moveto", _moveto, 1, 1))
    expose("link", Builtin("link", _link, 1, 1))
    expose("DIR", dir_table())

    def _connect_to(url):
        return world.host_connect(str(url))

    expose("connectTo", Builtin("connectTo", _connect_to, 1, 1))

    # -- host extensions --

    env.update(world.extension_builtins(proc))

    return env
