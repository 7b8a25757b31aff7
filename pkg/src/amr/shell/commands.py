"""The shell command set bound into the script environment.

Host-side tuple operations are the non-blocking variants; everything
funnels through the session's world.  Where a command takes an agent
class, it accepts the declared constructor value or its string name.
"""

from __future__ import annotations

import json
import threading
import time
import urllib.request

from .. import capability as cap_mod
from ..abl.errors import AblRuntimeError
from ..abl.interp import Builtin, call_value
from ..abl.nodes import AgentClass
from ..abl.parser import ClassDecl
from ..aios.builtins import pure_builtins
from ..aios.bind import dir_table
from ..values import deep_copy, truthy, value_text
from ..world import WorldError


def _class_key(session, value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, ClassDecl):
        return value.name
    if isinstance(value, AgentClass):
        return value.name
    raise AblRuntimeError("typeMismatch", "expected an agent class or name")


def build_shell_env(session) -> dict:
    world = session.world
    env: dict = {}
    env.update(pure_builtins(world.rng))
    env["DIR"] = dir_table()
    env["Rights"] = {name: float(v) for name, v in cap_mod.RIGHTS.items()}
    env["args"] = list(session.script_args)

    b = Builtin

    def expose(name, fn, lo=0, hi=None, wants_interp=False, attrs=None):
        env[name] = b(name, fn, lo, hi, wants_interp=wants_interp, attrs=attrs)

    def current_node():
        return world.node(world.current_node_id) or world.root

    # -- world / node management --

    def _add(a, y=None):
        if isinstance(a, dict):
            return world.call(lambda: world.add_node(
                float(a.get("x", 0)), float(a.get("y", 0)),
                a.get("id")))
        return world.call(lambda: world.add_node(float(a), float(y or 0)))

    expose("add", _add, 1, 2)

    def _connect(a, bpos=None):
        if isinstance(a, dict) and "tag" not in a and bpos is not None:
            world.call(lambda: world.connect_nodes(a, bpos))
            return True
        target = a.get("ip") if isinstance(a, dict) else a
        return world.host_connect(str(target))

    def _disconnect(a, bpos=None):
        if isinstance(a, dict) and "tag" not in a and bpos is not None:
            world.call(lambda: world.disconnect_nodes(a, bpos))
            return True
        target = a.get("ip") if isinstance(a, dict) else a
        peer = None
        for name, link in world.endpoint.links.items():
            if link.url == target or name == target:
                peer = name
        if peer:
            world.call(lambda: world.endpoint.unlink(peer))
        return peer is not None

    def _connected(to):
        if isinstance(to, dict) and "tag" in to:
            return world.link_query(None, to) if to else False
        if isinstance(to, str):
            link = world.endpoint.links.get(to)
            if link is not None:
                return link.state == "UP"
            return bool(world.resolve_dir(None, current_node(), to, True))
        return False

    expose("connect", _connect, 1, 2)
    expose("disconnect", _disconnect, 1, 2)
    expose("connected", _connected, 1, 1)

    def _port(direction, options=None, node=None):
        url = direction.get("ip") if isinstance(direction, dict) else direction
        secure = None
        options = options or {}
        if isinstance(options, dict) and options.get("secure"):
            secure = cap_mod.port_of_string(str(options["secure"]))
        transport = world.call(lambda: world.endpoint.open_port(str(url), secure))
        return f"{transport.scheme}://:{transport.port}"

    expose("port", _port, 1, 3)

    def _node(node_id=None):
        if node_id is not None:
            if world.node(str(node_id)) is None:
                raise AblRuntimeError("unknownName", f"no node '{node_id}'")
            world.current_node_id = str(node_id)
        return world.current_node_id

    expose("node", _node, 0, 1)
    expose("nodes", lambda: world.node_ids(), 0, 0)
    expose("name", lambda: current_node().id, 0, 0)
    expose("world", lambda: {
        "name": world.name,
        "nodes": world.node_ids(),
        "agents": float(sum(len(n.processes) for n in world.nodes())),
    }, 0, 0)

    # -- classes / agents --

    def _compile(cls_value, options=None):
        key = _class_key(session, cls_value)
        decl = session.classes.get(key)
        source = decl if decl is not None else cls_value
        if isinstance(source, str) and source not in session.classes:
            if source in world.library:
                return source  # already compiled
            raise AblRuntimeError("unknownName", f"unknown class '{source}'")
        try:
            name = world.call(lambda: world.compile_class(source))
        except WorldError as e:
            raise AblRuntimeError(e.kind, str(e)) from None
        if isinstance(options, dict) and truthy(options.get("verbose")):
            prepared = world.library[name]
            for level, report in prepared.level_reports.items():
                for violation in report.violations:
                    print(f"[{name}] level {level}: {violation}")
        return name

    def _open(path, verbose=None):
        try:
            return world.call(lambda: world.open_class_file(str(path)))
        except OSError as e:
            raise AblRuntimeError("unknownName", str(e)) from None

    expose("compile", _compile, 1, 3)
    expose("open", _open, 1, 2)

    def _create(ac, cargs=None, level=None, node=None):
        key = _class_key(session, ac)
        if key not in world.library and key in session.classes:
            _compile(key)
        lvl = 1 if level is None else int(level)
        node_id = str(node) if node is not None else world.current_node_id
        try:
            return world.call(lambda: world.create_agent(
                key, cargs, lvl, node_id=node_id))
        except WorldError as e:
            raise AblRuntimeError(e.kind, str(e)) from None

    def _kill(aid, node=None):
        world.call(lambda: world.kill_agent(str(aid),
                                            str(node) if node else None))
        return None

    expose("create", _create, 1, 4)
    expose("kill", _kill, 1, 2)

    def _agents(node=None):
        if node is not None:
            vn = world.node(str(node))
            return list(vn.processes.keys()) if vn else []
        return [p.id for p in world.processes()]

    def _agent(aid, want_proc=None):
        proc = world.find_process(str(aid))
        if proc is None:
            return None
        r = proc.resources
        return {
            "id": proc.id, "class": proc.class_name,
            "level": float(proc.level), "node": proc.node.id,
            "next": proc.next, "priority": float(proc.priority),
            "parent": proc.parent,
            "blocked": proc.blocked, "suspended": proc.suspended,
            "dead": proc.dead,
            "cpu": r.cpu_used_ms, "cpulimit": r.cpu_limit_ms,
            "body": deep_copy(proc.body),
            "trace": list(proc.trace),
        }

    expose("agents", _agents, 0, 1)
    expose("agent", _agent, 1, 2)

    def _signal(to, sig, arg=None):
        from .. import signals as signals_mod
        world.call(lambda: signals_mod.send(world, current_node(), "host",
                                            str(to), str(sig), arg))
        return None

    expose("signal", _signal, 2, 3)

    # -- scheduler control --

    expose("start", lambda: (world.start(), None)[1], 0, 0)
    expose("stop", lambda: (world.stop(), None)[1], 0, 0)

    def _step(n=1):
        reports = world.step(int(n)) if not world._running \
            else world.call(lambda: [world.scheduler.pass_once()
                                     for _ in range(int(n))])
        session.pump()
        return [r.to_value() for r in reports]

    expose("step", _step, 0, 1)
    expose("schedule", lambda: (world.wake(), None)[1], 0, 0)

    # -- host tuple space (non-blocking variants) --

    def _out(t):
        world.call(lambda: current_node().store.out(t, world.now()))
        return None

    def _inp(p, remove_all=None):
        def take():
            store = current_node().store
            if truthy(remove_all):
                return store.take_all(p, world.now())
            return store.try_take([p], True, world.now())
        return world.call(take)

    def _rd(p, read_all=None):
        def read():
            store = current_node().store
            if truthy(read_all):
                return store.copy_all(p, world.now())
            return store.try_take([p], False, world.now())
        return world.call(read)

    def _mark(t, tmo):
        world.call(lambda: current_node().store.mark(t, float(tmo), world.now()))
        return None

    def _rm(p, remove_all=None):
        return float(world.call(
            lambda: current_node().store.rm(p, truthy(remove_all), world.now())))

    def _test(p):
        return world.call(lambda: current_node().store.test(p, world.now()))

    def _ts(interp, p, update):
        store = current_node().store
        if isinstance(update, (int, float)) and not isinstance(update, bool):
            return world.call(lambda: store.ts(p, float(update), world.now()))
        return world.call(lambda: store.ts(
            p, lambda t: call_value(interp, update, [t]), world.now()))

    def _provider(interp, fn):
        def provide(pattern):
            result = session.call_function(fn, [pattern])
            return result if isinstance(result, list) else None
        current_node().store.register_provider(provide)
        return None

    def _consumer(interp, fn):
        current_node().store.register_consumer(
            lambda t: session.call_function(fn, [t]))
        return None

    expose("out", _out, 1, 1)
    expose("inp", _inp, 1, 2)
    expose("rd", _rd, 1, 2)
    expose("mark", _mark, 2, 2)
    expose("rm", _rm, 1, 2)
    expose("test", _test, 1, 1)
    expose("ts", _ts, 2, 2, wants_interp=True)
    expose("provider", _provider, 1, 1, wants_interp=True)
    expose("consumer", _consumer, 1, 1, wants_interp=True)

    # -- events, timers, logging --

    def _on(ev, handler):
        session.on_event(str(ev), handler)
        return None

    expose("on", _on, 2, 2)

    def _later(tmo, cb):
        def fire():
            def task():
                result = session.call_function(cb, [])
                if truthy(result):
                    _later(tmo, cb)
            if world._running:
                world._queue.put(task)
                world.wake()
            else:
                task()
        timer = threading.Timer(float(tmo) / 1000.0, fire)
        timer.daemon = True
        timer.start()
        session.add_later(timer)
        return None

    expose("later", _later, 2, 2)

    def _setlog(flag, val=True):
        if flag == "print":
            world.config.print_log = truthy(val)
        return None

    expose("setlog", _setlog, 1, 2)
    expose("log", lambda *a: print(" ".join(value_text(x) for x in a)), 0, None)

    def _config(options=None):
        if isinstance(options, dict):
            mapping = {"slice": "slice_ms", "cpu": "cpu_limit_ms",
                       "lifetime": "lifetime_ms", "compress": "compress",
                       "print": "print_log", "TSTMO": "ts_default_tmo"}
            for key, value in options.items():
                attr = mapping.get(key, key)
                if hasattr(world.config, attr):
                    setattr(world.config, attr, value)
        return _configs()

    def _configs():
        cfg = world.config
        return {"slice": cfg.slice_ms, "cpu": cfg.cpu_limit_ms,
                "lifetime": cfg.lifetime_ms, "compress": cfg.compress,
                "print": cfg.print_log, "seed": float(cfg.seed)}

    expose("config", _config, 0, 1)
    expose("configs", _configs, 0, 0)

    # -- cluster --

    def _cluster(desc):
        from ..cluster import ClusterHandle
        if not isinstance(desc, dict):
            raise AblRuntimeError("typeMismatch", "cluster needs a descriptor")
        handle = ClusterHandle(world, desc)
        handle.start()
        world.cluster = handle
        return handle.describe()

    expose("cluster", _cluster, 1, 1)
    expose("clusterStatus", lambda: world.cluster.describe()
           if world.cluster else None, 0, 0)
    expose("clusterStop", lambda: (world.cluster.stop(), None)[1]
           if world.cluster else None, 0, 0)

    # -- AIOS extension --

    def _extend(levels, ext_name, fn, argn=None):
        lv = [int(levels)] if not isinstance(levels, list) \
            else [int(x) for x in levels]
        arity = argn
        if isinstance(argn, list):
            arity = [int(x) for x in argn]
        elif argn is not None:
            arity = int(argn)
        world.call(lambda: world.extend(lv, str(ext_name), fn, arity))
        return None

    expose("extend", _extend, 3, 4)

    # -- environment / misc --

    def _info(what=None, ident=None):
        what = what or "node"
        if what == "node":
            n = world.node(str(ident)) if ident else current_node()
            if n is None:
                return None
            return {"id": n.id, "position": deep_copy(n.position),
                    "location": {}, "type": "shell"}
        if what == "version":
            return world.version
        if what == "host":
            return {"name": world.name, "nodes": world.node_ids()}
        return None

    expose("info", _info, 0, 2)
    expose("clock", lambda fmt=None: time.strftime("%H:%M:%S")
           if fmt else world.now(), 0, 1)
    expose("utime", lambda: float(time.time_ns()), 0, 0)
    expose("uniqid", lambda options=None: world.rng.ident(8), 0, 1)
    expose("sleep", lambda ms: (time.sleep(float(ms) / 1000.0), None)[1], 1, 1)

    def _ask(question, choices=None):
        if not session.interactive:
            raise AblRuntimeError("typeMismatch", "ask is script-mode only")
        prompt = str(question)
        if isinstance(choices, list):
            prompt += " [" + "/".join(value_text(c) for c in choices) + "]"
        return input(prompt + " ")

    expose("ask", _ask, 1, 2)

    # -- capabilities --

    def _Port_unique():
        return str(cap_mod.unique_port())

    def _Port_of(text):
        return str(cap_mod.port_of_string(str(text)))

    env["Port"] = b("Port", lambda: None, 0, 0, attrs={
        "unique": b("Port.unique", _Port_unique, 0, 0),
        "ofString": b("Port.ofString", _Port_of, 1, 1),
        "toString": b("Port.toString", lambda p: str(p), 1, 1),
    })

    def _private(obj, rights, secret):
        prot = cap_mod.encode_private(int(obj), int(rights),
                                      cap_mod.port_of_string(str(secret)))
        return {"obj": float(int(obj)), "rights": float(int(rights)),
                "prot": str(prot)}

    def _private_restrict(priv, new_rights, secret):
        cap = cap_mod.Capability(
            cap_mod.unique_port(), int(priv["obj"]), int(priv["rights"]),
            cap_mod.port_of_string(str(priv["prot"])))
        try:
            out = cap_mod.restrict(cap, int(new_rights),
                                   cap_mod.port_of_string(str(secret)))
        except cap_mod.InvalidCapability as e:
            raise AblRuntimeError("typeMismatch", str(e)) from None
        return {"obj": float(out.obj), "rights": float(out.rights),
                "prot": str(out.protection_port)}

    def _private_check(priv, rights, secret):
        cap = cap_mod.Capability(
            cap_mod.unique_port(), int(priv["obj"]), int(priv["rights"]),
            cap_mod.port_of_string(str(priv["prot"])))
        return cap_mod.check_rights(cap, int(rights),
                                    cap_mod.port_of_string(str(secret)))

    env["Private"] = b("Private", _private, 3, 3, attrs={
        "encode": b("Private.encode", _private, 3, 3),
        "restrict": b("Private.restrict", _private_restrict, 3, 3),
        "rights_check": b("Private.rights_check", _private_check, 3, 3),
    })

    def _capability(service, priv):
        cap = cap_mod.Capability(
            cap_mod.port_of_string(str(service)), int(priv["obj"]),
            int(priv["rights"]), cap_mod.port_of_string(str(priv["prot"])))
        return cap_mod.cap_to_string(cap)

    env["Capability"] = b("Capability", _capability, 2, 2, attrs={
        "ofString": b("Capability.ofString",
                      lambda t: cap_mod.cap_to_string(cap_mod.cap_of_string(str(t))),
                      1, 1),
    })

    def _register(service, secret):
        world.capability_registry.register(
            cap_mod.port_of_string(str(service)),
            cap_mod.port_of_string(str(secret)))
        return None

    expose("register", _register, 2, 2)

    # -- tiny http client helpers --

    def _http_get(url):
        with urllib.request.urlopen(str(url), timeout=5.0) as resp:
            return resp.read().decode("utf-8", "replace")

    def _http_get_json(url):
        return json.loads(_http_get(url))

    def _http_put(url, payload, method="PUT"):
        data = payload.encode("utf-8") if isinstance(payload, str) \
            else json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(str(url), data=data, method=method)
        req.add_header("Content-Type", "application/json")
        with urllib.request.urlopen(req, timeout=5.0) as resp:
            return resp.read().decode("utf-8", "replace")

    env["http"] = b("http", lambda: None, 0, 0, attrs={
        "get": b("http.get", _http_get, 1, 1),
        "GET": b("http.GET", _http_get_json, 1, 1),
        "put": b("http.put", lambda u, p: _http_put(u, p), 2, 2),
        "PUT": b("http.PUT", lambda u, p: json.loads(_http_put(u, p) or "null"), 2, 2),
        "post": b("http.post", lambda u, p: _http_put(u, p, "POST"), 2, 2),
        "POST": b("http.POST",
                  lambda u, p: json.loads(_http_put(u, p, "POST") or "null"), 2, 2),
    })
    env["https"] = env["http"]

    return env
