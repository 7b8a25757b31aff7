"""Worlds: physical node state, virtual nodes, migration, and the run loop.

A world is one runtime instance: at least one virtual node (each with its
own process table, tuple space, and trace cache), a single scheduler
serializing every agent selection, a class library of compiled
constructors, a capability registry, and optional AMP ports toward other
worlds.  External threads (transports, management API, shell timers) hand
work in through submit(); the loop drains it between passes.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import Future
from dataclasses import dataclass
from queue import Empty, Queue
from typing import Optional

from . import codec, signals as signals_mod
from .abl.errors import AblRuntimeError
from .abl.interp import Builtin, Closure, Fuel, evaluate_function
from .abl.nodes import AgentClass, Assign, FunctionValue, Member, This
from .abl.parser import ClassDecl, build_agent_class, parse_class
from .abl.validate import validate_against_level, validate_class
from .aios import optable
from .aios.bind import OPPOSITES, bind_env
from .amp.links import AmpEndpoint, LinkState
from .capability import PortRegistry, RIGHTS
from .rng import Xoshiro256
from .scheduler import AgentProcess, Resources, Scheduler
from .signals import TraceTable
from .tuplespace import TupleStore
from .values import deep_copy, value_text


class WorldError(Exception):
    kind = "world"


class UnknownClass(WorldError):
    kind = "unknownClass"


class LevelViolation(WorldError):
    kind = "levelViolation"


class ResourceLimit(WorldError):
    kind = "resourceLimit"


class NoRoute(WorldError):
    kind = "noRoute"


@dataclass
class WorldConfig:
    seed: int = 0
    slice_ms: float = 200.0
    cpu_limit_ms: float = 5000.0
    lifetime_ms: Optional[float] = None
    ts_ops_limit: Optional[int] = None
    agents_limit: Optional[int] = None
    code_limit: int = 50 * 1024
    max_arity: int = 10
    trace_ttl_ms: float = 60_000.0
    max_hops: int = 8
    poll_ms: float = 2000.0
    frag_threshold: int = 1200
    compress: bool = False
    print_log: bool = False
    gc_interval_ms: float = 1000.0

    @classmethod
    def from_dict(cls, data: dict) -> "WorldConfig":
        cfg = cls()
        for key, value in (data or {}).items():
            if hasattr(cfg, key):
                setattr(cfg, key, value)
        return cfg


@dataclass
class PreparedClass:
    cls: AgentClass
    warnings: list
    level_reports: dict


class VirtualNode:
    def __init__(self, node_id: str, x: float, y: float, max_arity: int = 10):
        self.id = node_id
        self.position = {"x": float(x), "y": float(y)}
        self.processes: dict = {}
        self.store = TupleStore(max_arity=max_arity)
        self.traces = TraceTable()

    @property
    def pos_key(self):
        return (self.position["x"], self.position["y"])


def _direction_of(dx: float, dy: float) -> str:
    # screen-style axes: EAST = +x, SOUTH = +y
    if dx > 0 and dy == 0:
        return "EAST"
    if dx < 0 and dy == 0:
        return "WEST"
    if dy > 0 and dx == 0:
        return "SOUTH"
    if dy < 0 and dx == 0:
        return "NORTH"
    if dx > 0 and dy > 0:
        return "SE"
    if dx > 0 and dy < 0:
        return "NE"
    if dx < 0 and dy > 0:
        return "SW"
    if dx < 0 and dy < 0:
        return "NW"
    return ""


class World:
    version = "amr-0.1"
    kind = "node"

    def __init__(self, config: Optional[WorldConfig] = None,
                 name: Optional[str] = None):
        self.config = config or WorldConfig()
        self.rng = Xoshiro256(self.config.seed or int(time.time_ns() & 0xFFFFFFFF))
        self._lock = threading.RLock()
        self._queue: Queue = Queue()
        self._wake = threading.Event()
        self._running = False
        self._loop_thread: Optional[threading.Thread] = None

        self._nodes: dict = {}
        self._by_pos: dict = {}
        self._links: dict = {}  # (node_id, direction) -> node_id
        self._edges: set = set()  # (from_id, to_id)
        root_id = self.rng.ident(8)
        self.root = VirtualNode(root_id, 0, 0, self.config.max_arity)
        self._nodes[root_id] = self.root
        self._by_pos[self.root.pos_key] = self.root
        self.name = name or root_id.upper()
        self.current_node_id = root_id

        self.library: dict = {}
        self.capability_registry = PortRegistry()
        self.endpoint = AmpEndpoint(self, poll_ms=self.config.poll_ms,
                                    frag_threshold=self.config.frag_threshold)
        self.counters: dict = {}
        self.logs: list = []
        self.dead_log: list = []
        self.events: list = []
        self._subscribers: list = []
        self._extensions: dict = {0: {}, 1: {}, 2: {}, 3: {}}
        self.scheduler = Scheduler(self)
        self._last_gc = 0.0
        self.cluster = None

    # ------------------------------------------------------------------
    # time, events, counters

    def now(self) -> float:
        return time.time() * 1000.0

    def count(self, key: str, n: int = 1):
        self.counters[key] = self.counters.get(key, 0) + n

    def emit(self, event: str, payload):
        self.events.append((event, payload))
        if len(self.events) > 4096:
            del self.events[:2048]
        for fn in list(self._subscribers):
            try:
                fn(event, payload)
            except Exception:
                pass

    def subscribe(self, fn):
        self._subscribers.append(fn)
        return fn

    def unsubscribe(self, fn):
        if fn in self._subscribers:
            self._subscribers.remove(fn)

    def agent_log(self, proc: AgentProcess, line: str):
        entry = {"agent": proc.id, "node": proc.node.id, "line": line,
                 "time": self.now()}
        self.logs.append(entry)
        if self.config.print_log:
            print(f"[{proc.node.id}/{proc.id}] {line}")
        self.emit("log", entry)

    def log_lines(self) -> list:
        return [e["line"] for e in self.logs]

    # ------------------------------------------------------------------
    # external work intake

    def submit(self, fn):
        """Run fn inside the world context; returns a Future."""
        fut: Future = Future()

        def task():
            try:
                fut.set_result(fn())
            except BaseException as e:  # noqa: BLE001 - surfaced via future
                fut.set_exception(e)

        on_loop_thread = (self._loop_thread is not None
                          and threading.current_thread() is self._loop_thread)
        if self._running and not on_loop_thread:
            self._queue.put(task)
            self.wake()
        else:
            # inline: already inside the world context (or no loop running)
            with self._lock:
                task()
        return fut

    def call(self, fn, timeout: float = 10.0):
        return self.submit(fn).result(timeout=timeout)

    def wake(self):
        self._wake.set()

    def _drain_queue(self):
        while True:
            try:
                task = self._queue.get_nowait()
            except Empty:
                return
            task()

    # ------------------------------------------------------------------
    # run / step

    def step(self, n: int = 1) -> list:
        reports = []
        with self._lock:
            for _ in range(max(0, int(n))):
                self._drain_queue()
                reports.append(self.scheduler.pass_once())
        return reports

    def start(self):
        if self._running:
            return
        self._running = True
        self._loop_thread = threading.Thread(target=self._loop, daemon=True,
                                             name=f"world-{self.name}")
        self._loop_thread.start()

    def stop(self):
        self._running = False
        self.wake()
        if self._loop_thread is not None:
            self._loop_thread.join(timeout=2.0)
            self._loop_thread = None

    def shutdown(self):
        self.stop()
        self.endpoint.close()
        if self.cluster is not None:
            self.cluster.stop()

    def _loop(self):
        while self._running:
            with self._lock:
                self._drain_queue()
                report = self.scheduler.pass_once()
                delay = self._next_delay(bool(report.actions))
            if delay > 0:
                self._wake.wait(timeout=delay)
            self._wake.clear()

    def _next_delay(self, had_actions: bool) -> float:
        if had_actions:
            return 0.0
        now = self.now()
        deadlines = []
        for node in self._nodes.values():
            d = node.store.next_deadline()
            if d is not None:
                deadlines.append(d)
            for proc in node.processes.values():
                if proc.wake_deadline is not None:
                    deadlines.append(proc.wake_deadline)
                for t in proc.timers.values():
                    deadlines.append(t.deadline)
                if not proc.dead and not proc.suspended and not proc.blocked \
                        and (proc.next or proc.signals or proc.schedule or proc.block):
                    return 0.0
        if self.endpoint.links:
            deadlines.append(now + self.config.poll_ms / 2)
        if not deadlines:
            return 0.25
        return min(0.25, max(0.001, (min(deadlines) - now) / 1000.0))

    def quiescent(self) -> bool:
        for node in self._nodes.values():
            if node.processes:
                return False
        return self._queue.empty()

    def wait_quiescent(self, timeout_s: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if self.quiescent():
                return True
            time.sleep(0.01)
        return self.quiescent()

    # ------------------------------------------------------------------
    # deadline service (runs at the top of every pass)

    def service_deadlines(self, now: float):
        for node in self._nodes.values():
            node.store.expire_waiters(now)
            for proc in list(node.processes.values()):
                if proc.dead:
                    continue
                if proc.suspended and proc.wake_deadline is not None \
                        and now >= proc.wake_deadline:
                    proc.suspended = False
                    proc.wake_deadline = None
                for sig, timer in list(proc.timers.items()):
                    if now >= timer.deadline:
                        proc.enqueue_signal(timer.sig, timer.arg, proc.id)
                        if timer.repeat:
                            timer.deadline = now + timer.tmo_ms
                        else:
                            del proc.timers[sig]
        self.endpoint.tick(now)
        if now - self._last_gc >= self.config.gc_interval_ms:
            self._last_gc = now
            for node in self._nodes.values():
                node.store.sweep(now)
                removed = node.traces.gc(now, self.config.trace_ttl_ms)
                if removed:
                    self.count("traces_gc", removed)

    # ------------------------------------------------------------------
    # virtual node management

    def nodes(self):
        return self._nodes.values()

    def node_ids(self) -> list:
        return list(self._nodes.keys())

    def node(self, node_id: str) -> Optional[VirtualNode]:
        return self._nodes.get(node_id)

    def node_at(self, x: float, y: float) -> Optional[VirtualNode]:
        return self._by_pos.get((float(x), float(y)))

    def add_node(self, x: float, y: float, node_id: Optional[str] = None) -> str:
        key = (float(x), float(y))
        if key in self._by_pos:
            raise WorldError(f"a node already sits at {key}")
        nid = node_id or self.rng.ident(8)
        while nid in self._nodes:
            nid = self.rng.ident(8)
        node = VirtualNode(nid, x, y, self.config.max_arity)
        self._nodes[nid] = node
        self._by_pos[key] = node
        self.emit("node+", {"id": nid, "x": x, "y": y})
        return nid

    def connect_nodes(self, a: dict, b: dict):
        """Directed virtual link a -> b; direction comes from the delta."""
        na = self.node_at(a.get("x", 0), a.get("y", 0))
        nb = self.node_at(b.get("x", 0), b.get("y", 0))
        if na is None or nb is None:
            raise WorldError("connect needs two existing node positions")
        direction = _direction_of(nb.position["x"] - na.position["x"],
                                  nb.position["y"] - na.position["y"])
        self._links[(na.id, direction)] = nb.id
        self._edges.add((na.id, nb.id))
        self.emit("link+", {"from": na.id, "to": nb.id, "dir": direction,
                            "virtual": True})

    def disconnect_nodes(self, a: dict, b: dict):
        na = self.node_at(a.get("x", 0), a.get("y", 0))
        nb = self.node_at(b.get("x", 0), b.get("y", 0))
        if na is None or nb is None:
            return
        self._edges.discard((na.id, nb.id))
        for key, target in list(self._links.items()):
            if key[0] == na.id and target == nb.id:
                del self._links[key]
        self.emit("link-", {"from": na.id, "to": nb.id, "virtual": True})

    def virtual_link(self, node_id: str, direction: str) -> Optional[str]:
        return self._links.get((node_id, direction))

    def virtual_neighbors(self, node: VirtualNode) -> list:
        out = []
        for (src, _), dst in self._links.items():
            if src == node.id and self._nodes.get(dst) is not None:
                out.append(self._nodes[dst])
        return out

    def virtual_links(self) -> list:
        return [{"from": src, "dir": direction, "to": dst, "virtual": True}
                for (src, direction), dst in self._links.items()]

    def linked_peers(self, node: VirtualNode) -> list:
        return self.endpoint.linked_names()

    # ------------------------------------------------------------------
    # class library

    def _name_universe(self) -> set:
        names = set(optable.NAME_UNIVERSE)
        for table in self._extensions.values():
            names.update(table.keys())
        return names

    def _leveled_tables(self):
        world = self

        class Tables:
            @staticmethod
            def names_for_level(level):
                return set(optable.names_for_level(level)) \
                    | set(world._extensions[level].keys())

            @staticmethod
            def all_names():
                return world._name_universe()

        return Tables

    def compile_class(self, source, name: Optional[str] = None) -> str:
        """Parse/validate once; prepared for every level and reusable."""
        universe = self._name_universe()
        if isinstance(source, AgentClass):
            cls = source
            warnings = validate_class(cls, universe)
        elif isinstance(source, ClassDecl):
            cls = build_agent_class(source)
            warnings = validate_class(cls, universe)
        elif isinstance(source, str):
            self.count("class_parses")
            cls = parse_class(source, validate=False)
            warnings = validate_class(cls, universe)
        else:
            raise WorldError(f"cannot compile {type(source).__name__}")
        tables = self._leveled_tables()
        reports = {level: validate_against_level(cls, level, tables)
                   for level in range(4)}
        key = name or cls.name
        self.library[key] = PreparedClass(cls, warnings, reports)
        self.emit("class+", {"name": key})
        return key

    def open_class_file(self, path: str) -> str:
        with open(path, "r", encoding="utf-8") as fh:
            return self.compile_class(fh.read())

    # ------------------------------------------------------------------
    # agent lifecycle

    def _new_pid(self, node: VirtualNode) -> str:
        pid = self.rng.ident(8)
        while self.find_process(pid) is not None:
            pid = self.rng.ident(8)
        return pid

    def _fresh_resources(self) -> Resources:
        cfg = self.config
        deadline = None
        if cfg.lifetime_ms is not None:
            deadline = self.now() + cfg.lifetime_ms
        return Resources(slice_ms=cfg.slice_ms, cpu_limit_ms=cfg.cpu_limit_ms,
                         lifetime_deadline=deadline,
                         ts_ops_limit=cfg.ts_ops_limit,
                         agents_limit=cfg.agents_limit,
                         code_limit=cfg.code_limit)

    def create_agent(self, class_name: str, args=None, level: int = 1,
                     node_id: Optional[str] = None, parent: Optional[str] = None,
                     creator: Optional[AgentProcess] = None) -> str:
        prepared = self.library.get(class_name)
        if prepared is None:
            raise UnknownClass(f"class '{class_name}' is not compiled")
        if not 0 <= level <= 3:
            raise LevelViolation(f"level {level} out of range")
        if creator is not None:
            if level > creator.level:
                raise LevelViolation(
                    f"level-{creator.level} agent cannot create level {level}")
            limit = creator.resources.agents_limit
            if limit is not None and creator.resources.agents_created >= limit:
                raise ResourceLimit("agent creation budget exhausted")
            creator.resources.agents_created += 1
        node = self._nodes.get(node_id or self.current_node_id) or self.root
        cls = prepared.cls
        pid = self._new_pid(node)
        proc = AgentProcess(pid, class_name, level, node,
                            cls.activities, cls.transitions, cls.handlers,
                            body={}, next_activity=cls.next, parent=parent)
        proc.resources = self._fresh_resources()
        proc.created_ms = self.now()
        proc.env = bind_env(self, proc)
        self._init_body(proc, cls, args)
        node.processes[pid] = proc
        self.emit("agent+", {"id": pid, "class": class_name, "node": node.id,
                             "level": float(level)})
        self.wake()
        return pid

    def _init_body(self, proc: AgentProcess, cls: AgentClass, args):
        stmts = tuple(
            Assign(target=Member(obj=This(), field_name=name), expr=expr)
            for name, expr in cls.body_init.items())
        fn = FunctionValue(params=cls.params, body=stmts)
        call_args: list = []
        if len(cls.params) == 1:
            call_args = [args]
        elif len(cls.params) > 1:
            call_args = list(args) if isinstance(args, list) else [args]
        outcome = evaluate_function(fn, proc.body, call_args, proc.env,
                                    Fuel(slice_ms=proc.resources.slice_ms))
        if outcome.kind == "error":
            raise WorldError(f"body initialization failed: {outcome.error}")

    def fork_agent(self, parent: AgentProcess, overrides: dict) -> str:
        limit = parent.resources.agents_limit
        if limit is not None and parent.resources.agents_created >= limit:
            raise ResourceLimit("agent creation budget exhausted")
        parent.resources.agents_created += 1
        node = parent.node
        pid = self._new_pid(node)
        child = AgentProcess(pid, parent.class_name, parent.level, node,
                             parent.activities, parent.transitions,
                             parent.handlers, body=deep_copy(parent.body),
                             next_activity=parent.next, parent=parent.id)
        if isinstance(overrides, dict):
            for key, value in overrides.items():
                child.body[key] = deep_copy(value)
        child.resources = self._fresh_resources()
        child.created_ms = self.now()
        child.transition_pending = True  # child continues from the fork point
        child.env = bind_env(self, child)
        node.processes[pid] = child
        self.emit("agent+", {"id": pid, "class": child.class_name,
                             "node": node.id, "level": float(child.level),
                             "parent": parent.id})
        self.wake()
        return pid

    def find_process(self, pid: str) -> Optional[AgentProcess]:
        for node in self._nodes.values():
            proc = node.processes.get(pid)
            if proc is not None:
                return proc
        return None

    def kill_agent(self, pid: str, node_id: Optional[str] = None):
        if pid == "*":
            node = self._nodes.get(node_id or self.current_node_id)
            targets = list(node.processes.values()) if node else []
            for proc in targets:
                proc.mark_kill()
                proc.dead = True
                self.reap(proc)
            return
        proc = self.find_process(pid)
        if proc is not None:
            proc.mark_kill()
            proc.dead = True
            self.reap(proc)

    def reap(self, proc: AgentProcess):
        if proc.node.processes.pop(proc.id, None) is not None:
            if proc.waiter is not None:
                proc.node.store.cancel_waiter(proc.waiter)
                proc.waiter = None
            self.dead_log.append({"id": proc.id, "class": proc.class_name,
                                  "node": proc.node.id, "parent": proc.parent,
                                  "trace": list(proc.trace)})
            if len(self.dead_log) > 1024:
                del self.dead_log[:512]
            self.emit("agent-", {"id": proc.id, "class": proc.class_name,
                                 "node": proc.node.id})

    def rebind(self, proc: AgentProcess):
        proc.env = bind_env(self, proc)

    def processes(self) -> list:
        out = []
        for node in self._nodes.values():
            out.extend(node.processes.values())
        return out

    # ------------------------------------------------------------------
    # DIR resolution and mobility

    def resolve_dir(self, proc: Optional[AgentProcess], node: VirtualNode,
                    direction, for_link_query: bool = False):
        """Route for a move, or link information for a query."""
        d = direction
        if isinstance(d, str):
            if d in ("FORWARD", "BACKWARD", "OPPOSITE"):
                last = getattr(proc, "last_move_dir", None) if proc else None
                if not last:
                    return None
                d = last if d == "FORWARD" else OPPOSITES.get(last)
                if d is None:
                    return None
            if d == "ORIGIN":
                return ("node", self.root.id) if node.id != self.root.id else None
            target = self.virtual_link(node.id, d)
            if target is not None:
                return ("node", target)
            link = self.endpoint.link_by_direction(d)
            if link is not None:
                return ("link", link.peer)
            return None
        if isinstance(d, dict):
            tag = d.get("tag", "")
            if tag == "DIR.NODE":
                name = str(d.get("node"))
                if name in self._nodes and name != node.id:
                    return ("node", name)
                link = self.endpoint.links.get(name)
                if link is not None and link.state == LinkState.UP:
                    return ("link", name)
                return None
            if tag == "DIR.IP":
                pattern = str(d.get("ip", ""))
                if pattern == "%":
                    return list(self.endpoint.linked_names())
                if pattern == "*":
                    return list(self.endpoint.linked_urls())
                for peer, link in self.endpoint.links.items():
                    if link.state == LinkState.UP and link.url == pattern:
                        return ("link", peer)
                return None
            if tag == "DIR.DELTA":
                delta = d.get("delta") or {}
                target = self.node_at(node.position["x"] + float(delta.get("x", 0)),
                                      node.position["y"] + float(delta.get("y", 0)))
                return ("node", target.id) if target and target.id != node.id else None
            if tag == "DIR.PATH":
                pattern = str(d.get("path", ""))
                names = [n.id for n in self.virtual_neighbors(node)]
                if pattern in ("%", "*"):
                    return names
                if pattern.endswith("*"):
                    return [n for n in names if n.startswith(pattern[:-1])]
                return [n for n in names if n == pattern]
            if tag == "DIR.RANGE":
                if not for_link_query:
                    return None
                radius = float(d.get("radius", 0))
                out = []
                for other in self._nodes.values():
                    if other.id == node.id:
                        continue
                    dx = other.position["x"] - node.position["x"]
                    dy = other.position["y"] - node.position["y"]
                    if (dx * dx + dy * dy) ** 0.5 <= radius:
                        out.append(other.id)
                return out
            return None
        return None

    def link_query(self, proc: AgentProcess, direction):
        result = self.resolve_dir(proc, proc.node, direction, for_link_query=True)
        if isinstance(result, list):
            return result
        return result is not None

    def host_connect(self, url: str, cap_text: Optional[str] = None,
                     direction: str = "", wait: bool = True) -> bool:
        link = self.call(lambda: self.endpoint.connect(url, cap_text, direction))
        if not wait:
            return True
        return self.endpoint.wait_up(link)

    # ------------------------------------------------------------------
    # migration

    def migrate(self, proc: AgentProcess, direction):
        route = self.resolve_dir(proc, proc.node, direction)
        if route is None or isinstance(route, list):
            self.emit("warn", {"agent": proc.id,
                               "msg": f"no route for {value_text(direction)}"})
            self.count("migrate_no_route")
            return
        try:
            snapshot = codec.snapshot_process(proc, self.config.code_limit)
        except (codec.CycleError, codec.SizeLimitExceeded, codec.EncodeError) as e:
            self.emit("agent-fault", {"agent": proc.id, "msg": f"snapshot: {e}"})
            proc.dead = True
            return
        source_node = proc.node
        del source_node.processes[proc.id]
        proc.dead = True  # the local container is finished either way
        source_node.traces.record(proc.id, route, self.now())
        self.emit("agent-", {"id": proc.id, "class": proc.class_name,
                             "node": source_node.id, "reason": "migrate"})
        kind, dest = route
        if kind == "node":
            image = codec.restore_image(snapshot, proc.level)
            target = self._nodes[dest]
            moved = self.spawn_from_image(image, target)
            moved.last_move_dir = direction if isinstance(direction, str) else None
            self.count("virtual_hops")
        else:
            payload = codec.pack_payload(snapshot, compress=self.config.compress)
            if not self.endpoint.rpc(dest, "migrate", payload):
                self.count("migrate_lost")
        self.wake()

    def spawn_from_image(self, image: codec.ProcessImage,
                         node: VirtualNode) -> AgentProcess:
        pid = image.agent_id or self._new_pid(node)
        if self.find_process(pid) is not None:
            pid = self._new_pid(node)
        proc = AgentProcess(pid, image.class_name, image.level, node,
                            image.activities, image.transitions,
                            image.handlers, body=image.body,
                            next_activity=image.next)
        proc.resources = self._fresh_resources()
        proc.created_ms = self.now()
        for entry in image.blocks:
            proc.schedule.append(entry)
        proc.env = bind_env(self, proc)
        self._flag_level_violations(proc, image)
        node.processes[pid] = proc
        self.emit("agent+", {"id": pid, "class": proc.class_name,
                             "node": node.id, "level": float(proc.level),
                             "reason": "restore"})
        self.wake()
        return proc

    def _flag_level_violations(self, proc: AgentProcess,
                               image: codec.ProcessImage):
        """Restored code may exceed its granted level; the process still
        runs, the offending calls fail as unknown names at runtime."""
        cls = AgentClass(name=image.class_name, params=(), body_init={},
                         activities=image.activities,
                         transitions=image.transitions,
                         handlers=image.handlers, next=image.next)
        report = validate_against_level(cls, proc.level,
                                        self._leveled_tables())
        if report.violations:
            self.emit("level-violation", {
                "agent": proc.id, "level": float(proc.level),
                "ops": report.violations})

    def incoming_policy(self, advisory_level: int, link) -> int:
        """The destination decides; capability-bearing links may grant 2."""
        advisory = max(0, min(3, int(advisory_level)))
        rights_needed = RIGHTS["PSR_CREATE"] | RIGHTS["PSR_EXEC"]
        if link is not None and (link.granted_rights & rights_needed) == rights_needed:
            return min(advisory, 2)
        return min(advisory, 1)

    # ------------------------------------------------------------------
    # AMP integration (all in world context)

    def on_rpc(self, peer: str, op: str, payload: bytes):
        try:
            if op == "migrate":
                text = codec.unpack_payload(payload)
                advisory = _peek_level(text)
                link = self.endpoint.links.get(peer)
                granted = self.incoming_policy(advisory, link)
                image = codec.restore_image(text, granted)
                self.spawn_from_image(image, self.root)
            elif op == "signal":
                data = json.loads(payload.decode("utf-8"))
                signals_mod.deliver_remote(self, self.root, data)
            elif op == "broadcast":
                data = json.loads(payload.decode("utf-8"))
                signals_mod.deliver_remote_broadcast(self, self.root, data)
            elif op == "tuples":
                data = json.loads(payload.decode("utf-8"))
                now = self.now()
                for t in data.get("tuples", []):
                    self.root.store.out(t, now)
                self.wake()
            else:
                self.count("rpc_unknown_op")
        except Exception as e:  # noqa: BLE001 - remote input is untrusted
            self.count("rpc_rejected")
            self.emit("warn", {"msg": f"rpc {op} from {peer} rejected: {e}"})

    def amp_forward_signal(self, peer: str, payload: dict) -> bool:
        return self.endpoint.rpc(peer, "signal",
                                 json.dumps(payload).encode("utf-8"))

    def amp_forward_broadcast(self, peer: str, payload: dict) -> bool:
        return self.endpoint.rpc(peer, "broadcast",
                                 json.dumps(payload).encode("utf-8"))

    def remote_tuple_op(self, kind: str, proc: AgentProcess, to: str, arg):
        now = self.now()
        target_node = self._nodes.get(to)
        if kind == "store":
            tuples = [arg]
        elif kind == "collect":
            tuples = proc.node.store.take_all(arg, now)
        else:  # copyto
            tuples = proc.node.store.copy_all(arg, now)
        if target_node is not None:
            for t in tuples:
                target_node.store.out(t, now)
            self.wake()
            return
        link = self.endpoint.links.get(to)
        if link is None or link.state != LinkState.UP:
            raise AblRuntimeError("noLink", f"no link to node '{to}'")
        self.endpoint.rpc(to, "tuples",
                          json.dumps({"tuples": tuples}).encode("utf-8"))

    def descriptor_json(self) -> str:
        return json.dumps({
            "id": self.name,
            "nodes": self.node_ids(),
            "agents": sum(len(n.processes) for n in self._nodes.values()),
            "ports": [t.url for t in self.endpoint.ports],
        })

    # ------------------------------------------------------------------
    # AIOS extension hook

    def extend(self, levels, name: str, impl, arity=None):
        """Host-side AIOS extension; rebinds live processes."""
        if isinstance(levels, int):
            levels = [levels]
        min_args, max_args = 0, None
        if isinstance(arity, int):
            min_args = max_args = arity
        elif isinstance(arity, (list, tuple)) and arity:
            min_args, max_args = int(min(arity)), int(max(arity))
        for level in levels:
            self._extensions[int(level)][name] = (impl, min_args, max_args)
        for proc in self.processes():
            self.rebind(proc)

    def extension_builtins(self, proc: AgentProcess) -> dict:
        out = {}
        for name, (impl, min_args, max_args) in self._extensions[proc.level].items():
            out[name] = self._extension_builtin(name, impl, min_args, max_args, proc)
        return out

    def _extension_builtin(self, name, impl, min_args, max_args,
                           proc: AgentProcess) -> Builtin:
        if isinstance(impl, (Closure, FunctionValue)):
            def run_abl(interp, *args):
                from .abl.interp import call_value
                return call_value(interp, impl, list(args))
            return Builtin(name, run_abl, min_args, max_args, wants_interp=True)
        ctx = ExtensionContext(self, proc)

        def run_host(*args):
            return impl(ctx, *args)

        return Builtin(name, run_host, min_args, max_args)

    def extensions_for(self, level: int) -> dict:
        return dict(self._extensions[int(level)])


class ExtensionContext:
    """Host-extension handle on the calling agent process.

    Deferred completions must check `dead`/`kill` before acting; the
    mutating helpers here already no-op on finished processes.
    """

    def __init__(self, world: World, proc: AgentProcess):
        self.world = world
        self.process = proc

    @property
    def dead(self) -> bool:
        return self.process.dead

    @property
    def kill(self) -> bool:
        return self.process.kill

    def suspend(self, tmo_ms: float = 0):
        deadline = None if not tmo_ms else self.world.now() + float(tmo_ms)
        self.process.suspend_sleep(deadline)

    def wakeup(self):
        if self.dead or self.kill:
            return
        self.process.do_wakeup()
        self.world.wake()

    def kill_process(self):
        self.process.mark_kill()
        self.process.dead = True
        self.world.wake()

    def signal(self, sig: str, arg=None):
        if self.dead or self.kill:
            return
        self.process.enqueue_signal(str(sig), arg, "host")
        self.world.wake()

    def callback(self, fn, *args):
        if self.dead or self.kill:
            return None
        outcome = evaluate_function(fn, self.process.body, list(args),
                                    self.process.env,
                                    Fuel(slice_ms=self.process.resources.slice_ms))
        return outcome.value if outcome.kind == "returned" else None

    def defer(self, delay_ms: float, fn):
        timer = threading.Timer(max(0.0, delay_ms) / 1000.0,
                                lambda: self.world.submit(fn))
        timer.daemon = True
        timer.start()
        return timer


def _peek_level(snapshot_text: str) -> int:
    try:
        doc = json.loads(snapshot_text)
        return int(doc.get("level", 0))
    except (ValueError, TypeError):
        return 0
