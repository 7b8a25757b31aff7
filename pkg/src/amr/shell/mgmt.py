"""Management HTTP API: the console's control plane.

All mutations funnel through the world queue, so no request ever observes
a half-applied scheduler pass.  GET /api/events is a server-sent event
stream carrying pass reports and lifecycle events; everything else is
plain JSON over GET/POST/DELETE.  If a built console bundle is present
its static files are served at the root.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..abl.errors import AblSyntaxError, ValidationError
from ..world import LevelViolation, UnknownClass, World, WorldError

SSE_HEARTBEAT_S = 15.0

MIME = {".html": "text/html", ".js": "text/javascript",
        ".css": "text/css", ".map": "application/json",
        ".svg": "image/svg+xml", ".ico": "image/x-icon"}


def _agent_row(proc) -> dict:
    r = proc.resources
    return {
        "id": proc.id, "class": proc.class_name, "level": proc.level,
        "node": proc.node.id, "next": proc.next, "parent": proc.parent,
        "priority": proc.priority,
        "flags": {"blocked": proc.blocked, "suspended": proc.suspended,
                  "dead": proc.dead, "kill": proc.kill},
        "resources": {"sliceMs": r.slice_ms, "cpuUsedMs": round(r.cpu_used_ms, 3),
                      "cpuLimitMs": r.cpu_limit_ms,
                      "tsOpsUsed": r.ts_ops_used,
                      "agentsCreated": r.agents_created},
        "trace": list(proc.trace[-20:]),
    }


class ManagementServer:
    def __init__(self, world: World, host: str = "127.0.0.1", port: int = 8600,
                 static_dir: str = ""):
        self.world = world
        self.static_dir = static_dir or _default_static_dir()
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _json(self, code: int, payload):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(body)

            def _read_json(self):
                length = int(self.headers.get("Content-Length", 0))
                if length == 0:
                    return {}
                try:
                    return json.loads(self.rfile.read(length).decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    return None

            def do_GET(self):
                try:
                    server.handle_get(self)
                except BrokenPipeError:
                    pass

            def do_POST(self):
                server.handle_post(self)

            def do_DELETE(self):
                server.handle_delete(self)

            def do_OPTIONS(self):
                self.send_response(204)
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods",
                                 "GET, POST, DELETE, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.send_header("Content-Length", "0")
                self.end_headers()

        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self.port = self.httpd.server_address[1]
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        daemon=True, name=f"mgmt-{self.port}")

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()

    # ------------------------------------------------------------------

    def handle_get(self, req):
        world = self.world
        url = urlparse(req.path)
        path = url.path
        query = parse_qs(url.query)

        if path == "/api/world":
            req._json(200, {
                "name": world.name,
                "running": world._running,
                "nodes": [{"id": n.id, "position": n.position,
                           "agents": len(n.processes)}
                          for n in world.nodes()],
                "links": world.virtual_links(),
                "counters": dict(world.counters),
            })
        elif path == "/api/agents":
            node = (query.get("node") or [None])[0]
            rows = []
            for n in world.nodes():
                if node and n.id != node:
                    continue
                rows.extend(_agent_row(p) for p in n.processes.values())
            req._json(200, rows)
        elif path.startswith("/api/agents/"):
            pid = path.split("/")[3]
            proc = world.find_process(pid)
            if proc is None:
                req._json(404, {"error": f"no agent '{pid}'"})
            else:
                row = _agent_row(proc)
                row["body"] = _jsonable(proc.body)
                req._json(200, row)
        elif path.startswith("/api/ts/"):
            node_id = path.split("/")[3]
            node = world.node(node_id)
            if node is None:
                req._json(404, {"error": f"no node '{node_id}'"})
                return
            arity = query.get("arity")
            tuples = world.call(lambda: node.store.all_tuples(
                int(arity[0]) if arity else None, world.now()))
            req._json(200, {"node": node_id, "tuples": _jsonable(tuples)})
        elif path == "/api/links":
            links = [{"peer": l.peer, "state": l.state, "url": l.url,
                      "direction": l.direction,
                      "transport": l.address[0] if l.address else ""}
                     for l in world.endpoint.links.values()]
            req._json(200, links + world.virtual_links())
        elif path == "/api/classes":
            req._json(200, [{"name": name,
                             "warnings": prepared.warnings,
                             "activities": list(prepared.cls.activities)}
                            for name, prepared in world.library.items()])
        elif path == "/api/logs":
            req._json(200, world.logs[-int((query.get("n") or ["200"])[0]):])
        elif path == "/api/events":
            self._serve_sse(req)
        elif path == "/api/dead":
            req._json(200, world.dead_log[-200:])
        else:
            self._serve_static(req, path)

    def handle_post(self, req):
        world = self.world
        path = urlparse(req.path).path
        body = req._read_json()
        if body is None:
            req._json(400, {"error": "malformed JSON body"})
            return

        if path == "/api/agents":
            cls = body.get("class")
            if not isinstance(cls, str):
                req._json(400, {"error": "class name required"})
                return
            try:
                pid = world.call(lambda: world.create_agent(
                    cls, body.get("args"), int(body.get("level", 1)),
                    node_id=body.get("node")))
                req._json(201, {"id": pid})
            except LevelViolation as e:
                req._json(409, {"error": str(e)})
            except UnknownClass as e:
                req._json(404, {"error": str(e)})
            except (WorldError, ValueError) as e:
                req._json(400, {"error": str(e)})
        elif path == "/api/step":
            n = int(body.get("n", 1))
            if world._running:
                reports = world.call(lambda: [world.scheduler.pass_once()
                                              for _ in range(n)])
            else:
                reports = world.step(n)
            req._json(200, [r.to_value() for r in reports])
        elif path == "/api/run":
            on = bool(body.get("on", True))
            if on:
                world.start()
            else:
                world.stop()
            req._json(200, {"running": world._running})
        elif path == "/api/classes":
            source = body.get("source")
            if not isinstance(source, str):
                req._json(400, {"error": "source text required"})
                return
            try:
                name = world.call(lambda: world.compile_class(source))
                prepared = world.library[name]
                req._json(201, {"name": name, "warnings": prepared.warnings})
            except (AblSyntaxError, ValidationError, WorldError) as e:
                detail = {"error": str(e)}
                if isinstance(e, ValidationError):
                    detail["kind"] = e.kind
                if getattr(e, "line", 0):
                    detail["line"] = e.line
                    detail["col"] = e.col
                req._json(400, detail)
        elif path.startswith("/api/ts/"):
            node_id = path.split("/")[3]
            node = world.node(node_id)
            if node is None:
                req._json(404, {"error": f"no node '{node_id}'"})
                return
            t = body.get("tuple")
            if not isinstance(t, list):
                req._json(400, {"error": "tuple must be an array"})
                return
            try:
                world.call(lambda: node.store.out(t, world.now()))
                world.wake()
                req._json(201, {"stored": True})
            except Exception as e:  # noqa: BLE001 - arity/value checks
                req._json(400, {"error": str(e)})
        else:
            req._json(404, {"error": f"no route {path}"})

    def handle_delete(self, req):
        world = self.world
        path = urlparse(req.path).path
        if path.startswith("/api/agents/"):
            pid = path.split("/")[3]
            if pid != "*" and world.find_process(pid) is None:
                req._json(404, {"error": f"no agent '{pid}'"})
                return
            world.call(lambda: world.kill_agent(pid))
            req._json(200, {"killed": pid})
        else:
            req._json(404, {"error": f"no route {path}"})

    # ------------------------------------------------------------------

    def _serve_sse(self, req):
        events: queue.Queue = queue.Queue(maxsize=1024)

        def push(event, payload):
            try:
                events.put_nowait((event, payload))
            except queue.Full:
                pass

        self.world.subscribe(push)
        try:
            req.send_response(200)
            req.send_header("Content-Type", "text/event-stream")
            req.send_header("Cache-Control", "no-cache")
            req.send_header("Access-Control-Allow-Origin", "*")
            req.send_header("Connection", "close")
            req.end_headers()
            req.wfile.write(b": connected\n\n")
            req.wfile.flush()
            while True:
                try:
                    event, payload = events.get(timeout=SSE_HEARTBEAT_S)
                except queue.Empty:
                    req.wfile.write(b": keepalive\n\n")
                    req.wfile.flush()
                    continue
                data = json.dumps(_jsonable(payload))
                req.wfile.write(f"event: {event}\ndata: {data}\n\n".encode())
                req.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.world.unsubscribe(push)

    def _serve_static(self, req, path: str):
        if not self.static_dir:
            req._json(404, {"error": f"no route {path}"})
            return
        rel = "index.html" if path == "/" else path.lstrip("/")
        full = os.path.realpath(os.path.join(self.static_dir, rel))
        root = os.path.realpath(self.static_dir)
        if not full.startswith(root) or not os.path.isfile(full):
            req._json(404, {"error": f"no route {path}"})
            return
        with open(full, "rb") as fh:
            body = fh.read()
        ext = os.path.splitext(full)[1]
        req.send_response(200)
        req.send_header("Content-Type", MIME.get(ext, "application/octet-stream"))
        req.send_header("Content-Length", str(len(body)))
        req.end_headers()
        req.wfile.write(body)


def _default_static_dir() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    for candidate in (
        os.path.join(here, "..", "..", "..", "frontend", "dist"),
        os.path.join(os.getcwd(), "frontend", "dist"),
    ):
        full = os.path.realpath(candidate)
        if os.path.isdir(full):
            return full
    return ""


def _jsonable(value):
    """Strip non-JSON values (code objects) out of inspection payloads."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    return str(value)


__all__ = ["ManagementServer"]
