"""Physical cluster bootstrap: a rows x cols grid of worker processes.

Each worker runs its own world in a separate OS process, opens external
ports (one per protocol) plus four directional internal UDP ports, links
itself to its von-Neumann neighbors, and executes the cluster's `todo`
script.  The controller spawning the grid is not part of it; it reaches
the grid through any external port.

Port numbering, worker index i = row*cols + col:
    external  port0 + i*portn + protocolIndex
    internal  port1 + i*portn + d   (d: NORTH 0, SOUTH 1, WEST 2, EAST 3)
A link in direction D targets the neighbor's opposite directional port.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time

from .amp.frames import AmpMessage, PING, PONG, encode_frame, decode_frame

DIR_INDEX = {"NORTH": 0, "SOUTH": 1, "WEST": 2, "EAST": 3}
OPP = {"NORTH": "SOUTH", "SOUTH": "NORTH", "WEST": "EAST", "EAST": "WEST"}


def worker_name(row: int, col: int) -> str:
    return f"n{row}x{col}"


class ClusterHandle:
    def __init__(self, world, desc: dict):
        self.world = world
        self.rows = int(desc.get("rows", 1))
        self.cols = int(desc.get("cols", 1))
        self.port0 = int(desc.get("port0", 11001))
        self.port1 = int(desc.get("port1", 10001))
        self.portn = int(desc.get("portn", 100))
        proto = desc.get("proto") or ["udp"]
        self.protos = [proto] if isinstance(proto, str) else list(proto)
        self.poll_ms = float(desc.get("poll", 2000))
        self.todo = str(desc.get("todo", ""))
        self.host = str(desc.get("host", "127.0.0.1"))
        self.verbose = bool(desc.get("verbose", 0))
        self.workers: list = []
        self._poll_thread = None
        self._stopping = False

    def index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def external_port(self, i: int, proto_index: int = 0) -> int:
        return self.port0 + i * self.portn + proto_index

    def internal_port(self, i: int, direction: str) -> int:
        return self.port1 + i * self.portn + DIR_INDEX[direction]

    def _worker_config(self, row: int, col: int) -> dict:
        i = self.index(row, col)
        links = []
        neighbors = {"NORTH": (row - 1, col), "SOUTH": (row + 1, col),
                     "WEST": (row, col - 1), "EAST": (row, col + 1)}
        for direction, (r, c) in neighbors.items():
            if 0 <= r < self.rows and 0 <= c < self.cols:
                j = self.index(r, c)
                links.append({
                    "dir": direction,
                    "url": f"udp://{self.host}:{self.internal_port(j, OPP[direction])}",
                })
        return {
            "name": worker_name(row, col),
            "row": row, "col": col,
            "external": [
                {"proto": p,
                 "url": f"{p}://{self.host}:{self.external_port(i, k)}"}
                for k, p in enumerate(self.protos)],
            "internal": [
                {"dir": d,
                 "url": f"udp://{self.host}:{self.internal_port(i, d)}"}
                for d in DIR_INDEX],
            "links": links,
            "todo": self.todo,
            "seed": i + 1,
        }

    def start(self):
        for row in range(self.rows):
            for col in range(self.cols):
                cfg = self._worker_config(row, col)
                proc = subprocess.Popen(
                    [sys.executable, "-m", "amr", "--worker", json.dumps(cfg)],
                    stdout=None if self.verbose else subprocess.DEVNULL,
                    stderr=None if self.verbose else subprocess.DEVNULL)
                self.workers.append({
                    "name": cfg["name"], "row": row, "col": col,
                    "process": proc, "status": "starting",
                    "udp_port": self.external_port(self.index(row, col),
                                                   self._udp_index()),
                })
        self._poll_thread = threading.Thread(target=self._poll_loop, daemon=True)
        self._poll_thread.start()

    def _udp_index(self) -> int:
        for k, p in enumerate(self.protos):
            if p == "udp":
                return k
        return 0

    def _poll_loop(self):
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.settimeout(0.5)
        while not self._stopping:
            for worker in self.workers:
                if self._stopping:
                    break
                if worker["process"].poll() is not None:
                    worker["status"] = "down"
                    continue
                frame = encode_frame(AmpMessage(PING, "cluster-poll",
                                                worker["name"]))
                try:
                    sock.sendto(frame, (self.host, worker["udp_port"]))
                    data, _ = sock.recvfrom(65535)
                    reply = decode_frame(data)
                    worker["status"] = "up" if reply.type == PONG else "down"
                except (OSError, ValueError):
                    worker["status"] = "down"
            time.sleep(self.poll_ms / 1000.0)
        sock.close()

    def describe(self) -> dict:
        return {
            "rows": float(self.rows), "cols": float(self.cols),
            "workers": [
                {"name": w["name"], "status": w["status"],
                 "udp": f"udp://{self.host}:{w['udp_port']}"}
                for w in self.workers],
        }

    def statuses(self) -> dict:
        return {w["name"]: w["status"] for w in self.workers}

    def kill_worker(self, name: str):
        for w in self.workers:
            if w["name"] == name:
                w["process"].terminate()

    def stop(self):
        self._stopping = True
        for w in self.workers:
            if w["process"].poll() is None:
                w["process"].terminate()
        for w in self.workers:
            try:
                w["process"].wait(timeout=3.0)
            except subprocess.TimeoutExpired:
                w["process"].kill()


def run_worker(config_json: str) -> int:
    """Entry point for a spawned cluster worker process."""
    from .world import World, WorldConfig
    from .shell.session import Session

    cfg = json.loads(config_json)
    world = World(WorldConfig(seed=int(cfg.get("seed", 0))),
                  name=cfg["name"])
    for entry in cfg.get("external", []):
        world.endpoint.open_port(entry["url"])
    for entry in cfg.get("internal", []):
        world.endpoint.open_port(entry["url"])
    world.start()
    time.sleep(0.3)  # give siblings time to open their ports

    for entry in cfg.get("links", []):
        link = world.call(lambda e=entry: world.endpoint.connect(
            e["url"], direction=e["dir"]))
        world.endpoint.wait_up(link, timeout_s=5.0)

    session = Session(world)
    todo = cfg.get("todo", "")
    if todo:
        try:
            session.run_text(todo)
        except Exception as e:  # noqa: BLE001 - worker stays alive
            print(f"worker todo failed: {e}", file=sys.stderr)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        world.shutdown()
    return 0
