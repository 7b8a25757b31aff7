"""Addressed signals: local delivery, class broadcast, trace forwarding.

Delivery is best-effort by design.  A signal reaches a remote agent only
along migration traces: when an agent leaves a node, the node remembers
agent id -> outgoing route for a while, and forwards matching signals
toward it, refreshing the entry on every use.  A garbage collector drops
stale traces; sends after that are silently counted away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .values import contains_function

DEFAULT_TRACE_TTL_MS = 60_000.0
DEFAULT_MAX_HOPS = 8

KILL_SIGNAL = "KILL"  # platform-reserved; terminates the target


@dataclass
class TraceEntry:
    route: tuple  # ("node", virtual_node_id) | ("link", peer_name)
    last_used: float


class TraceTable:
    def __init__(self):
        self.entries: dict = {}

    def record(self, agent_id: str, route: tuple, now: float):
        self.entries[agent_id] = TraceEntry(route, now)

    def lookup(self, agent_id: str) -> Optional[TraceEntry]:
        return self.entries.get(agent_id)

    def refresh(self, agent_id: str, now: float):
        entry = self.entries.get(agent_id)
        if entry is not None:
            entry.last_used = max(entry.last_used, now)

    def gc(self, now: float, ttl_ms: float = DEFAULT_TRACE_TTL_MS) -> int:
        stale = [aid for aid, e in self.entries.items()
                 if now - e.last_used > ttl_ms]
        for aid in stale:
            del self.entries[aid]
        return len(stale)


def send(world, from_node, from_id: str, to: str, sig: str, arg,
         hops: int = DEFAULT_MAX_HOPS):
    """Deliver locally, forward along a trace, or drop silently."""
    target = world.find_process(to)
    if target is not None and not target.dead:
        if sig == KILL_SIGNAL:
            target.mark_kill()
        else:
            target.enqueue_signal(sig, arg, from_id)
        world.emit("signal", {"to": to, "sig": sig, "from": from_id})
        world.wake()
        return
    if hops <= 0:
        world.count("signals_dropped")
        return
    entry = from_node.traces.lookup(to)
    if entry is None:
        world.count("signals_dropped")
        return
    kind, dest = entry.route
    if kind == "link":
        if contains_function(arg):
            world.count("signals_dropped")
            return
        ok = world.amp_forward_signal(dest, {
            "to": to, "sig": sig, "arg": arg, "from": from_id,
            "hops": float(hops - 1),
        })
        if ok:
            from_node.traces.refresh(to, world.now())
        else:
            world.count("signals_dropped")
    else:
        # virtual routes stay inside this world; find_process already
        # covered them, so the agent is gone
        world.count("signals_dropped")


def deliver_remote(world, node, payload: dict):
    """A signal arrived over AMP for this world."""
    to = str(payload.get("to", ""))
    sig = str(payload.get("sig", ""))
    arg = payload.get("arg")
    sender = str(payload.get("from", ""))
    hops = int(payload.get("hops", 0) or 0)
    send(world, node, sender, to, sig, arg, hops=hops)


def broadcast(world, from_node, from_id: str, agent_class: str,
              range_hops: int, sig: str, arg):
    """All local same-class agents except the sender; links carry it on."""
    for proc in list(from_node.processes.values()):
        if proc.id == from_id or proc.dead:
            continue
        if proc.class_name == agent_class:
            proc.enqueue_signal(sig, arg, from_id)
    world.emit("signal", {"to": f"class:{agent_class}", "sig": sig,
                          "from": from_id})
    world.wake()
    if range_hops <= 0:
        return
    payload = {"class": agent_class, "sig": sig, "arg": arg,
               "from": from_id, "hops": float(range_hops - 1)}
    for neighbor in world.virtual_neighbors(from_node):
        _broadcast_local(world, neighbor, payload)
    if not contains_function(arg):
        for peer in world.linked_peers(from_node):
            world.amp_forward_broadcast(peer, payload)


def _broadcast_local(world, node, payload: dict):
    for proc in list(node.processes.values()):
        if proc.dead or proc.id == payload.get("from"):
            continue
        if proc.class_name == payload.get("class"):
            proc.enqueue_signal(str(payload["sig"]), payload.get("arg"),
                                str(payload.get("from", "")))
    world.wake()


def deliver_remote_broadcast(world, node, payload: dict):
    _broadcast_local(world, node, payload)
    hops = int(payload.get("hops", 0) or 0)
    if hops > 0:
        onward = dict(payload)
        onward["hops"] = float(hops - 1)
        for neighbor in world.virtual_neighbors(node):
            _broadcast_local(world, neighbor, onward)
        for peer in world.linked_peers(node):
            world.amp_forward_broadcast(peer, onward)


def kill_agent(world, from_node, from_id: str, target_id: str):
    send(world, from_node, from_id, target_id, KILL_SIGNAL, None)
