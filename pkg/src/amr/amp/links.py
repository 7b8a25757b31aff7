"""Link negotiation, keepalive, and fragmented RPC over any transport.

A link comes up through LINK -> ACK (+ LINK back when authorized); a
port may demand a capability, validated against the node's registered
secret, and simply withholds the acknowledgment otherwise.  Links are
probed with PING/PONG and drop to DOWN after consecutive misses; a DOWN
peer must renegotiate, there is no silent resurrection.

RPC payloads above the fragment threshold travel as RPCHEAD plus ordered
RPCDATA chunks keyed by rpc id; stream transports send one RPCHEADDATA.
Loss is silent by design; incomplete reassemblies age out.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .. import capability as cap_mod
from .frames import (
    ACK, INFO, LINK, PING, PONG, RPCDATA, RPCHEAD, RPCHEADDATA, SCAN, UNLINK,
    AmpMessage, FrameError, encode_frame, decode_frame,
    pack_rpcdata, pack_rpchead, pack_rpcheaddata,
    unpack_rpcdata, unpack_rpchead, unpack_rpcheaddata,
)
from .transports import HttpClientTransport, open_transport, parse_url


class LinkState:
    NEGOTIATING = "NEGOTIATING"
    UP = "UP"
    DOWN = "DOWN"


@dataclass
class Link:
    peer: str = ""
    address: tuple = ()
    transport: object = None
    state: str = LinkState.NEGOTIATING
    direction: str = ""
    url: str = ""
    cap_text: Optional[str] = None
    granted_rights: int = 0
    last_pong: float = 0.0
    last_ping: float = 0.0
    missed: int = 0
    acked: bool = False


@dataclass
class _Reassembly:
    op: str = ""
    total: int = 0
    frag_count: int = 0
    frags: dict = field(default_factory=dict)
    started: float = 0.0
    have_head: bool = False


class AmpEndpoint:
    """One per world: owns its ports, links, and RPC reassembly buffers."""

    def __init__(self, world, poll_ms: float = 2000.0, miss_limit: int = 3,
                 frag_threshold: int = 1200, reassembly_tmo_ms: float = 10_000.0,
                 max_concurrent_rpcs: int = 64):
        self.world = world
        self.poll_ms = poll_ms
        self.miss_limit = miss_limit
        self.frag_threshold = frag_threshold
        self.reassembly_tmo_ms = reassembly_tmo_ms
        self.max_concurrent_rpcs = max_concurrent_rpcs

        self.ports: list = []
        self.port_secrets: dict = {}  # transport id -> secret Port
        self.links: dict = {}         # peer name -> Link
        self._by_address: dict = {}   # address -> Link
        self._reassembly: dict = {}   # (peer, rpc_id) -> _Reassembly
        self._http_outbox: dict = {}  # peer name -> bytearray
        self._client_port = None
        self._seq = 0
        self._rpc_id = random.getrandbits(32)
        self.counters: dict = {}

    # -- identity / small helpers --

    @property
    def name(self) -> str:
        return self.world.name

    def count(self, key: str, n: int = 1):
        self.counters[key] = self.counters.get(key, 0) + n

    def _next_seq(self) -> int:
        self._seq = (self._seq + 1) & 0xFFFFFFFF
        return self._seq

    def _next_rpc_id(self) -> int:
        self._rpc_id = (self._rpc_id + 1) & 0xFFFFFFFF
        return self._rpc_id

    # -- ports --

    def open_port(self, url: str, secure: Optional[cap_mod.Port] = None):
        scheme, _, _ = parse_url(url)
        if scheme == "http":
            transport = open_transport(url, self._sink,
                                       collect_replies=self._drain_http)
        else:
            transport = open_transport(url, self._sink)
        self.ports.append(transport)
        if secure is not None:
            self.port_secrets[id(transport)] = secure
        self.world.emit("port", {"url": url})
        return transport

    def close(self):
        for t in self.ports:
            t.close()
        if self._client_port is not None:
            self._client_port.close()

    def _port_for(self, scheme: str):
        for t in self.ports:
            if t.scheme == scheme:
                return t
        if scheme == "udp":
            return self.open_port("udp://0.0.0.0:0")
        if scheme == "tcp":
            return self.open_port("tcp://0.0.0.0:0")
        if scheme == "http":
            if self._client_port is None:
                self._client_port = HttpClientTransport(self._sink)
            return self._client_port
        raise ValueError(f"no port for scheme {scheme!r}")

    # -- receive path: transport thread -> world context --

    def _sink(self, data: bytes, reply_addr):
        self.world.submit(lambda: self._handle_raw(data, reply_addr))

    def _drain_http(self, peer_addr) -> bytes:
        """HTTP responses piggyback queued frames (client poll path)."""
        out = bytearray()
        deadline = time.monotonic() + 0.05
        while time.monotonic() < deadline:
            if any(self._http_outbox.values()):
                break
            time.sleep(0.005)
        for peer, buf in list(self._http_outbox.items()):
            if buf:
                out.extend(buf)
                self._http_outbox[peer] = bytearray()
        return bytes(out)

    def _handle_raw(self, data: bytes, reply_addr):
        offset = 0
        view = memoryview(data)
        while offset < len(data):
            try:
                from .frames import decode_prefix
                m, used = decode_prefix(bytes(view[offset:]))
            except FrameError:
                self.count("bad_frames")
                return
            offset += used
            self.handle_frame(m, reply_addr)

    # -- frame handling (world context) --

    def handle_frame(self, m: AmpMessage, reply_addr, transport=None):
        if m.dest and m.dest != self.name:
            self._route_elsewhere(m)
            return
        handler = {
            LINK: self._on_link, ACK: self._on_ack, PING: self._on_ping,
            PONG: self._on_pong, UNLINK: self._on_unlink,
            RPCHEAD: self._on_rpchead, RPCDATA: self._on_rpcdata,
            RPCHEADDATA: self._on_rpcheaddata,
            SCAN: self._on_scan, INFO: self._on_info,
        }.get(m.type)
        if handler is None:
            self.count("unknown_frames")
            return
        handler(m, reply_addr)

    def _route_elsewhere(self, m: AmpMessage):
        link = self.links.get(m.dest)
        if link is not None and link.state == LinkState.UP:
            self._send_raw(link, encode_frame(m))
            self.count("routed")
        else:
            self.count("route_dropped")

    # -- link negotiation --

    def connect(self, url: str, cap_text: Optional[str] = None,
                direction: str = "") -> Link:
        scheme, host, port = parse_url(url)
        transport = self._port_for(scheme)
        if scheme == "http":
            address = ("http", f"http://{host}:{port}")
        else:
            address = (scheme, (host, port))
        link = self._by_address.get(address)
        if link is None:
            link = Link(address=address, transport=transport, url=url,
                        cap_text=cap_text, direction=direction)
            self._by_address[address] = link
        link.cap_text = cap_text
        if direction:
            link.direction = direction
        link.url = url
        link.state = LinkState.NEGOTIATING
        link.acked = False
        self._send_link_request(link)
        return link

    def _send_link_request(self, link: Link):
        body = (link.cap_text or "").encode("utf-8")
        m = AmpMessage(LINK, self.name, link.peer, self._next_seq(), body)
        self._send_raw(link, encode_frame(m))

    def wait_up(self, link: Link, timeout_s: float = 3.0,
                retries: int = 3) -> bool:
        deadline = time.monotonic() + timeout_s
        resent = 0
        while time.monotonic() < deadline:
            if link.state == LinkState.UP:
                return True
            time.sleep(0.02)
            if resent < retries and link.state == LinkState.NEGOTIATING:
                elapsed = timeout_s - (deadline - time.monotonic())
                if elapsed > 0.5 * (resent + 1):
                    self.world.submit(lambda: self._send_link_request(link))
                    resent += 1
        if link.state != LinkState.UP:
            link.state = LinkState.DOWN
        return False

    def _on_link(self, m: AmpMessage, reply_addr):
        secret = self._secret_for_addr(reply_addr)
        granted = 0
        if secret is not None:
            try:
                cap = cap_mod.cap_of_string(m.body.decode("utf-8"))
            except (cap_mod.FormatError, UnicodeDecodeError):
                self.count("auth_failed")
                return
            if not cap_mod.check_rights(cap, cap.rights, secret):
                self.count("auth_failed")
                return  # ACK withheld
            granted = cap.rights
        link = self._link_for(m.source, reply_addr)
        link.peer = m.source
        link.granted_rights = granted
        ack = AmpMessage(ACK, self.name, m.source, m.seq)
        self._send_raw(link, encode_frame(ack))
        if m.dest == self.name:
            # reply leg of the handshake: we initiated, now fully up
            link.state = LinkState.UP
            link.last_pong = self.world.now()
            self.world.emit("link+", {"peer": m.source, "url": link.url})
        else:
            # initiation: acknowledge and send our own LINK back
            reply = AmpMessage(LINK, self.name, m.source, self._next_seq(),
                               (link.cap_text or "").encode("utf-8"))
            self._send_raw(link, encode_frame(reply))
            if link.state != LinkState.UP:
                link.state = LinkState.UP
                link.last_pong = self.world.now()
                self.world.emit("link+", {"peer": m.source, "url": link.url})

    def _on_ack(self, m: AmpMessage, reply_addr):
        link = self.links.get(m.source) or self._by_address.get(reply_addr)
        if link is not None:
            link.acked = True
            if not link.peer:
                link.peer = m.source
                self.links[m.source] = link

    def _on_unlink(self, m: AmpMessage, reply_addr):
        link = self.links.get(m.source)
        if link is not None:
            link.state = LinkState.DOWN
            self.world.emit("link-", {"peer": m.source})

    def _on_ping(self, m: AmpMessage, reply_addr):
        pong = AmpMessage(PONG, self.name, m.source, m.seq)
        link = self.links.get(m.source)
        if link is not None:
            self._send_raw(link, encode_frame(pong))
        else:
            self._send_to_addr(reply_addr, encode_frame(pong))

    def _on_pong(self, m: AmpMessage, reply_addr):
        link = self.links.get(m.source)
        if link is not None:
            link.last_pong = self.world.now()
            link.missed = 0

    def _on_scan(self, m: AmpMessage, reply_addr):
        self._send_to_addr(reply_addr, encode_frame(
            AmpMessage(INFO, self.name, m.source, m.seq,
                       self.world.descriptor_json().encode("utf-8"))))

    def _on_info(self, m: AmpMessage, reply_addr):
        self.world.emit("info", {"peer": m.source,
                                 "body": m.body.decode("utf-8", "replace")})

    def _secret_for_addr(self, reply_addr):
        # one secret per endpoint port; match by transport scheme
        for t in self.ports:
            if id(t) in self.port_secrets and t.scheme == reply_addr[0]:
                return self.port_secrets[id(t)]
        return None

    def _link_for(self, peer: str, reply_addr) -> Link:
        link = self.links.get(peer)
        if link is None:
            link = self._by_address.get(reply_addr)
        if link is None:
            scheme = reply_addr[0]
            link = Link(peer=peer, address=reply_addr,
                        transport=self._port_for(scheme))
            self._by_address[reply_addr] = link
        if reply_addr[1] is not None:
            link.address = reply_addr
        link.peer = peer
        self.links[peer] = link
        return link

    # -- unlink / keepalive --

    def unlink(self, peer: str):
        link = self.links.get(peer)
        if link is None:
            return
        self._send_raw(link, encode_frame(
            AmpMessage(UNLINK, self.name, peer, self._next_seq())))
        link.state = LinkState.DOWN
        self.world.emit("link-", {"peer": peer})

    def tick(self, now: float):
        """Keepalive and reassembly aging; runs in the world context."""
        for link in list(self.links.values()):
            if link.state != LinkState.UP:
                continue
            if now - link.last_ping >= self.poll_ms:
                if link.last_ping and now - link.last_pong >= self.poll_ms:
                    link.missed += 1
                if link.missed >= self.miss_limit:
                    link.state = LinkState.DOWN
                    self.world.emit("link-", {"peer": link.peer,
                                              "reason": "keepalive"})
                    continue
                link.last_ping = now
                self._send_raw(link, encode_frame(
                    AmpMessage(PING, self.name, link.peer, self._next_seq())))
        stale = [key for key, r in self._reassembly.items()
                 if now - r.started > self.reassembly_tmo_ms]
        for key in stale:
            del self._reassembly[key]
            self.count("rpc_expired")

    # -- rpc --

    def rpc(self, peer: str, op: str, payload: bytes) -> bool:
        link = self.links.get(peer)
        if link is None or link.state != LinkState.UP:
            return False
        rpc_id = self._next_rpc_id()
        if link.transport.stream_like and len(payload) <= self.frag_threshold:
            body = pack_rpcheaddata(rpc_id, op, payload)
            return self._send_raw(link, encode_frame(
                AmpMessage(RPCHEADDATA, self.name, peer, self._next_seq(), body)))
        chunks = [payload[i:i + self.frag_threshold]
                  for i in range(0, len(payload), self.frag_threshold)] or [b""]
        head = pack_rpchead(rpc_id, len(payload), len(chunks), op)
        ok = self._send_raw(link, encode_frame(
            AmpMessage(RPCHEAD, self.name, peer, self._next_seq(), head)))
        for index, chunk in enumerate(chunks):
            body = pack_rpcdata(rpc_id, index, len(chunks), chunk)
            ok = self._send_raw(link, encode_frame(
                AmpMessage(RPCDATA, self.name, peer, self._next_seq(), body))) and ok
        return ok

    def _on_rpchead(self, m: AmpMessage, reply_addr):
        try:
            rpc_id, total, frag_count, op = unpack_rpchead(m.body)
        except FrameError:
            self.count("bad_frames")
            return
        key = (m.source, rpc_id)
        if len(self._reassembly) >= self.max_concurrent_rpcs and key not in self._reassembly:
            self.count("rpc_overflow")
            return
        r = self._reassembly.setdefault(key, _Reassembly(started=self.world.now()))
        r.op, r.total, r.frag_count, r.have_head = op, total, frag_count, True
        self._try_complete(key, m.source)

    def _on_rpcdata(self, m: AmpMessage, reply_addr):
        try:
            rpc_id, frag_index, frag_count, chunk = unpack_rpcdata(m.body)
        except FrameError:
            self.count("bad_frames")
            return
        key = (m.source, rpc_id)
        if len(self._reassembly) >= self.max_concurrent_rpcs and key not in self._reassembly:
            self.count("rpc_overflow")
            return
        r = self._reassembly.setdefault(key, _Reassembly(started=self.world.now()))
        r.frags[frag_index] = chunk
        if not r.frag_count:
            r.frag_count = frag_count
        self._try_complete(key, m.source)

    def _on_rpcheaddata(self, m: AmpMessage, reply_addr):
        try:
            rpc_id, op, payload = unpack_rpcheaddata(m.body)
        except FrameError:
            self.count("bad_frames")
            return
        self.world.on_rpc(m.source, op, payload)

    def _try_complete(self, key, peer: str):
        r = self._reassembly.get(key)
        if r is None or not r.have_head or len(r.frags) < r.frag_count:
            return
        payload = b"".join(r.frags.get(i, b"") for i in range(r.frag_count))
        del self._reassembly[key]
        if len(payload) != r.total:
            self.count("rpc_corrupt")
            return
        self.world.on_rpc(peer, r.op, payload)

    # -- raw send --

    def _send_raw(self, link: Link, data: bytes) -> bool:
        if link.address and link.address[1] is not None:
            return bool(link.transport.send(data, link.address))
        # peer reachable only through its own polling (pure http client)
        self._http_outbox.setdefault(link.peer, bytearray()).extend(data)
        return True

    def _send_to_addr(self, reply_addr, data: bytes) -> bool:
        if reply_addr[1] is None:
            # http inbound without return address: queue for next poll
            self._http_outbox.setdefault("", bytearray()).extend(data)
            return True
        for t in self.ports:
            if t.scheme == reply_addr[0]:
                return bool(t.send(data, reply_addr))
        if self._client_port is not None and reply_addr[0] == "http":
            return bool(self._client_port.send(data, reply_addr))
        return False

    # -- queries --

    def linked_names(self) -> list:
        return [p for p, l in self.links.items() if l.state == LinkState.UP]

    def linked_urls(self) -> list:
        return [l.url or f"{l.address[0]}://{l.address[1]}"
                for l in self.links.values() if l.state == LinkState.UP]

    def link_by_direction(self, direction: str) -> Optional[Link]:
        for link in self.links.values():
            if link.direction == direction and link.state == LinkState.UP:
                return link
        return None
