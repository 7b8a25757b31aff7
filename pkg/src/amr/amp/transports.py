"""UDP, TCP, and HTTP carriers for AMP frames.

Each transport accepts raw frame bytes and hands complete frames to a
sink callback (on its own receiver thread; the endpoint serializes them
into the world context).  HTTP is request/reply: a POST to /amp carries
frames and the response returns any replies plus queued outbound frames
for that peer, so a pure client can be reached by polling.
"""

from __future__ import annotations

import socket
import threading
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .frames import split_raw_frames


def parse_url(url: str):
    """'udp://host:port' -> (scheme, host, port)."""
    scheme, sep, rest = url.partition("://")
    if not sep:
        raise ValueError(f"bad transport url {url!r}")
    rest = rest.split("/", 1)[0]
    host, _, port = rest.rpartition(":")
    if not host:
        raise ValueError(f"transport url needs host:port, got {url!r}")
    return scheme.lower(), host, int(port)


class Transport:
    scheme = "?"
    stream_like = False

    def __init__(self, url: str, sink):
        self.url = url
        self.sink = sink  # fn(frame_bytes_buffer: bytes, reply_address)
        self.closed = False

    def send(self, data: bytes, address):
        raise NotImplementedError

    def close(self):
        self.closed = True


class UdpTransport(Transport):
    scheme = "udp"
    stream_like = False

    def __init__(self, url: str, sink):
        super().__init__(url, sink)
        _, host, port = parse_url(url)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.settimeout(0.25)
        self.port = self.sock.getsockname()[1]
        self._thread = threading.Thread(target=self._recv_loop, daemon=True,
                                        name=f"amp-udp-{self.port}")
        self._thread.start()

    def _recv_loop(self):
        while not self.closed:
            try:
                data, addr = self.sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                return
            self.sink(data, ("udp", addr))

    def send(self, data: bytes, address):
        kind, addr = address
        try:
            self.sock.sendto(data, addr)
            return True
        except OSError:
            return False

    def close(self):
        self.closed = True
        try:
            self.sock.close()
        except OSError:
            pass


class TcpTransport(Transport):
    scheme = "tcp"
    stream_like = True

    def __init__(self, url: str, sink):
        super().__init__(url, sink)
        _, host, port = parse_url(url)
        self.listener = socket.create_server((host, port))
        self.listener.settimeout(0.25)
        self.port = self.listener.getsockname()[1]
        self._outbound: dict = {}
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True,
                                        name=f"amp-tcp-{self.port}")
        self._thread.start()

    def _accept_loop(self):
        while not self.closed:
            try:
                conn, addr = self.listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            with self._lock:
                self._outbound[tuple(addr)] = conn
            threading.Thread(target=self._conn_loop, args=(conn, tuple(addr)),
                             daemon=True).start()

    def _conn_loop(self, conn: socket.socket, addr):
        buffer = bytearray()
        conn.settimeout(0.5)
        try:
            while not self.closed:
                try:
                    chunk = conn.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    return
                if not chunk:
                    return
                buffer.extend(chunk)
                try:
                    frames = split_raw_frames(buffer)
                except Exception:
                    return  # corrupt stream: drop the connection
                for raw in frames:
                    self.sink(raw, ("tcp", addr))
        finally:
            with self._lock:
                if self._outbound.get(addr) is conn:
                    del self._outbound[addr]
            try:
                conn.close()
            except OSError:
                pass

    def _connection(self, addr):
        with self._lock:
            conn = self._outbound.get(addr)
        if conn is None:
            conn = socket.create_connection(addr, timeout=2.0)
            with self._lock:
                self._outbound[addr] = conn
            threading.Thread(target=self._conn_loop, args=(conn, addr),
                             daemon=True).start()
        return conn

    def send(self, data: bytes, address):
        kind, addr = address
        addr = tuple(addr)
        try:
            conn = self._connection(addr)
            conn.sendall(data)
            return True
        except OSError:
            with self._lock:
                self._outbound.pop(addr, None)
            return False

    def close(self):
        self.closed = True
        try:
            self.listener.close()
        except OSError:
            pass
        with self._lock:
            for conn in self._outbound.values():
                try:
                    conn.close()
                except OSError:
                    pass
            self._outbound.clear()


class HttpTransport(Transport):
    """POST /amp with frame bytes; the response body carries reply frames."""

    scheme = "http"
    stream_like = True

    def __init__(self, url: str, sink, collect_replies=None):
        super().__init__(url, sink)
        _, host, port = parse_url(url)
        self.collect_replies = collect_replies or (lambda peer: b"")
        transport = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                if self.path != "/amp":
                    self.send_response(404)
                    self.end_headers()
                    return
                length = int(self.headers.get("Content-Length", 0))
                data = self.rfile.read(length)
                peer = ("http", None)
                transport.sink(data, peer)
                reply = transport.collect_replies(peer)
                self.send_response(200)
                self.send_header("Content-Type", "application/octet-stream")
                self.send_header("Content-Length", str(len(reply)))
                self.end_headers()
                self.wfile.write(reply)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer((host, port), Handler)
        self.port = self.server.server_address[1]
        self._thread = threading.Thread(target=self.server.serve_forever,
                                        daemon=True,
                                        name=f"amp-http-{self.port}")
        self._thread.start()

    def send(self, data: bytes, address):
        kind, target = address
        try:
            req = urllib.request.Request(
                f"{target}/amp", data=data,
                headers={"Content-Type": "application/octet-stream"})
            with urllib.request.urlopen(req, timeout=2.0) as resp:
                reply = resp.read()
            if reply:
                self.sink(reply, ("http", target))
            return True
        except OSError:
            return False

    def close(self):
        self.closed = True
        self.server.shutdown()
        self.server.server_close()


class HttpClientTransport(Transport):
    """Client-only HTTP sender for nodes that open no inbound port."""

    scheme = "http"
    stream_like = True

    def __init__(self, sink):
        super().__init__("http://client", sink)
        self.port = 0

    def send(self, data: bytes, address):
        kind, target = address
        try:
            req = urllib.request.Request(
                f"{target}/amp", data=data,
                headers={"Content-Type": "application/octet-stream"})
            with urllib.request.urlopen(req, timeout=2.0) as resp:
                reply = resp.read()
            if reply:
                self.sink(reply, ("http", target))
            return True
        except OSError:
            return False


SCHEMES = {"udp": UdpTransport, "tcp": TcpTransport, "http": HttpTransport}


def open_transport(url: str, sink, **kwargs) -> Transport:
    scheme, _, _ = parse_url(url)
    cls = SCHEMES.get(scheme)
    if cls is None:
        raise ValueError(f"unsupported transport scheme {scheme!r}")
    if cls is HttpTransport:
        return cls(url, sink, **kwargs)
    return cls(url, sink)
