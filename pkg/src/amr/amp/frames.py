"""Bit-exact AMP frame layout.

    magic "AMP1" | version 0x01 | type | source[16] | dest[16]
    | seq u32 BE | body-length u32 BE | body

Node-name fields are UTF-8, zero-padded.  Frames are self-delimiting on
stream transports via the fixed header and length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MAGIC = b"AMP1"
VERSION = 1
NAME_LEN = 16
HEADER_LEN = 4 + 1 + 1 + NAME_LEN + NAME_LEN + 4 + 4
MAX_BODY = 16 * 1024 * 1024

ACK = 1
LINK = 2
PING = 3
PONG = 4
UNLINK = 5
RPCHEAD = 6
RPCDATA = 7
RPCHEADDATA = 8
SCAN = 9
INFO = 10

TYPE_NAMES = {
    ACK: "ACK", LINK: "LINK", PING: "PING", PONG: "PONG", UNLINK: "UNLINK",
    RPCHEAD: "RPCHEAD", RPCDATA: "RPCDATA", RPCHEADDATA: "RPCHEADDATA",
    SCAN: "SCAN", INFO: "INFO",
}


class FrameError(ValueError):
    pass


class BadMagic(FrameError):
    pass


class Truncated(FrameError):
    pass


class UnknownType(FrameError):
    pass


@dataclass
class AmpMessage:
    type: int
    source: str
    dest: str = ""
    seq: int = 0
    body: bytes = b""

    @property
    def type_name(self) -> str:
        return TYPE_NAMES.get(self.type, f"?{self.type}")


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")[:NAME_LEN]
    return raw.ljust(NAME_LEN, b"\x00")


def _unpack_name(raw: bytes) -> str:
    return raw.rstrip(b"\x00").decode("utf-8", errors="replace")


def encode_frame(m: AmpMessage) -> bytes:
    if m.type not in TYPE_NAMES:
        raise UnknownType(f"type {m.type}")
    return b"".join((
        MAGIC,
        bytes((VERSION, m.type)),
        _pack_name(m.source),
        _pack_name(m.dest),
        struct.pack(">II", m.seq & 0xFFFFFFFF, len(m.body)),
        m.body,
    ))


def decode_frame(data: bytes) -> AmpMessage:
    m, used = decode_prefix(data)
    if used != len(data):
        raise Truncated(f"{len(data) - used} trailing bytes")
    return m


def decode_prefix(data: bytes):
    """Decode one frame at the start of data; returns (message, bytes used)."""
    if len(data) < HEADER_LEN:
        raise Truncated(f"header needs {HEADER_LEN} bytes, got {len(data)}")
    if data[:4] != MAGIC:
        raise BadMagic(repr(data[:4]))
    version, mtype = data[4], data[5]
    if version != VERSION:
        raise BadMagic(f"version {version}")
    if mtype not in TYPE_NAMES:
        raise UnknownType(f"type {mtype}")
    src = _unpack_name(data[6:6 + NAME_LEN])
    dst = _unpack_name(data[6 + NAME_LEN:6 + 2 * NAME_LEN])
    seq, body_len = struct.unpack(">II", data[HEADER_LEN - 8:HEADER_LEN])
    if body_len > MAX_BODY:
        raise FrameError(f"body length {body_len} exceeds limit")
    end = HEADER_LEN + body_len
    if len(data) < end:
        raise Truncated(f"body needs {body_len} bytes, got {len(data) - HEADER_LEN}")
    return AmpMessage(mtype, src, dst, seq, bytes(data[HEADER_LEN:end])), end


def frames_from_stream(buffer: bytearray):
    """Consume complete frames from the front of a stream buffer."""
    out = []
    while True:
        if len(buffer) < HEADER_LEN:
            return out
        try:
            m, used = decode_prefix(bytes(buffer))
        except Truncated:
            return out
        del buffer[:used]
        out.append(m)


def split_raw_frames(buffer: bytearray):
    """Consume complete frames as raw byte strings (no body decoding).

    Raises on corrupt headers; stream callers drop the connection then.
    """
    out = []
    while len(buffer) >= HEADER_LEN:
        if bytes(buffer[:4]) != MAGIC:
            raise BadMagic(repr(bytes(buffer[:4])))
        (body_len,) = struct.unpack(">I", bytes(buffer[HEADER_LEN - 4:HEADER_LEN]))
        if body_len > MAX_BODY:
            raise FrameError(f"body length {body_len} exceeds limit")
        end = HEADER_LEN + body_len
        if len(buffer) < end:
            break
        out.append(bytes(buffer[:end]))
        del buffer[:end]
    return out


# -- RPC body packing --


def pack_rpchead(rpc_id: int, total_len: int, frag_count: int, op: str) -> bytes:
    op_raw = op.encode("utf-8")
    return struct.pack(">IIHH", rpc_id & 0xFFFFFFFF, total_len, frag_count,
                       len(op_raw)) + op_raw


def unpack_rpchead(body: bytes):
    if len(body) < 12:
        raise Truncated("rpchead")
    rpc_id, total_len, frag_count, op_len = struct.unpack(">IIHH", body[:12])
    op = body[12:12 + op_len].decode("utf-8", errors="replace")
    return rpc_id, total_len, frag_count, op


def pack_rpcdata(rpc_id: int, frag_index: int, frag_count: int,
                 chunk: bytes) -> bytes:
    return struct.pack(">IHH", rpc_id & 0xFFFFFFFF, frag_index,
                       frag_count) + chunk


def unpack_rpcdata(body: bytes):
    if len(body) < 8:
        raise Truncated("rpcdata")
    rpc_id, frag_index, frag_count = struct.unpack(">IHH", body[:8])
    return rpc_id, frag_index, frag_count, body[8:]


def pack_rpcheaddata(rpc_id: int, op: str, payload: bytes) -> bytes:
    op_raw = op.encode("utf-8")
    return struct.pack(">IH", rpc_id & 0xFFFFFFFF, len(op_raw)) + op_raw + payload


def unpack_rpcheaddata(body: bytes):
    if len(body) < 6:
        raise Truncated("rpcheaddata")
    rpc_id, op_len = struct.unpack(">IH", body[:6])
    op = body[6:6 + op_len].decode("utf-8", errors="replace")
    return rpc_id, op, body[6 + op_len:]
