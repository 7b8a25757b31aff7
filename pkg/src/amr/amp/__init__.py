"""Agent Management Port: wire codec, links, keepalive, fragmented RPC."""

from .frames import (
    AmpMessage, FrameError, BadMagic, Truncated, UnknownType,
    encode_frame, decode_frame, frames_from_stream,
    ACK, LINK, PING, PONG, UNLINK, RPCHEAD, RPCDATA, RPCHEADDATA, SCAN, INFO,
)
from .links import AmpEndpoint, Link, LinkState
from .transports import open_transport, parse_url

__all__ = [
    "AmpMessage", "FrameError", "BadMagic", "Truncated", "UnknownType",
    "encode_frame", "decode_frame", "frames_from_stream",
    "ACK", "LINK", "PING", "PONG", "UNLINK", "RPCHEAD", "RPCDATA",
    "RPCHEADDATA", "SCAN", "INFO",
    "AmpEndpoint", "Link", "LinkState", "open_transport", "parse_url",
]
