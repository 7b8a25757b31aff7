"""Sparse-rights capabilities over 48-bit ports.

A capability names a service port, an object, a rights byte, and a
protection port computed one-way from (object, rights, node-secret), so
holders can pass and weaken rights but never forge them.  The protection
function is a protocol constant: the first 6 bytes of SHA-256 over the
11-byte message object(4, big-endian) || rights(1) || secret(6).
"""

from __future__ import annotations

import hashlib
import secrets as _secrets
from dataclasses import dataclass

PORT_LEN = 6

RIGHTS = {
    "HOST_INFO": 0x01, "HOST_READ": 0x02,
    "HOST_WRITE": 0x04, "HOST_EXEC": 0x08,
    "PSR_READ": 0x01, "PSR_WRITE": 0x02,
    "PSR_CREATE": 0x04, "PSR_DELETE": 0x08,
    "PSR_EXEC": 0x10, "PSR_KILL": 0x20,
    "PSR_ALL": 0xFF,
    "NEG_SCHED": 0x08, "NEG_CPU": 0x10,
    "NEG_RES": 0x20, "NEG_LIFE": 0x40,
    "NEG_LEVEL": 0x80,
    "PRV_ALL_RIGHTS": 0xFF,
}


class FormatError(ValueError):
    pass


class InvalidCapability(ValueError):
    pass


@dataclass(frozen=True)
class Port:
    data: bytes

    def __post_init__(self):
        if len(self.data) != PORT_LEN:
            raise FormatError(f"a port is {PORT_LEN} bytes, got {len(self.data)}")

    def __str__(self):
        return ":".join(f"{b:02X}" for b in self.data)


def unique_port(rng=None) -> Port:
    """Random 48-bit port; pass a seeded generator for reproducible tests."""
    if rng is not None:
        return Port(rng.bytes(PORT_LEN))
    return Port(_secrets.token_bytes(PORT_LEN))


def port_of_string(text: str) -> Port:
    parts = text.strip().split(":")
    if not parts or len(parts) > PORT_LEN:
        raise FormatError(f"bad port text {text!r}")
    try:
        data = bytes(int(p, 16) for p in parts)
    except ValueError:
        raise FormatError(f"bad port text {text!r}") from None
    return Port(data.ljust(PORT_LEN, b"\x00"))


def port_to_string(port: Port) -> str:
    return str(port)


@dataclass(frozen=True)
class Capability:
    service_port: Port
    obj: int
    rights: int
    protection_port: Port

    def __post_init__(self):
        if not 0 <= self.rights <= 0xFF:
            raise FormatError("rights is an 8-bit field")
        if self.obj < 0:
            raise FormatError("object is an unsigned integer")


def encode_private(obj: int, rights: int, secret: Port) -> Port:
    msg = int(obj).to_bytes(4, "big") + bytes([rights & 0xFF]) + secret.data
    return Port(hashlib.sha256(msg).digest()[:PORT_LEN])


def make_capability(service: Port, obj: int, rights: int, secret: Port) -> Capability:
    return Capability(service, obj, rights, encode_private(obj, rights, secret))


def check_rights(cap: Capability, requested: int, secret: Port) -> bool:
    if (requested & cap.rights) != requested:
        return False
    return cap.protection_port == encode_private(cap.obj, cap.rights, secret)


def restrict(cap: Capability, new_rights: int, secret: Port) -> Capability:
    """Weaken a valid capability; rights only ever shrink along a chain."""
    if not check_rights(cap, cap.rights, secret):
        raise InvalidCapability("protection port does not validate")
    if (new_rights & cap.rights) != new_rights:
        raise InvalidCapability("restriction cannot add rights")
    return make_capability(cap.service_port, cap.obj, new_rights, secret)


def cap_to_string(cap: Capability) -> str:
    return (f"[{cap.service_port}] ({cap.obj} ({cap.rights}) "
            f"[{cap.protection_port}])")


def cap_of_string(text: str) -> Capability:
    import re
    m = re.fullmatch(
        r"\s*\[([0-9a-fA-F:]+)\]\s*\(\s*(\d+)\s*\(\s*(\d+)\s*\)\s*"
        r"\[([0-9a-fA-F:]+)\]\s*\)\s*",
        text)
    if not m:
        raise FormatError(f"bad capability text {text!r}")
    rights = int(m.group(3))
    if rights > 0xFF:
        raise FormatError("rights is an 8-bit field")
    return Capability(port_of_string(m.group(1)), int(m.group(2)),
                      rights, port_of_string(m.group(4)))


class PortRegistry:
    """Node-side service-port -> secret-port map used to grant requests."""

    def __init__(self):
        self._secrets: dict = {}

    def register(self, service: Port, secret: Port):
        self._secrets[str(service)] = str(secret)

    def secret_for(self, service: Port):
        text = self._secrets.get(str(service))
        return port_of_string(text) if text else None

    def check(self, cap: Capability, requested: int) -> bool:
        secret = self.secret_for(cap.service_port)
        return secret is not None and check_rights(cap, requested, secret)
