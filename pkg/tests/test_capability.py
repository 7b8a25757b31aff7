"""Ports, rights, one-way protection, and the capability text format."""

from __future__ import annotations

import pytest

from amr import capability as cap
from amr.rng import Xoshiro256


def test_rights_constants_exact():
    assert cap.RIGHTS["HOST_INFO"] == 0x01
    assert cap.RIGHTS["HOST_READ"] == 0x02
    assert cap.RIGHTS["HOST_WRITE"] == 0x04
    assert cap.RIGHTS["HOST_EXEC"] == 0x08
    assert cap.RIGHTS["PSR_READ"] == 0x01
    assert cap.RIGHTS["PSR_WRITE"] == 0x02
    assert cap.RIGHTS["PSR_CREATE"] == 0x04
    assert cap.RIGHTS["PSR_DELETE"] == 0x08
    assert cap.RIGHTS["PSR_EXEC"] == 0x10
    assert cap.RIGHTS["PSR_KILL"] == 0x20
    assert cap.RIGHTS["PSR_ALL"] == 0xFF
    assert cap.RIGHTS["NEG_SCHED"] == 0x08
    assert cap.RIGHTS["NEG_CPU"] == 0x10
    assert cap.RIGHTS["NEG_RES"] == 0x20
    assert cap.RIGHTS["NEG_LIFE"] == 0x40
    assert cap.RIGHTS["NEG_LEVEL"] == 0x80
    assert cap.RIGHTS["PRV_ALL_RIGHTS"] == 0xFF


def test_unique_ports_differ():
    assert cap.unique_port() != cap.unique_port()


def test_port_of_string_fixed_bytes():
    port = cap.port_of_string("12:34:56:78:90:12")
    assert port.data == bytes([0x12, 0x34, 0x56, 0x78, 0x90, 0x12])
    assert str(port) == "12:34:56:78:90:12".upper()


def test_short_port_text_pads():
    assert cap.port_of_string("12:34:56:78").data == \
        bytes([0x12, 0x34, 0x56, 0x78, 0, 0])


def test_seeded_ports_reproducible():
    a = cap.unique_port(Xoshiro256(77))
    b = cap.unique_port(Xoshiro256(77))
    assert a == b


def test_encode_private_deterministic_and_sensitive():
    secret = cap.port_of_string("aa:bb:cc:dd:ee:ff")
    assert cap.encode_private(0, 0xFF, secret) == cap.encode_private(0, 0xFF, secret)
    seen = {cap.encode_private(0, r, secret).data for r in range(256)}
    assert len(seen) == 256  # collision scan over the whole rights byte


def test_full_flow_restrict_and_check():
    secret = cap.unique_port(Xoshiro256(1))
    service = cap.unique_port(Xoshiro256(2))
    supercap = cap.make_capability(service, 0, 0xFF, secret)
    assert cap.check_rights(supercap, 0x20, secret)
    restr = cap.restrict(supercap, 0x20, secret)
    assert restr.rights == 0x20
    assert cap.check_rights(restr, 0x20, secret)
    assert not cap.check_rights(restr, 0xFF, secret)


def test_restrict_identity():
    secret = cap.unique_port(Xoshiro256(3))
    c = cap.make_capability(cap.unique_port(Xoshiro256(4)), 7, 0x31, secret)
    assert cap.restrict(c, 0x31, secret) == c


def test_restrict_cannot_widen():
    secret = cap.unique_port(Xoshiro256(5))
    c = cap.make_capability(cap.unique_port(Xoshiro256(6)), 0, 0x20, secret)
    with pytest.raises(cap.InvalidCapability):
        cap.restrict(c, 0xFF, secret)


def test_restrict_requires_valid_holder():
    secret = cap.unique_port(Xoshiro256(7))
    c = cap.make_capability(cap.unique_port(Xoshiro256(8)), 0, 0xFF, secret)
    forged = cap.Capability(c.service_port, c.obj, 0xFF,
                            cap.port_of_string("00:00:00:00:00:01"))
    with pytest.raises(cap.InvalidCapability):
        cap.restrict(forged, 0x01, secret)


def test_tampered_rights_fail_check():
    secret = cap.unique_port(Xoshiro256(9))
    c = cap.make_capability(cap.unique_port(Xoshiro256(10)), 0, 0x20, secret)
    tampered = cap.Capability(c.service_port, c.obj, 0xFF, c.protection_port)
    assert not cap.check_rights(tampered, 0xFF, secret)


def test_zero_request_needs_valid_protection():
    secret = cap.unique_port(Xoshiro256(11))
    c = cap.make_capability(cap.unique_port(Xoshiro256(12)), 0, 0x20, secret)
    assert cap.check_rights(c, 0x00, secret)
    bad = cap.Capability(c.service_port, c.obj, 0x20,
                         cap.port_of_string("de:ad:be:ef:00:00"))
    assert not cap.check_rights(bad, 0x00, secret)


def test_text_format_exact():
    c = cap.Capability(cap.port_of_string("12:34:56:78:90:12"), 0, 32,
                       cap.port_of_string("aa:bb:cc:dd:ee:ff"))
    assert cap.cap_to_string(c) == "[12:34:56:78:90:12] (0 (32) [AA:BB:CC:DD:EE:FF])"


def test_text_round_trip():
    secret = cap.unique_port(Xoshiro256(13))
    c = cap.make_capability(cap.unique_port(Xoshiro256(14)), 9, 255, secret)
    assert "(255)" in cap.cap_to_string(c)
    assert cap.cap_of_string(cap.cap_to_string(c)) == c


def test_bad_text_rejected():
    with pytest.raises(cap.FormatError):
        cap.cap_of_string("[12:34] nope")


def test_forgery_resistance_sample():
    # full 1e5-round scan runs in the acceptance suite
    rng = Xoshiro256(1234)
    secret = cap.unique_port(Xoshiro256(15))
    c = cap.make_capability(cap.unique_port(Xoshiro256(16)), 0, 0x20, secret)
    hits = 0
    for _ in range(5000):
        forged = cap.Capability(c.service_port, c.obj, 0xFF, cap.Port(rng.bytes(6)))
        if cap.check_rights(forged, 0xFF, secret):
            hits += 1
    assert hits == 0


def test_registry_lookup_and_check():
    secret = cap.unique_port(Xoshiro256(17))
    service = cap.unique_port(Xoshiro256(18))
    reg = cap.PortRegistry()
    reg.register(service, secret)
    c = cap.make_capability(service, 0, cap.RIGHTS["NEG_LIFE"], secret)
    assert reg.check(c, cap.RIGHTS["NEG_LIFE"])
    assert not reg.check(c, cap.RIGHTS["NEG_LEVEL"])
    other = cap.make_capability(cap.unique_port(Xoshiro256(19)), 0, 0xFF, secret)
    assert not reg.check(other, 0x01)  # unregistered service port
