"""AMP: frame codec, handshake, keepalive, fragmentation, fault injection."""

from __future__ import annotations

import time

import pytest
from hypothesis import given, settings, strategies as st

from amr.amp import frames as fr
from amr.amp.frames import AmpMessage, decode_frame, encode_frame
from amr.rng import Xoshiro256
from conftest import free_port


# ---------------------------------------------------------------- codec


def test_ping_round_trip_byte_exact():
    m = AmpMessage(fr.PING, "nodeA", "nodeB", 7, b"")
    raw = encode_frame(m)
    assert encode_frame(decode_frame(raw)) == raw


def test_rpcdata_round_trip():
    body = fr.pack_rpcdata(12, 3, 5, bytes(range(256)) * 5)
    m = AmpMessage(fr.RPCDATA, "src", "dst", 1, body)
    back = decode_frame(encode_frame(m))
    rpc_id, index, count, chunk = fr.unpack_rpcdata(back.body)
    assert (rpc_id, index, count) == (12, 3, 5)
    assert chunk == bytes(range(256)) * 5


def test_corrupted_magic():
    raw = bytearray(encode_frame(AmpMessage(fr.PING, "a", "b")))
    raw[0] = 0x58
    with pytest.raises(fr.BadMagic):
        decode_frame(bytes(raw))


def test_truncated_frame():
    raw = encode_frame(AmpMessage(fr.LINK, "a", "b", 0, b"payload"))
    with pytest.raises(fr.Truncated):
        decode_frame(raw[:-3])


def test_unknown_type():
    raw = bytearray(encode_frame(AmpMessage(fr.PING, "a", "b")))
    raw[5] = 0xEE
    with pytest.raises(fr.UnknownType):
        decode_frame(bytes(raw))


def test_stream_splitter_handles_partials():
    frames = [encode_frame(AmpMessage(fr.PING, "a", "b", i)) for i in range(3)]
    blob = b"".join(frames)
    buffer = bytearray()
    seen = []
    for i in range(0, len(blob), 7):  # dribble in 7-byte chunks
        buffer.extend(blob[i:i + 7])
        seen.extend(fr.split_raw_frames(buffer))
    assert seen == frames


def test_codec_fuzz_never_crashes():
    rng = Xoshiro256(2024)
    outcomes = {"ok": 0, "err": 0}
    for _ in range(20_000):
        buf = rng.bytes(rng.randrange(80) + 1)
        try:
            decode_frame(buf)
            outcomes["ok"] += 1
        except fr.FrameError:
            outcomes["err"] += 1
    assert outcomes["err"] > 0  # random buffers classify as errors


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=120))
def test_codec_fuzz_property(buf):
    try:
        decode_frame(buf)
    except fr.FrameError:
        pass  # every rejection is a classified error, never a crash


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10), st.text(max_size=10), st.text(max_size=10),
       st.integers(0, 2**32 - 1), st.binary(max_size=200))
def test_codec_round_trip_property(mtype, src, dst, seq, body):
    src = src.replace("\x00", "")[:16]
    dst = dst.replace("\x00", "")[:16]
    if len(src.encode()) > 16 or len(dst.encode()) > 16:
        return
    m = AmpMessage(mtype, src, dst, seq, body)
    back = decode_frame(encode_frame(m))
    assert (back.type, back.source, back.dest, back.seq, back.body) == \
        (mtype, src, dst, seq, body)


# ------------------------------------------------------------ handshake


def _linked_pair(make_world, pa, pb, scheme="udp"):
    wa = make_world(seed=1, name="wa")
    wb = make_world(seed=2, name="wb")
    wa.start()
    wb.start()
    wa.call(lambda: wa.endpoint.open_port(f"{scheme}://127.0.0.1:{pa}"))
    wb.call(lambda: wb.endpoint.open_port(f"{scheme}://127.0.0.1:{pb}"))
    assert wa.host_connect(f"{scheme}://127.0.0.1:{pb}")
    return wa, wb


def test_udp_loopback_link_up(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    assert wa.endpoint.linked_names() == ["wb"]
    deadline = time.monotonic() + 2
    while time.monotonic() < deadline and wb.endpoint.linked_names() != ["wa"]:
        time.sleep(0.01)
    assert wb.endpoint.linked_names() == ["wa"]


def test_tcp_and_http_links(make_world):
    for scheme in ("tcp", "http"):
        wa, wb = _linked_pair(make_world, free_port(), free_port(), scheme)
        assert wa.endpoint.linked_names() == ["wb"], scheme


def test_protected_port_rejects_wrong_capability(make_world):
    from amr import capability as cap
    secret = cap.unique_port(Xoshiro256(5))
    wa = make_world(seed=3, name="wa")
    wb = make_world(seed=4, name="wb")
    wa.start()
    wb.start()
    pb = free_port()
    wb.call(lambda: wb.endpoint.open_port(f"udp://127.0.0.1:{pb}", secure=secret))
    # no capability at all
    assert not wa.host_connect(f"udp://127.0.0.1:{pb}")
    assert wa.endpoint.linked_names() == []
    # wrong secret
    bad = cap.cap_to_string(cap.make_capability(
        cap.unique_port(Xoshiro256(6)), 0, 0xFF, cap.unique_port(Xoshiro256(7))))
    assert not wa.host_connect(f"udp://127.0.0.1:{pb}", cap_text=bad)
    # right secret
    good = cap.cap_to_string(cap.make_capability(
        cap.unique_port(Xoshiro256(8)), 0, 0xFF, secret))
    assert wa.host_connect(f"udp://127.0.0.1:{pb}", cap_text=good)


def test_unlink_tears_down_and_refuses_rpc(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    wa.call(lambda: wa.endpoint.unlink("wb"))
    assert wa.endpoint.links["wb"].state == "DOWN"
    assert not wa.call(lambda: wa.endpoint.rpc("wb", "signal", b"{}"))


def test_keepalive_marks_down_after_misses(make_world):
    wa = make_world(seed=5, name="wa")
    wb = make_world(seed=6, name="wb")
    wa.endpoint.poll_ms = 80.0
    wa.endpoint.miss_limit = 3
    wa.start()
    wb.start()
    pa, pb = free_port(), free_port()
    wa.call(lambda: wa.endpoint.open_port(f"udp://127.0.0.1:{pa}"))
    wb.call(lambda: wb.endpoint.open_port(f"udp://127.0.0.1:{pb}"))
    assert wa.host_connect(f"udp://127.0.0.1:{pb}")
    time.sleep(0.4)
    assert wa.endpoint.links["wb"].state == "UP"  # healthy across intervals
    wb.shutdown()  # peer vanishes
    deadline = time.monotonic() + ((wa.endpoint.miss_limit + 2) * 0.08 + 1.5)
    while time.monotonic() < deadline:
        if wa.endpoint.links["wb"].state == "DOWN":
            break
        time.sleep(0.02)
    assert wa.endpoint.links["wb"].state == "DOWN"


# ---------------------------------------------------------- rpc payloads


def test_small_payload_single_frame_on_stream(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port(), scheme="tcp")
    got = []
    wb.on_rpc = lambda peer, op, payload: got.append((op, payload))
    assert wa.call(lambda: wa.endpoint.rpc("wb", "blob", b"x" * 100))
    deadline = time.monotonic() + 2
    while time.monotonic() < deadline and not got:
        time.sleep(0.01)
    assert got == [("blob", b"x" * 100)]


def test_64k_payload_fragments_and_reassembles(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    got = []
    wb.on_rpc = lambda peer, op, payload: got.append(payload)
    payload = bytes(range(256)) * 256  # 65536
    sent_before = wa.endpoint._seq
    assert wa.call(lambda: wa.endpoint.rpc("wb", "blob", payload))
    frames_sent = wa.endpoint._seq - sent_before
    assert frames_sent == 1 + 55  # head + ceil(65536/1200) fragments
    deadline = time.monotonic() + 3
    while time.monotonic() < deadline and not got:
        time.sleep(0.01)
    assert got and got[0] == payload


def test_dropped_fragment_discards_cleanly(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    wb.endpoint.reassembly_tmo_ms = 150.0
    got = []
    wb.on_rpc = lambda peer, op, payload: got.append(payload)

    # drop fragment index 3 of the next rpc on the sending side
    original_send = wa.endpoint._send_raw

    def lossy(link, data):
        m = decode_frame(data)
        if m.type == fr.RPCDATA:
            _, index, _, _ = fr.unpack_rpcdata(m.body)
            if index == 3:
                return True  # swallowed
        return original_send(link, data)

    wa.endpoint._send_raw = lossy
    payload = bytes(7000)
    wa.call(lambda: wa.endpoint.rpc("wb", "blob", payload))
    time.sleep(0.6)  # past the reassembly timeout
    wb.call(lambda: wb.endpoint.tick(wb.now()))
    assert got == []
    assert not wb.endpoint._reassembly  # buffers reclaimed
    assert wb.endpoint.counters.get("rpc_expired", 0) >= 1


def test_out_of_order_fragments_tolerated(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    got = []
    wb.on_rpc = lambda peer, op, payload: got.append(payload)

    buffered = []
    original_send = wa.endpoint._send_raw

    def reordering(link, data):
        m = decode_frame(data)
        if m.type == fr.RPCDATA:
            buffered.append((link, data))
            if len(buffered) == 3:
                for lnk, frame in reversed(buffered):
                    original_send(lnk, frame)
                buffered.clear()
            return True
        return original_send(link, data)

    wa.endpoint._send_raw = reordering
    payload = bytes(range(200)) * 18  # 3600 bytes -> 3 fragments
    wa.call(lambda: wa.endpoint.rpc("wb", "blob", payload))
    deadline = time.monotonic() + 2
    while time.monotonic() < deadline and not got:
        time.sleep(0.01)
    assert got == [payload]


def test_reassembly_memory_bounded(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    wb.endpoint.max_concurrent_rpcs = 4
    for i in range(10):  # heads without data, never completed
        head = fr.pack_rpchead(1000 + i, 10, 1, "x")
        wa.call(lambda h=head: wa.endpoint._send_raw(
            wa.endpoint.links["wb"],
            encode_frame(AmpMessage(fr.RPCHEAD, "wa", "wb", 0, h))))
    time.sleep(0.3)
    assert len(wb.endpoint._reassembly) <= 4
    assert wb.endpoint.counters.get("rpc_overflow", 0) >= 1


def test_scan_info_descriptor(make_world):
    wa, wb = _linked_pair(make_world, free_port(), free_port())
    infos = []
    wa.subscribe(lambda ev, p: infos.append(p) if ev == "info" else None)
    wa.call(lambda: wa.endpoint._send_raw(
        wa.endpoint.links["wb"],
        encode_frame(AmpMessage(fr.SCAN, "wa", "wb", 0))))
    deadline = time.monotonic() + 2
    while time.monotonic() < deadline and not infos:
        time.sleep(0.01)
    assert infos and '"id": "wb"' in infos[0]["body"].replace('"id":"wb"', '"id": "wb"')
