"""Signals: local delivery, handlers, traces, garbage collection, broadcast."""

from __future__ import annotations

from amr import signals as sig
from amr.signals import TraceTable
from conftest import run_until_quiet

PING_PONG = """
function ac(config) {
  this.parent = config.parent;
  this.act = {
    init: () => {
      log('START ' + this.parent);
      if (this.parent) { send(this.parent, 'PING', random(0, 100)); }
    },
    wait : () => { sleep(5000); },
    end : () => { log('END'); kill(); }
  };
  this.trans = { init : wait, wait : end };
  this.on = {
    'PING' : (arg, from) => { log('PING'); send(from, 'PONG', arg); },
    'PONG' : (arg, from) => { log('PONG'); }
  };
  this.next = 'init';
}
"""


def test_ping_pong_local(make_world):
    w = make_world(seed=7)
    w.compile_class(PING_PONG)
    a1 = w.create_agent("ac", {}, 1)
    w.create_agent("ac", {"parent": a1}, 1)
    w.step(10)
    heads = [line.split(" ")[0] for line in w.log_lines()]
    assert [h for h in heads if h in ("PING", "PONG")] == ["PING", "PONG"]


def test_send_to_unknown_id_is_silent(make_world):
    w = make_world(seed=1)
    w.compile_class(PING_PONG)
    w.create_agent("ac", {"parent": "nobodyxx"}, 1)
    w.step(5)  # no error, no delivery
    assert w.counters.get("signals_dropped", 0) >= 1


def test_no_handler_discard_counts(make_world):
    w = make_world(seed=2)
    w.compile_class("""
function mute(p) {
  this.act = { a : () => { sleep(5000); } };
  this.trans = {};
  this.next = 'a';
}""")
    pid = w.create_agent("mute", None, 1)
    w.step(1)
    sig.send(w, w.root, "host", pid, "NOPE", None)
    w.step(2)
    assert w.counters.get("signals_discarded", 0) == 1


def test_handler_can_wake_sleeper(make_world):
    w = make_world(seed=3)
    w.compile_class("""
function dozy(p) {
  this.act = {
    a : () => { log('sleeping'); sleep(); },
    b : () => { log('woken'); kill(); }
  };
  this.trans = { a : 'b' };
  this.on = { 'RING' : (arg, from) => { wakeup(); } };
  this.next = 'a';
}""")
    pid = w.create_agent("dozy", None, 1)
    w.step(2)
    assert w.find_process(pid).suspended
    sig.send(w, w.root, "host", pid, "RING", None)
    run_until_quiet(w, 10)
    assert w.log_lines() == ["sleeping", "woken"]


def test_kill_signal_terminates(make_world):
    w = make_world(seed=4)
    w.compile_class(PING_PONG)
    pid = w.create_agent("ac", {}, 1)
    w.step(1)
    sig.kill_agent(w, w.root, "host", pid)
    w.step(2)
    assert w.find_process(pid) is None


# ------------------------------------------------------------- traces


def test_trace_record_refresh_gc():
    t = TraceTable()
    t.record("agentaa", ("link", "peer1"), now=0.0)
    assert t.lookup("agentaa").route == ("link", "peer1")
    t.refresh("agentaa", now=30_000.0)
    assert t.gc(now=60_000.0, ttl_ms=60_000.0) == 0  # refreshed within ttl
    assert t.gc(now=95_000.0, ttl_ms=60_000.0) == 1
    assert t.lookup("agentaa") is None


def test_send_after_gc_drops_silently(make_world):
    w = make_world(seed=5)
    w.root.traces.record("ghostid1", ("link", "nowhere"), now=0.0)
    w.root.traces.gc(now=10**9, ttl_ms=1.0)
    before = w.counters.get("signals_dropped", 0)
    sig.send(w, w.root, "host", "ghostid1", "HI", 1.0)
    assert w.counters.get("signals_dropped", 0) == before + 1


def test_forward_refreshes_trace(make_world):
    w = make_world(seed=6)
    w.root.traces.record("remoteag", ("link", "peerx"), now=0.0)
    sent = []
    w.amp_forward_signal = lambda peer, payload: sent.append((peer, payload)) or True
    sig.send(w, w.root, "host", "remoteag", "HI", None)
    assert sent and sent[0][0] == "peerx"
    assert w.root.traces.lookup("remoteag").last_used > 0


def test_hop_count_decreases_on_forward(make_world):
    w = make_world(seed=7)
    w.root.traces.record("remoteag", ("link", "peerx"), now=w.now())
    sent = []
    w.amp_forward_signal = lambda peer, payload: sent.append(payload) or True
    sig.deliver_remote(w, w.root, {"to": "remoteag", "sig": "HI", "arg": None,
                                   "from": "src", "hops": 3})
    assert sent[0]["hops"] == 2.0


def test_zero_hops_never_forwards(make_world):
    w = make_world(seed=8)
    w.root.traces.record("remoteag", ("link", "peerx"), now=w.now())
    sent = []
    w.amp_forward_signal = lambda peer, payload: sent.append(payload) or True
    sig.deliver_remote(w, w.root, {"to": "remoteag", "sig": "HI", "arg": None,
                                   "from": "src", "hops": 0})
    assert not sent
    assert w.counters.get("signals_dropped", 0) == 1


# ------------------------------------------------------------ broadcast


BCAST = """
function member(p) {
  this.act = { a : () => { sleep(5000); } };
  this.trans = {};
  this.on = { 'NEWS' : (arg, from) => { log('news@' + me()); } };
  this.next = 'a';
}
"""


def test_broadcast_range_zero_same_class_only(make_world):
    w = make_world(seed=9)
    w.compile_class(BCAST)
    w.compile_class(BCAST.replace("member", "other"))
    ids = [w.create_agent("member", None, 1) for _ in range(3)]
    w.create_agent("other", None, 1)
    w.step(1)
    sig.broadcast(w, w.root, ids[0], "member", 0, "NEWS", None)
    w.step(3)
    assert len([l for l in w.log_lines() if l.startswith("news@")]) == 2


def test_broadcast_excludes_sender(make_world):
    w = make_world(seed=10)
    w.compile_class(BCAST)
    sender = w.create_agent("member", None, 1)
    w.step(1)
    sig.broadcast(w, w.root, sender, "member", 0, "NEWS", None)
    w.step(3)
    assert w.log_lines() == []


def test_broadcast_range_one_crosses_virtual_links(make_world):
    w = make_world(seed=11)
    nid = w.add_node(1, 0)
    w.connect_nodes({"x": 0, "y": 0}, {"x": 1, "y": 0})
    w.compile_class(BCAST)
    w.create_agent("member", None, 1)
    w.create_agent("member", None, 1, node_id=nid)
    w.step(1)
    sig.broadcast(w, w.root, "host", "member", 1, "NEWS", None)
    w.step(3)
    assert len([l for l in w.log_lines() if l.startswith("news@")]) == 2


def test_three_node_relay_along_traces(make_world):
    # A--R--B: the signal hops one link at a time, each node consulting
    # its own trace table, refreshing entries as it forwards
    from conftest import free_port
    import time as _t
    wa = make_world(seed=20, name="relayA")
    wr = make_world(seed=21, name="relayR")
    wb = make_world(seed=22, name="relayB")
    pa, pr, pb = free_port(), free_port(), free_port()
    for w, p in ((wa, pa), (wr, pr), (wb, pb)):
        w.start()
        w.call(lambda w=w, p=p: w.endpoint.open_port(f"udp://127.0.0.1:{p}"))
    assert wa.host_connect(f"udp://127.0.0.1:{pr}")
    assert wr.host_connect(f"udp://127.0.0.1:{pb}")

    wb.compile_class("""
function sink(p) {
  this.act = { a : () => { sleep(60000); } };
  this.trans = {};
  this.on = { 'HOP' : (arg, from) => { log('landed ' + arg); } };
  this.next = 'a';
}""")
    pid = wb.call(lambda: wb.create_agent("sink", None, 1))
    now = wa.now()
    wa.root.traces.record(pid, ("link", "relayR"), now)
    wr.root.traces.record(pid, ("link", "relayB"), now)

    wa.call(lambda: sig.send(wa, wa.root, "origin01", pid, "HOP", 5.0))
    deadline = _t.monotonic() + 3
    while _t.monotonic() < deadline and "landed 5" not in wb.log_lines():
        _t.sleep(0.01)
    assert "landed 5" in wb.log_lines()
    assert wr.root.traces.lookup(pid).last_used >= now  # relay refreshed
