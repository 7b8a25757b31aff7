"""Tuple store: matching, FIFO, lifetimes, waiters, hooks, conservation."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from amr.rng import Xoshiro256
from amr.tuplespace import ArityError, TupleSpaceError, TupleStore, Waiter, match
from amr.values import deep_equal


def brute_force_match(pattern, tup) -> bool:
    """Independent reference matcher."""
    if not isinstance(pattern, list) or not isinstance(tup, list):
        return False
    if len(pattern) != len(tup):
        return False
    return all(p is None or deep_equal(p, v) for p, v in zip(pattern, tup))


# ------------------------------------------------------------- matching


def test_formal_matches_any():
    assert match(["SENSOR", None], ["SENSOR", "temp"])


def test_arity_mismatch_fails():
    assert not match(["A"], ["A", "B"])


def test_exhaustive_masks_vs_brute_force():
    tup = ["K", 2.0, {"a": [1.0]}]
    for mask in itertools.product([0, 1], repeat=3):
        pattern = [tup[i] if m else None for i, m in enumerate(mask)]
        assert match(pattern, tup) == brute_force_match(pattern, tup) is True
    wrong = ["K", 3.0, {"a": [1.0]}]
    for mask in itertools.product([0, 1], repeat=3):
        pattern = [tup[i] if m else None for i, m in enumerate(mask)]
        assert match(pattern, wrong) == brute_force_match(pattern, wrong)


_elements = st.one_of(
    st.integers(-5, 5).map(float),
    st.sampled_from(["a", "b", "SENSOR"]),
    st.booleans(),
    st.lists(st.integers(0, 3).map(float), max_size=2),
)


@settings(max_examples=500, deadline=None)
@given(st.lists(_elements, min_size=1, max_size=4),
       st.lists(st.one_of(st.none(), _elements), min_size=1, max_size=4))
def test_matcher_equals_brute_force_property(tup, pattern):
    assert match(pattern, tup) == brute_force_match(pattern, tup)


def test_nan_never_matches():
    assert not match([float("nan")], [float("nan")])


# ------------------------------------------------------- store basics


def test_out_then_test_and_inp():
    s = TupleStore()
    s.out(["SENSOR", "temp", 5000.0], now=0)
    assert s.test(["SENSOR", None, None], now=0)
    got = s.try_take([["SENSOR", None, None]], consume=True, now=0)
    assert got == ["SENSOR", "temp", 5000.0]
    assert s.count() == 0


def test_fifo_among_duplicates():
    s = TupleStore()
    s.out(["A", 1.0], now=0)
    s.out(["A", 2.0], now=0)
    assert s.try_take([["A", None]], consume=True, now=0) == ["A", 1.0]
    assert s.try_take([["A", None]], consume=True, now=0) == ["A", 2.0]


def test_rd_copies_do_not_alias():
    s = TupleStore()
    s.out(["X", [1.0, 2.0]], now=0)
    first = s.try_take([["X", None]], consume=False, now=0)
    first[1].append(99.0)
    second = s.try_take([["X", None]], consume=False, now=0)
    assert second == ["X", [1.0, 2.0]]


def test_alt_pattern_order_priority():
    s = TupleStore()
    s.out(["B", 1.0], now=0)
    s.out(["A", 1.0], now=0)
    got = s.try_take([["A", None], ["B", None]], consume=True, now=0)
    assert got == ["A", 1.0]  # pattern order wins over insertion order


def test_alt_differing_arities():
    s = TupleStore()
    s.out(["NODE", 100.0, 7.0], now=0)
    got = s.try_take([["TIME", None], ["NODE", 100.0, None]], consume=True, now=0)
    assert got == ["NODE", 100.0, 7.0]


def test_arity_bounds():
    s = TupleStore(max_arity=3)
    with pytest.raises(ArityError):
        s.out([], now=0)
    with pytest.raises(ArityError):
        s.out([1.0, 2.0, 3.0, 4.0], now=0)


def test_function_elements_rejected():
    from amr.abl.parser import parse_function
    s = TupleStore()
    with pytest.raises(TupleSpaceError):
        s.out(["F", parse_function("() => { return 1; }")], now=0)


# ------------------------------------------------------------ lifetimes


def test_mark_expiry():
    s = TupleStore()
    s.mark(["IAMHERE", "id", "node"], 1000.0, now=0)
    assert s.test(["IAMHERE", None, None], now=500)
    assert not s.test(["IAMHERE", None, None], now=1100)


def test_mark_zero_never_visible():
    s = TupleStore()
    s.mark(["GONE"], 0.0, now=0)
    assert not s.test(["GONE"], now=0)


def test_ts_function_updates_in_place():
    s = TupleStore()
    s.out(["SENSOR", 100.0], now=0)
    hit = s.ts(["SENSOR", None], lambda t: [t[0], t[1] + 1.0], now=0)
    assert hit
    assert s.try_take([["SENSOR", None]], consume=False, now=0) == ["SENSOR", 101.0]


def test_ts_duration_extends_lifetime():
    s = TupleStore()
    s.mark(["CHAT", "idn"], 100.0, now=0)
    assert s.ts(["CHAT", None], 600000.0, now=50)
    assert s.test(["CHAT", None], now=500)


def test_ts_without_match_is_false():
    s = TupleStore()
    assert s.ts(["NOPE"], 100.0, now=0) is False


def test_rm_all_and_count():
    s = TupleStore()
    for i in range(3):
        s.out(["R", float(i)], now=0)
    s.out(["OTHER"], now=0)
    assert s.rm(["R", None], remove_all=True, now=0) == 3
    assert s.count() == 1


def test_rm_single():
    s = TupleStore()
    s.out(["R", 1.0], now=0)
    s.out(["R", 2.0], now=0)
    assert s.rm(["R", None], remove_all=False, now=0) == 1
    assert s.count() == 1


# -------------------------------------------------------------- waiters


def test_out_wakes_first_consuming_waiter_only():
    s = TupleStore()
    delivered = []
    for name in ("w1", "w2"):
        s.add_waiter(Waiter([["J", None]], True,
                            lambda t, n=name: delivered.append((n, t)), None, name))
    s.out(["J", 1.0], now=0)
    assert delivered == [("w1", ["J", 1.0])]
    assert s.count() == 0
    s.out(["J", 2.0], now=0)
    assert delivered[-1] == ("w2", ["J", 2.0])


def test_readers_all_woken_then_consumer():
    s = TupleStore()
    log = []
    s.add_waiter(Waiter([["T", None]], False, lambda t: log.append(("r1", t))))
    s.add_waiter(Waiter([["T", None]], False, lambda t: log.append(("r2", t))))
    s.add_waiter(Waiter([["T", None]], True, lambda t: log.append(("c", t))))
    s.out(["T", 5.0], now=0)
    assert [x[0] for x in log] == ["r1", "r2", "c"]
    assert s.count() == 0  # the consumer removed it


def test_waiter_deadline_expiry_delivers_null():
    s = TupleStore()
    got = []
    s.add_waiter(Waiter([["X", None]], True, got.append, deadline=100.0))
    s.expire_waiters(now=50.0)
    assert got == []
    s.expire_waiters(now=101.0)
    assert got == [None]
    assert not s.waiters


def test_tuple_expiry_does_not_wake_waiters():
    s = TupleStore()
    got = []
    s.add_waiter(Waiter([["X", None]], True, got.append))
    s.mark(["Y"], 10.0, now=0)
    s.sweep(now=20.0)
    assert got == []
    assert len(s.waiters) == 1


def test_mark_inserted_tuples_wake_waiters():
    s = TupleStore()
    got = []
    s.add_waiter(Waiter([["M", None]], True, got.append))
    s.mark(["M", 1.0], 1000.0, now=0)
    assert got == [["M", 1.0]]


# ---------------------------------------------------------------- hooks


def test_provider_answers_read_on_empty_store():
    s = TupleStore()
    s.register_provider(lambda p: ["CLOCK", 12.0] if p[0] == "CLOCK" else None)
    got = s.try_take([["CLOCK", None]], consume=False, now=0)
    assert got == ["CLOCK", 12.0]
    # read-provided tuples persist
    assert s.test(["CLOCK", None], now=0)


def test_provider_consumed_by_inp_not_stored():
    s = TupleStore()
    s.register_provider(lambda p: ["GEN", 1.0])
    got = s.try_take([["GEN", None]], consume=True, now=0)
    assert got == ["GEN", 1.0]
    assert s.count() == 0


def test_provider_null_keeps_normal_path():
    s = TupleStore()
    s.register_provider(lambda p: None)
    assert s.try_take([["X"]], consume=True, now=0) is None


def test_consumer_sees_every_out_in_order():
    s = TupleStore()
    seen = []
    s.register_consumer(seen.append)
    s.out(["A"], now=0)
    s.out(["B"], now=0)
    assert seen == [["A"], ["B"]]


# ---------------------------------------------------------- conservation


def test_conservation_under_random_interleaving():
    rng = Xoshiro256(99)
    s = TupleStore()
    provided_store = 0
    for step in range(4000):
        op = rng.randrange(6)
        arity = 1 + rng.randrange(3)
        tup = [float(rng.randrange(4)) for _ in range(arity)]
        pattern = [None if rng.randrange(2) else e for e in tup]
        if op in (0, 1):
            s.out(tup, now=step)
        elif op == 2:
            s.mark(tup, float(rng.randrange(5)), now=step)
        elif op == 3:
            s.try_take([pattern], consume=True, now=step)
        elif op == 4:
            s.rm(pattern, remove_all=bool(rng.randrange(2)), now=step)
        else:
            s.try_take([pattern], consume=False, now=step)
    s.sweep(now=10**9)
    stats = s.stats
    size = s.count()
    assert stats.out + provided_store - stats.taken - stats.removed \
        - stats.expired == size


def test_test_then_inp_is_safe_within_one_activity():
    # sequential node scheduling means a successful test guarantees the
    # following consuming take inside the same activity
    from amr.world import World, WorldConfig
    w = World(WorldConfig(seed=123))
    w.compile_class("""
function checker(p) {
  this.got = null;
  this.act = {
    a : () => {
      if (test(['X', null])) {
        inp(['X', null], (t) => { this.got = t; });
      }
    }
  };
  this.trans = {};
  this.next = 'a';
}""")
    w.root.store.out(["X", 9.0], now=0)
    pid = w.create_agent("checker", None, 1)
    w.step(2)
    assert w.find_process(pid).body["got"] == ["X", 9.0]
    w.shutdown()
