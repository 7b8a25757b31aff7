"""Generative tuple spaces with pattern matching, waiters, and lifetimes.

Each virtual node owns one store; arities are handled independently and
matching walks tuples in insertion order (FIFO).  A pattern is a value
sequence where null slots are formals matching anything.  Blocking is the
scheduler's business: the store only parks waiter records and calls their
deliver hooks; the host can attach consumer/provider hooks to bridge
tuples in and out of the embedding application.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .values import contains_function, deep_copy, deep_equal

DEFAULT_MAX_ARITY = 10


class TupleSpaceError(Exception):
    pass


class ArityError(TupleSpaceError):
    pass


def match(pattern: list, tup: list) -> bool:
    """Arity-equal and every actual slot deep-equals the element."""
    if len(pattern) != len(tup):
        return False
    for p, v in zip(pattern, tup):
        if p is None:
            continue
        if not deep_equal(p, v):
            return False
    return True


@dataclass
class Waiter:
    patterns: list
    consume: bool
    deliver: Callable[[Optional[list]], None]
    deadline: Optional[float] = None  # absolute ms, None = forever
    owner: str = ""  # agent id, for diagnostics

    def matches(self, tup: list) -> bool:
        return any(match(p, tup) for p in self.patterns)


@dataclass
class _Entry:
    values: list
    expiry: Optional[float] = None  # absolute ms

    def live(self, now: float) -> bool:
        return self.expiry is None or now < self.expiry


@dataclass
class StoreStats:
    out: int = 0
    provided: int = 0
    taken: int = 0      # inp/alt/ts-removals/collect
    removed: int = 0    # rm
    expired: int = 0


class TupleStore:
    def __init__(self, max_arity: int = DEFAULT_MAX_ARITY):
        self.max_arity = max_arity
        self._tuples: dict = {}  # arity -> list[_Entry]
        self.waiters: list = []  # FIFO
        self.consumers: list = []
        self.providers: list = []
        self.stats = StoreStats()

    # -- configuration hooks --

    def register_consumer(self, fn):
        self.consumers.append(fn)

    def register_provider(self, fn):
        self.providers.append(fn)

    # -- internals --

    def _check_tuple(self, t):
        if not isinstance(t, list) or not (1 <= len(t) <= self.max_arity):
            raise ArityError(f"tuple arity must be 1..{self.max_arity}")
        if contains_function(t):
            raise TupleSpaceError("tuples carry data only, not code")

    def _check_pattern(self, p):
        if not isinstance(p, list) or not (1 <= len(p) <= self.max_arity):
            raise ArityError(f"pattern arity must be 1..{self.max_arity}")

    def _bucket(self, arity: int) -> list:
        return self._tuples.setdefault(arity, [])

    def _sweep_bucket(self, bucket: list, now: float):
        dead = [e for e in bucket if not e.live(now)]
        if dead:
            self.stats.expired += len(dead)
            bucket[:] = [e for e in bucket if e.live(now)]

    def sweep(self, now: float):
        for bucket in self._tuples.values():
            self._sweep_bucket(bucket, now)

    def expire_waiters(self, now: float) -> list:
        """Deliver null to waiters whose deadline passed; returns them."""
        due = [w for w in self.waiters
               if w.deadline is not None and now >= w.deadline]
        for w in due:
            self.waiters.remove(w)
            w.deliver(None)
        return due

    def next_deadline(self) -> Optional[float]:
        times = [w.deadline for w in self.waiters if w.deadline is not None]
        for bucket in self._tuples.values():
            times.extend(e.expiry for e in bucket if e.expiry is not None)
        return min(times) if times else None

    # -- producer side --

    def out(self, t: list, now: float, expiry: Optional[float] = None):
        self._check_tuple(t)
        t = deep_copy(t)
        for fn in self.consumers:
            fn(deep_copy(t))
        self.stats.out += 1
        if expiry is not None and expiry <= now:
            self.stats.expired += 1
            return
        # FIFO scan: readers get copies, the first consumer takes it
        for w in list(self.waiters):
            if not w.matches(t):
                continue
            self.waiters.remove(w)
            if w.consume:
                self.stats.taken += 1
                w.deliver(t)
                return
            w.deliver(deep_copy(t))
        self._bucket(len(t)).append(_Entry(t, expiry))

    def mark(self, t: list, tmo_ms: float, now: float):
        self.out(t, now, expiry=now + max(0.0, float(tmo_ms)))

    # -- consumer side (non-blocking primitives) --

    def _find(self, patterns: list, now: float):
        for p in patterns:
            self._check_pattern(p)
        for p in patterns:  # pattern-list order first, then insertion order
            bucket = self._bucket(len(p))
            self._sweep_bucket(bucket, now)
            for entry in bucket:
                if match(p, entry.values):
                    return bucket, entry
        return None, None

    def _ask_providers(self, patterns: list):
        for p in patterns:
            for provider in self.providers:
                t = provider(deep_copy(p))
                if t is None:
                    continue
                self._check_tuple(t)
                if match(p, t):
                    self.stats.provided += 1
                    return deep_copy(t)
        return None

    def try_take(self, patterns: list, consume: bool, now: float):
        """One matching tuple or None; never parks a waiter."""
        bucket, entry = self._find(patterns, now)
        if entry is not None:
            if consume:
                bucket.remove(entry)
                self.stats.taken += 1
                return entry.values
            return deep_copy(entry.values)
        supplied = self._ask_providers(patterns)
        if supplied is not None:
            if consume:
                self.stats.taken += 1
                return supplied
            # generated for a read: keep it, hand out a copy
            self._bucket(len(supplied)).append(_Entry(deep_copy(supplied)))
            return supplied
        return None

    def add_waiter(self, w: Waiter):
        for p in w.patterns:
            self._check_pattern(p)
        self.waiters.append(w)

    def cancel_waiter(self, w: Waiter) -> bool:
        if w in self.waiters:
            self.waiters.remove(w)
            return True
        return False

    # -- updates / removal --

    def ts(self, pattern: list, update, now: float) -> bool:
        """Atomic test-and-set: update(tuple)->tuple replaces in place,
        a number sets/extends the lifetime; returns whether a match existed."""
        bucket, entry = self._find([pattern], now)
        if entry is None:
            return False
        if callable(update):
            replacement = update(entry.values)
            if isinstance(replacement, list):
                self._check_tuple(replacement)
                entry.values = deep_copy(replacement)
        else:
            entry.expiry = now + float(update)
        return True

    def rm(self, pattern: list, remove_all: bool, now: float) -> int:
        self._check_pattern(pattern)
        bucket = self._bucket(len(pattern))
        self._sweep_bucket(bucket, now)
        removed = 0
        kept = []
        for entry in bucket:
            if match(pattern, entry.values) and (remove_all or removed == 0):
                removed += 1
            else:
                kept.append(entry)
        bucket[:] = kept
        self.stats.removed += removed
        return removed

    def test(self, pattern: list, now: float) -> bool:
        _, entry = self._find([pattern], now)
        return entry is not None

    # -- inspection --

    def count(self, arity: Optional[int] = None, now: Optional[float] = None) -> int:
        if now is not None:
            self.sweep(now)
        if arity is None:
            return sum(len(b) for b in self._tuples.values())
        return len(self._tuples.get(arity, []))

    def all_tuples(self, arity: Optional[int] = None, now: Optional[float] = None):
        if now is not None:
            self.sweep(now)
        out = []
        for a in sorted(self._tuples):
            if arity is not None and a != arity:
                continue
            out.extend(deep_copy(e.values) for e in self._tuples[a])
        return out

    def take_all(self, pattern: list, now: float) -> list:
        """Remove and return every match (remote collect support)."""
        self._check_pattern(pattern)
        bucket = self._bucket(len(pattern))
        self._sweep_bucket(bucket, now)
        matched = [e for e in bucket if match(pattern, e.values)]
        bucket[:] = [e for e in bucket if e not in matched]
        self.stats.taken += len(matched)
        return [e.values for e in matched]

    def copy_all(self, pattern: list, now: float) -> list:
        self._check_pattern(pattern)
        bucket = self._bucket(len(pattern))
        self._sweep_bucket(bucket, now)
        return [deep_copy(e.values) for e in bucket if match(pattern, e.values)]
