"""Operation table membership per privilege level.

The authoritative listing also ships as docs/optable.md so tests can diff
it.  Levels: 0 Guest, 1 Normal, 2 Privileged, 3 System.  Guests get pure
computation, perception, and self-control; level 1 adds tuple spaces,
signals, replication, morphing, and mobility; level 2 adds negotiation and
remote tuple operations; level 3 swaps mobility for host-device access
(system agents are stationary).
"""

from __future__ import annotations

COMPUTE = frozenset({
    "abs", "add", "angle", "delta", "distance", "div", "equal", "max",
    "min", "neg", "random", "sum", "zero",
    "concat", "contains", "copy", "empty", "filter", "flatten", "head",
    "isin", "iter", "last", "map", "matrix", "reduce", "reverse", "sort",
    "tail", "without", "Vector",
    "int", "object", "string",
})

ENVIRONMENT = frozenset({
    "info", "me", "myClass", "myNode", "myParent", "myPosition",
    "privilege", "time",
})

CONTROL = frozenset({
    "kill", "sleep", "wakeup", "timer", "timer.add", "timer.delete",
    "log", "B", "L", "I",
})

TUPLES_LOCAL = frozenset({
    "out", "inp", "inp.try", "rd", "rd.try", "alt", "alt.try",
    "mark", "ts", "rm", "test", "exists",
})

SIGNALS = frozenset({"send", "broadcast"})

MANAGEMENT = frozenset({
    "create", "fork",
    "act", "act.add", "act.delete", "act.update",
    "trans", "trans.add", "trans.delete", "trans.update",
})

MOBILITY = frozenset({"moveto", "link", "DIR"})

NEGOTIATION = frozenset({"negotiate"})

TUPLES_REMOTE = frozenset({"collect", "copyto", "store"})

HOST_DEVICE = frozenset({"connectTo"})

LEVEL_0 = COMPUTE | ENVIRONMENT | CONTROL
LEVEL_1 = LEVEL_0 | TUPLES_LOCAL | SIGNALS | MANAGEMENT | MOBILITY
LEVEL_2 = LEVEL_1 | NEGOTIATION | TUPLES_REMOTE
LEVEL_3 = (LEVEL_2 - {"moveto"}) | HOST_DEVICE

LEVEL_TABLES = {0: LEVEL_0, 1: LEVEL_1, 2: LEVEL_2, 3: LEVEL_3}

NAME_UNIVERSE = LEVEL_2 | LEVEL_3

GUEST, NORMAL, PRIVILEGED, SYSTEM = 0, 1, 2, 3


def names_for_level(level: int) -> frozenset:
    if level not in LEVEL_TABLES:
        raise ValueError(f"privilege level must be 0..3, got {level}")
    return LEVEL_TABLES[level]


def all_names() -> frozenset:
    return NAME_UNIVERSE


def root_names(level: int) -> frozenset:
    """Identifier-level names visible to the resolver at a level."""
    return frozenset(n for n in names_for_level(level) if "." not in n)
