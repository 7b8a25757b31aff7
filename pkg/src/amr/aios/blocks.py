"""Scheduling-block state machines (linear, loop, iterator).

A block partitions activity work into micro-functions executed one per
scheduler pass; each element may end with one blocking operation.  Loop
and iterator control functions run adjacent to the element they steer.
"""

from __future__ import annotations

from ..abl.errors import AblRuntimeError
from ..abl.interp import Closure
from ..abl.nodes import FunctionValue
from ..values import truthy

DONE = "done"
RAN = "ran"


def _flatten_fns(items) -> list:
    out = []
    for item in items:
        if isinstance(item, list):
            out.extend(_flatten_fns(item))
        elif isinstance(item, (Closure, FunctionValue)):
            out.append(item)
        else:
            raise AblRuntimeError("typeMismatch",
                                  "scheduling blocks hold functions")
    return out


class BlockEntry:
    """One queued block; step(run) executes at most one micro-function."""

    kind = "?"

    def step(self, run) -> str:
        raise NotImplementedError


class LinearBlock(BlockEntry):
    kind = "B"

    def __init__(self, fns, index: int = 0):
        self.fns = _flatten_fns(fns)
        if not self.fns:
            raise AblRuntimeError("typeMismatch", "empty scheduling block")
        self.index = index

    def step(self, run) -> str:
        run(self.fns[self.index], [])
        self.index += 1
        return DONE if self.index >= len(self.fns) else RAN


class LoopBlock(BlockEntry):
    kind = "L"

    def __init__(self, init, cond, nxt, fns, finalize=None,
                 started: bool = False, index: int = 0):
        self.init = init
        self.cond = cond
        self.next = nxt
        self.fns = _flatten_fns(fns)
        self.finalize = finalize
        self.started = started
        self.index = index
        if not self.fns:
            raise AblRuntimeError("typeMismatch", "empty scheduling loop")

    def step(self, run) -> str:
        if not self.started:
            run(self.init, [])
            self.started = True
        if self.index == 0 and not truthy(run(self.cond, [])):
            if self.finalize is not None:
                run(self.finalize, [])
            return DONE
        run(self.fns[self.index], [])
        self.index += 1
        if self.index >= len(self.fns):
            self.index = 0
            run(self.next, [])
        return RAN


class IteratorBlock(BlockEntry):
    kind = "I"

    def __init__(self, data, nxt, fns, finalize=None,
                 item_index: int = 0, fn_index: int = 0):
        if isinstance(data, list):
            self.items = list(data)
        elif isinstance(data, dict):
            self.items = list(data.values())
        else:
            raise AblRuntimeError("typeMismatch",
                                  "iterator blocks take an array or record")
        self.next = nxt
        self.fns = _flatten_fns(fns)
        self.finalize = finalize
        self.item_index = item_index
        self.fn_index = fn_index
        if not self.fns:
            raise AblRuntimeError("typeMismatch", "empty iterator block")

    def step(self, run) -> str:
        if self.item_index >= len(self.items):
            if self.finalize is not None:
                run(self.finalize, [])
            return DONE
        if self.fn_index == 0:
            run(self.next, [self.items[self.item_index]])
        run(self.fns[self.fn_index], [])
        self.fn_index += 1
        if self.fn_index >= len(self.fns):
            self.fn_index = 0
            self.item_index += 1
        return DONE if self.item_index >= len(self.items) and self.finalize is None \
            else RAN
