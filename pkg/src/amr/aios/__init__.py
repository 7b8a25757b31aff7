"""Privilege-leveled builtin operation tables (the agent/platform bridge).

optable holds the level membership data, builtins the pure computation
set, blocks the scheduling-block constructors, and bind assembles the
per-process environment that the interpreter resolves names against.
"""

from . import optable
from .optable import NAME_UNIVERSE, names_for_level, all_names
from .builtins import pure_builtins
from .blocks import BlockEntry, LinearBlock, LoopBlock, IteratorBlock

__all__ = [
    "optable",
    "NAME_UNIVERSE",
    "names_for_level",
    "all_names",
    "pure_builtins",
    "BlockEntry",
    "LinearBlock",
    "LoopBlock",
    "IteratorBlock",
]
