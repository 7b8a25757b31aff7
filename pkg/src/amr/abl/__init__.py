"""The Agent Behavior Language: grammar, parser, validator, interpreter.

Agent programs are plain text class constructors (see docs/grammar.ebnf).
This package parses them into validated activity-transition graphs,
pretty-prints canonical source, and executes function values under fuel
metering inside a closed namespace (locals, params, `this` fields, and the
builtin environment only).
"""

from .nodes import FunctionValue, AgentClass, TransitionRule, Static, Dynamic
from .errors import AblSyntaxError, ValidationError, AblRuntimeError
from .parser import parse_class, parse_function, parse_program
from .printer import canonicalize, function_source
from .validate import validate_class, validate_against_level, analyze_names
from .interp import (
    Fuel,
    EvalOutcome,
    Closure,
    Builtin,
    BlockReason,
    evaluate_function,
    call_value,
)

__all__ = [
    "FunctionValue",
    "AgentClass",
    "TransitionRule",
    "Static",
    "Dynamic",
    "AblSyntaxError",
    "ValidationError",
    "AblRuntimeError",
    "parse_class",
    "parse_function",
    "parse_program",
    "canonicalize",
    "function_source",
    "validate_class",
    "validate_against_level",
    "analyze_names",
    "Fuel",
    "EvalOutcome",
    "Closure",
    "Builtin",
    "BlockReason",
    "evaluate_function",
    "call_value",
]
