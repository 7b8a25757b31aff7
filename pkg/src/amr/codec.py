"""JSON+ serialization: values, code, and whole process snapshots.

Functions ride inside JSON as strings tagged "_PxEUF_" followed by the
base64 of their canonical source; NaN and the infinities become tagged
strings since plain JSON cannot carry them.  Embedded code is re-parsed
and name-checked on decode; nothing is ever evaluated blindly.  A snapshot
is self-contained: body, control pointer, pending blocks, and all code.
"""

from __future__ import annotations

import base64
import binascii
import json
import zlib
from dataclasses import dataclass, field
from typing import Optional

from .abl.errors import AblSyntaxError, ValidationError
from .abl.interp import Closure
from .abl.nodes import Dynamic, FunctionValue, Static
from .abl.parser import parse_function
from .abl.printer import function_source
from .abl.validate import validate_function
from .aios.blocks import BlockEntry, IteratorBlock, LinearBlock, LoopBlock
from .values import number_text

FUNC_TAG = "_PxEUF_"
NUM_TAG = "_PxNUM_"
STR_TAG = "_PxSTR_"

DEFAULT_CODE_LIMIT = 50 * 1024  # serialized size cap per process


class CycleError(ValueError):
    pass


class EncodeError(TypeError):
    pass


class ParseError(ValueError):
    pass


class SizeLimitExceeded(ValueError):
    pass


class EmbeddedCodeError(ValueError):
    def __init__(self, kind: str, msg: str):
        super().__init__(f"{kind}: {msg}")
        self.kind = kind  # "freeVariable" | "syntax"


# --- value encoding ---


def _encode_function(fn) -> str:
    if isinstance(fn, Closure):
        fn = fn.fn
    src = function_source(fn)
    return FUNC_TAG + base64.b64encode(src.encode("utf-8")).decode("ascii")


def _encode_str(s: str) -> str:
    if s.startswith((FUNC_TAG, NUM_TAG, STR_TAG)):
        return STR_TAG + s
    return s


def _emit(v, out: list, seen: set):
    if v is None:
        out.append("null")
    elif v is True:
        out.append("true")
    elif v is False:
        out.append("false")
    elif isinstance(v, (int, float)):
        x = float(v)
        if x != x:
            out.append(json.dumps(NUM_TAG + "NaN"))
        elif x == float("inf"):
            out.append(json.dumps(NUM_TAG + "Inf"))
        elif x == float("-inf"):
            out.append(json.dumps(NUM_TAG + "-Inf"))
        else:
            out.append(number_text(x))
    elif isinstance(v, str):
        out.append(json.dumps(_encode_str(v), ensure_ascii=False))
    elif isinstance(v, (Closure, FunctionValue)):
        out.append(json.dumps(_encode_function(v)))
    elif isinstance(v, list):
        if id(v) in seen:
            raise CycleError("cyclic reference in array")
        seen.add(id(v))
        out.append("[")
        for i, e in enumerate(v):
            if i:
                out.append(",")
            _emit(e, out, seen)
        out.append("]")
        seen.discard(id(v))
    elif isinstance(v, dict):
        if id(v) in seen:
            raise CycleError("cyclic reference in record")
        seen.add(id(v))
        out.append("{")
        for i, (k, e) in enumerate(v.items()):
            if i:
                out.append(",")
            if not isinstance(k, str):
                raise EncodeError("record keys must be strings")
            out.append(json.dumps(_encode_str(k), ensure_ascii=False))
            out.append(":")
            _emit(e, out, seen)
        out.append("}")
        seen.discard(id(v))
    else:
        raise EncodeError(f"value of type {type(v).__name__} does not serialize")


def encode_value(v) -> str:
    out: list = []
    _emit(v, out, set())
    return "".join(out)


def decode_function_text(text: str, env_names=None) -> FunctionValue:
    try:
        src = base64.b64decode(text[len(FUNC_TAG):], validate=True).decode("utf-8")
    except (binascii.Error, UnicodeDecodeError) as e:
        raise EmbeddedCodeError("syntax", f"bad code encoding: {e}") from None
    try:
        fn = parse_function(src)
    except (AblSyntaxError, ValidationError) as e:
        raise EmbeddedCodeError("syntax", str(e)) from None
    try:
        validate_function(fn, env_names)
    except ValidationError as e:
        raise EmbeddedCodeError("freeVariable", str(e)) from None
    return fn


def _revive(v, env_names):
    if isinstance(v, str):
        if v.startswith(FUNC_TAG):
            return decode_function_text(v, env_names)
        if v.startswith(NUM_TAG):
            tail = v[len(NUM_TAG):]
            return {"NaN": float("nan"), "Inf": float("inf"),
                    "-Inf": float("-inf")}.get(tail, v)
        if v.startswith(STR_TAG):
            return v[len(STR_TAG):]
        return v
    if isinstance(v, list):
        return [_revive(e, env_names) for e in v]
    if isinstance(v, dict):
        return {(_revive(k, env_names) if isinstance(k, str) else k):
                _revive(e, env_names) for k, e in v.items()}
    return v


def decode_value(text: str, env_names=None):
    try:
        raw = json.loads(text, parse_int=float, parse_float=float)
    except json.JSONDecodeError as e:
        raise ParseError(str(e)) from None
    return _revive(raw, env_names)


# --- process snapshots ---


@dataclass
class ProcessImage:
    """Decoded snapshot, ready to become a live process."""

    agent_id: str
    class_name: str
    level: int
    next: Optional[str]
    body: dict
    activities: dict
    transitions: dict
    handlers: dict
    blocks: list = field(default_factory=list)


def _rule_json(rule):
    if isinstance(rule, Static):
        return rule.target
    if isinstance(rule, Dynamic):
        if rule.has_bound_arg:
            return {"fn": rule.fn, "arg": rule.bound_arg}
        return rule.fn
    raise EncodeError(f"bad transition rule {rule!r}")


def _rule_from(decoded):
    if isinstance(decoded, str):
        return Static(target=decoded)
    if isinstance(decoded, FunctionValue):
        return Dynamic(fn=decoded)
    if isinstance(decoded, dict) and isinstance(decoded.get("fn"), FunctionValue):
        return Dynamic(fn=decoded["fn"], bound_arg=decoded.get("arg"),
                       has_bound_arg=True)
    raise ParseError(f"bad transition entry {decoded!r}")


def _block_json(entry: BlockEntry) -> dict:
    if isinstance(entry, LinearBlock):
        return {"k": "B", "fns": list(entry.fns), "i": entry.index}
    if isinstance(entry, LoopBlock):
        return {"k": "L", "init": entry.init, "cond": entry.cond,
                "next": entry.next, "fns": list(entry.fns),
                "fin": entry.finalize, "started": entry.started,
                "i": entry.index}
    if isinstance(entry, IteratorBlock):
        return {"k": "I", "items": entry.items, "next": entry.next,
                "fns": list(entry.fns), "fin": entry.finalize,
                "ii": entry.item_index, "fi": entry.fn_index}
    raise EncodeError(f"unknown block entry {entry!r}")


def _need_fn(value, what: str) -> FunctionValue:
    if isinstance(value, FunctionValue):
        return value
    raise ParseError(f"{what} is not code")


def _block_from(d, env_names) -> BlockEntry:
    kind = d.get("k")
    fns = [_need_fn(f, "block element") for f in d.get("fns", [])]
    fin = d.get("fin")
    fin = _need_fn(fin, "finalize") if fin is not None else None
    if kind == "B":
        return LinearBlock(fns, index=int(d.get("i", 0)))
    if kind == "L":
        return LoopBlock(_need_fn(d.get("init"), "init"),
                         _need_fn(d.get("cond"), "cond"),
                         _need_fn(d.get("next"), "next"),
                         fns, fin, started=bool(d.get("started")),
                         index=int(d.get("i", 0)))
    if kind == "I":
        return IteratorBlock(d.get("items", []),
                             _need_fn(d.get("next"), "next"),
                             fns, fin, item_index=int(d.get("ii", 0)),
                             fn_index=int(d.get("fi", 0)))
    raise ParseError(f"unknown block kind {kind!r}")


def snapshot_process(proc, code_limit: int = DEFAULT_CODE_LIMIT) -> str:
    """Serialize a process at a scheduling boundary into JSON+ text."""
    doc: dict = {}
    doc["id"] = proc.id
    doc["class"] = proc.class_name
    doc["level"] = float(proc.level)
    doc["next"] = proc.next
    doc["body"] = proc.body
    doc["act"] = dict(proc.activities)
    doc["trans"] = {k: _rule_json(r) for k, r in proc.transitions.items()}
    doc["on"] = dict(proc.handlers)
    blocks = list(getattr(proc, "schedule", ()))
    doc["block"] = [_block_json(b) for b in blocks] if blocks else None
    text = encode_value(doc)
    if code_limit and len(text.encode("utf-8")) > code_limit:
        raise SizeLimitExceeded(
            f"snapshot is {len(text)} bytes, limit {code_limit}")
    return text


def restore_image(text: str, granted_level: int, env_names=None) -> ProcessImage:
    """Decode a snapshot; the destination's granted level always wins."""
    doc = decode_value(text, env_names)
    if not isinstance(doc, dict) or "class" not in doc:
        raise ParseError("not a process snapshot")
    activities = {}
    for k, v in (doc.get("act") or {}).items():
        if not isinstance(v, FunctionValue):
            raise ParseError(f"activity '{k}' is not code")
        activities[k] = v
    transitions = {k: _rule_from(v) for k, v in (doc.get("trans") or {}).items()}
    handlers = {}
    for k, v in (doc.get("on") or {}).items():
        if not isinstance(v, FunctionValue):
            raise ParseError(f"handler '{k}' is not code")
        handlers[k] = v
    raw_blocks = doc.get("block") or []
    blocks = [_block_from(b, env_names) for b in raw_blocks]
    nxt = doc.get("next")
    return ProcessImage(
        agent_id=str(doc.get("id", "")),
        class_name=str(doc["class"]),
        level=granted_level,
        next=nxt if isinstance(nxt, str) else None,
        body=doc.get("body") or {},
        activities=activities,
        transitions=transitions,
        handlers=handlers,
        blocks=blocks,
    )


# --- payload compression (AMP body framing) ---


def pack_payload(text: str, compress: bool = False) -> bytes:
    raw = text.encode("utf-8")
    if compress:
        packed = zlib.compress(raw, 6)
        if len(packed) < len(raw):
            return b"Z" + packed
    return b"P" + raw


def unpack_payload(data: bytes) -> str:
    if not data:
        raise ParseError("empty payload")
    flag, body = data[:1], data[1:]
    if flag == b"P":
        return body.decode("utf-8")
    if flag == b"Z":
        try:
            return zlib.decompress(body).decode("utf-8")
        except zlib.error as e:
            raise ParseError(f"bad compressed payload: {e}") from None
    raise ParseError(f"unknown payload flag {flag!r}")
