"""EVM ABI encoding and decoding of call data and event logs.

Decoded values use plain Python types: ``int`` for (u)intN, :class:`Address`,
``bool``, ``bytes`` for bytesN/bytes, ``str`` for string, ``list`` for arrays
and ``dict`` (ordered by component) for tuples.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from Crypto.Hash import keccak

from .model import Address, Call, HashedTopic, LogEntry, Side, TransactionInstance

logger = logging.getLogger(__name__)

WORD = 32


class AbiError(ValueError):
    pass


class UnsupportedTypeError(AbiError):
    pass


class AbiDecodeError(AbiError):
    pass


class AbiEncodeError(AbiError):
    pass


def keccak256(data: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()


# ---------------------------------------------------------------------------
# types


class AbiType:
    is_dynamic = False

    def canonical(self) -> str:
        raise NotImplementedError

    def head_size(self) -> int:
        return WORD

    def __str__(self):
        return self.canonical()


@dataclass(frozen=True)
class UIntType(AbiType):
    bits: int = 256

    def canonical(self):
        return f"uint{self.bits}"


@dataclass(frozen=True)
class IntType(AbiType):
    bits: int = 256

    def canonical(self):
        return f"int{self.bits}"


@dataclass(frozen=True)
class AddressType(AbiType):
    def canonical(self):
        return "address"


@dataclass(frozen=True)
class BoolType(AbiType):
    def canonical(self):
        return "bool"


@dataclass(frozen=True)
class FixedBytesType(AbiType):
    size: int = 32

    def canonical(self):
        return f"bytes{self.size}"


@dataclass(frozen=True)
class BytesType(AbiType):
    is_dynamic = True

    def canonical(self):
        return "bytes"


@dataclass(frozen=True)
class StringType(AbiType):
    is_dynamic = True

    def canonical(self):
        return "string"


@dataclass(frozen=True)
class ArrayType(AbiType):
    elem: AbiType
    length: int | None = None

    def __post_init__(self):
        if self.length is not None and self.length < 1:
            raise UnsupportedTypeError("fixed-size arrays need a positive length")

    @property
    def is_dynamic(self):
        return self.length is None or self.elem.is_dynamic

    def canonical(self):
        return f"{self.elem.canonical()}[{'' if self.length is None else self.length}]"

    def head_size(self):
        if self.is_dynamic:
            return WORD
        return self.length * self.elem.head_size()


@dataclass(frozen=True)
class TupleType(AbiType):
    components: tuple[tuple[str, AbiType], ...] = ()

    def __post_init__(self):
        names = [n for n, _ in self.components]
        if len(set(names)) != len(names):
            raise AbiError(f"duplicate tuple component names: {names}")

    @property
    def is_dynamic(self):
        return any(t.is_dynamic for _, t in self.components)

    def canonical(self):
        return "(" + ",".join(t.canonical() for _, t in self.components) + ")"

    def head_size(self):
        if self.is_dynamic:
            return WORD
        return sum(t.head_size() for _, t in self.components)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.components]

    @property
    def types(self) -> list[AbiType]:
        return [t for _, t in self.components]


def _default_name(i: int) -> str:
    return f"_{i}"


def _elementary(name: str) -> AbiType:
    m = re.fullmatch(r"(u?int)(\d*)", name)
    if m:
        bits = int(m.group(2) or 256)
        if bits % 8 or not 8 <= bits <= 256:
            raise UnsupportedTypeError(f"bad integer width: {name}")
        return UIntType(bits) if m.group(1) == "uint" else IntType(bits)
    if name == "address":
        return AddressType()
    if name == "bool":
        return BoolType()
    if name == "string":
        return StringType()
    if name == "bytes":
        return BytesType()
    m = re.fullmatch(r"bytes(\d+)", name)
    if m:
        size = int(m.group(1))
        if not 1 <= size <= 32:
            raise UnsupportedTypeError(f"bad bytes width: {name}")
        return FixedBytesType(size)
    raise UnsupportedTypeError(f"unsupported ABI type: {name}")


def _split_top(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


@lru_cache(maxsize=None)
def parse_type(text: str) -> AbiType:
    """Parse a canonical type string such as ``(uint256,address)[]``."""
    text = text.strip()
    m = re.fullmatch(r"(.*)\[(\d*)\]", text)
    if m:
        inner = parse_type(m.group(1))
        return ArrayType(inner, int(m.group(2)) if m.group(2) else None)
    if text.startswith("(") and text.endswith(")"):
        body = text[1:-1]
        parts = _split_top(body) if body else []
        return TupleType(tuple((_default_name(i), parse_type(p)) for i, p in enumerate(parts)))
    return _elementary(text)


def type_from_json(entry: Mapping) -> AbiType:
    """Build a type from one JSON ABI parameter, keeping tuple component names."""
    raw = entry["type"]
    m = re.fullmatch(r"tuple((?:\[\d*\])*)", raw)
    if m:
        comps = tuple(
            (c.get("name") or _default_name(i), type_from_json(c))
            for i, c in enumerate(entry.get("components", []))
        )
        base: AbiType = TupleType(comps)
        for dim in re.findall(r"\[(\d*)\]", m.group(1)):
            base = ArrayType(base, int(dim) if dim else None)
        return base
    return parse_type(raw)


def type_to_json(name: str, t: AbiType) -> dict:
    suffix = ""
    while isinstance(t, ArrayType):
        suffix = f"[{'' if t.length is None else t.length}]" + suffix
        t = t.elem
    if isinstance(t, TupleType):
        return {
            "name": name,
            "type": "tuple" + suffix,
            "components": [type_to_json(n, c) for n, c in t.components],
        }
    return {"name": name, "type": t.canonical() + suffix}


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class FunctionDescriptor:
    name: str
    inputs: tuple[tuple[str, AbiType], ...] = ()

    def __post_init__(self):
        if not self.name:
            raise AbiError("function needs a name")

    @property
    def tuple_type(self) -> TupleType:
        return TupleType(self.inputs)

    @property
    def signature(self) -> str:
        return canonical_signature(self)

    @property
    def selector(self) -> bytes:
        return selector(self.signature)

    def to_json(self) -> dict:
        return {
            "type": "function",
            "name": self.name,
            "inputs": [type_to_json(n, t) for n, t in self.inputs],
            "outputs": [],
            "stateMutability": "payable",
        }

    @classmethod
    def from_json(cls, entry: Mapping) -> "FunctionDescriptor":
        inputs = tuple(
            (p.get("name") or _default_name(i), type_from_json(p)) for i, p in enumerate(entry.get("inputs", []))
        )
        return cls(entry["name"], inputs)


@dataclass(frozen=True)
class EventDescriptor:
    name: str
    inputs: tuple[tuple[str, AbiType], ...] = ()
    indexed: tuple[bool, ...] = ()
    anonymous: bool = False

    def __post_init__(self):
        if not self.name:
            raise AbiError("event needs a name")
        if not self.indexed:
            object.__setattr__(self, "indexed", (False,) * len(self.inputs))
        if len(self.indexed) != len(self.inputs):
            raise AbiError("indexed flags do not match inputs")

    @property
    def signature(self) -> str:
        return canonical_signature(self)

    @property
    def topic0(self) -> bytes:
        return topic0(self.signature)

    @property
    def n_indexed(self) -> int:
        return sum(self.indexed)

    def decoded_schema(self) -> str:
        """Type string of the decoded record; hashed indexed dynamics become bytes32."""
        parts = []
        for (_, t), idx in zip(self.inputs, self.indexed):
            parts.append("bytes32" if idx and t.is_dynamic else t.canonical())
        return "(" + ",".join(parts) + ")"

    def to_json(self) -> dict:
        inputs = []
        for (n, t), idx in zip(self.inputs, self.indexed):
            d = type_to_json(n, t)
            d["indexed"] = idx
            inputs.append(d)
        return {"type": "event", "name": self.name, "inputs": inputs, "anonymous": self.anonymous}

    @classmethod
    def from_json(cls, entry: Mapping) -> "EventDescriptor":
        params = entry.get("inputs", [])
        inputs = tuple((p.get("name") or _default_name(i), type_from_json(p)) for i, p in enumerate(params))
        indexed = tuple(bool(p.get("indexed", False)) for p in params)
        return cls(entry["name"], inputs, indexed, bool(entry.get("anonymous", False)))


def canonical_signature(d: FunctionDescriptor | EventDescriptor) -> str:
    return f"{d.name}({','.join(t.canonical() for _, t in d.inputs)})"


@lru_cache(maxsize=4096)
def topic0(sig: str) -> bytes:
    return keccak256(sig.encode())


def selector(sig: str) -> bytes:
    return topic0(sig)[:4]


# ---------------------------------------------------------------------------
# encoding


def _word(n: int) -> bytes:
    return n.to_bytes(WORD, "big")


def _pad_right(b: bytes) -> bytes:
    return b + b"\x00" * (-len(b) % WORD)


def _encode(t: AbiType, value: Any) -> bytes:
    if isinstance(t, UIntType):
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**t.bits:
            raise AbiEncodeError(f"{value!r} is not a valid {t.canonical()}")
        return _word(value)
    if isinstance(t, IntType):
        lo, hi = -(2 ** (t.bits - 1)), 2 ** (t.bits - 1)
        if isinstance(value, bool) or not isinstance(value, int) or not lo <= value < hi:
            raise AbiEncodeError(f"{value!r} is not a valid {t.canonical()}")
        return value.to_bytes(WORD, "big", signed=True)
    if isinstance(t, AddressType):
        try:
            addr = Address(value)
        except (ValueError, TypeError) as exc:
            raise AbiEncodeError(str(exc)) from None
        return b"\x00" * 12 + addr
    if isinstance(t, BoolType):
        if not isinstance(value, bool):
            raise AbiEncodeError(f"{value!r} is not a bool")
        return _word(int(value))
    if isinstance(t, FixedBytesType):
        if not isinstance(value, (bytes, bytearray)) or len(value) != t.size:
            raise AbiEncodeError(f"{value!r} is not {t.canonical()}")
        return bytes(value).ljust(WORD, b"\x00")
    if isinstance(t, BytesType):
        if not isinstance(value, (bytes, bytearray)):
            raise AbiEncodeError(f"{value!r} is not bytes")
        return _word(len(value)) + _pad_right(bytes(value))
    if isinstance(t, StringType):
        if not isinstance(value, str):
            raise AbiEncodeError(f"{value!r} is not a string")
        raw = value.encode("utf-8")
        return _word(len(raw)) + _pad_right(raw)
    if isinstance(t, ArrayType):
        if not isinstance(value, (list, tuple)):
            raise AbiEncodeError(f"{value!r} is not an array")
        if t.length is not None and len(value) != t.length:
            raise AbiEncodeError(f"expected {t.length} elements, got {len(value)}")
        body = _encode_sequence([t.elem] * len(value), list(value))
        return body if t.length is not None else _word(len(value)) + body
    if isinstance(t, TupleType):
        return _encode_sequence(t.types, _tuple_values(t, value))
    raise UnsupportedTypeError(f"cannot encode {t!r}")


def _tuple_values(t: TupleType, value: Any) -> list:
    if isinstance(value, Mapping):
        try:
            return [value[n] for n in t.names]
        except KeyError as exc:
            raise AbiEncodeError(f"missing tuple component {exc}") from None
    if isinstance(value, (list, tuple)) and len(value) == len(t.components):
        return list(value)
    raise AbiEncodeError(f"{value!r} does not fit {t.canonical()}")


def _encode_sequence(types: Sequence[AbiType], values: Sequence) -> bytes:
    heads, tails = [], []
    head_len = sum(t.head_size() for t in types)
    for t, v in zip(types, values):
        enc = _encode(t, v)
        if t.is_dynamic:
            heads.append(_word(head_len + sum(len(x) for x in tails)))
            tails.append(enc)
        else:
            heads.append(enc)
    return b"".join(heads) + b"".join(tails)


def encode_values(t: TupleType, values: Any) -> bytes:
    return _encode(t, values)


def encode_call(fn: FunctionDescriptor, values: Any) -> bytes:
    return fn.selector + _encode(fn.tuple_type, values)


def encode_log(ev: EventDescriptor, values: Any) -> tuple[list[bytes], bytes]:
    """Return (topics, data) for an event emission."""
    vals = _tuple_values(TupleType(ev.inputs), values)
    topics = [] if ev.anonymous else [ev.topic0]
    data_types, data_vals = [], []
    for (_, t), idx, v in zip(ev.inputs, ev.indexed, vals):
        if not idx:
            data_types.append(t)
            data_vals.append(v)
        elif isinstance(t, (BytesType, StringType)):
            raw = v.encode("utf-8") if isinstance(t, StringType) else bytes(v)
            topics.append(keccak256(raw))
        elif t.is_dynamic or isinstance(t, (TupleType, ArrayType)):
            topics.append(keccak256(_encode_in_place(t, v)))
        else:
            topics.append(_encode(t, v))
    return topics, _encode_sequence(data_types, data_vals)


def _encode_in_place(t: AbiType, v: Any) -> bytes:
    # topic hashing of indexed composite values: packed words, no offsets/lengths
    if isinstance(t, (BytesType, StringType)):
        raw = v.encode("utf-8") if isinstance(t, StringType) else bytes(v)
        return _pad_right(raw)
    if isinstance(t, ArrayType):
        return b"".join(_encode_in_place(t.elem, x) for x in v)
    if isinstance(t, TupleType):
        return b"".join(_encode_in_place(ct, x) for ct, x in zip(t.types, _tuple_values(t, v)))
    return _encode(t, v)


# ---------------------------------------------------------------------------
# decoding


class _Decoder:
    def __init__(self, data: bytes, strict: bool, notes: list[str] | None):
        self.data = data
        self.strict = strict
        self.notes = notes if notes is not None else []

    def flag(self, msg: str):
        if self.strict:
            raise AbiDecodeError(msg)
        self.notes.append(msg)

    def word(self, pos: int) -> bytes:
        if pos < 0 or pos + WORD > len(self.data):
            raise AbiDecodeError(f"read of word at {pos} past end of {len(self.data)}-byte buffer")
        return self.data[pos : pos + WORD]

    def offset(self, base: int, pos: int) -> int:
        off = int.from_bytes(self.word(pos), "big")
        target = base + off
        if off >= len(self.data) or target + WORD > len(self.data):
            raise AbiDecodeError(f"offset {off} out of bounds")
        return target

    def decode(self, t: AbiType, pos: int) -> Any:
        if isinstance(t, UIntType):
            n = int.from_bytes(self.word(pos), "big")
            if n >> t.bits:
                self.flag(f"{t.canonical()} with dirty high bits")
                n &= (1 << t.bits) - 1
            return n
        if isinstance(t, IntType):
            raw = self.word(pos)
            n = int.from_bytes(raw, "big", signed=True)
            lo, hi = -(2 ** (t.bits - 1)), 2 ** (t.bits - 1)
            if not lo <= n < hi:
                self.flag(f"{t.canonical()} not sign-extended")
                n = int.from_bytes(raw[-t.bits // 8 :], "big", signed=True)
            return n
        if isinstance(t, AddressType):
            raw = self.word(pos)
            if any(raw[:12]):
                self.flag("address with dirty high bytes")
            return Address(raw[12:])
        if isinstance(t, BoolType):
            n = int.from_bytes(self.word(pos), "big")
            if n > 1:
                self.flag("bool word not 0 or 1")
            return n != 0
        if isinstance(t, FixedBytesType):
            raw = self.word(pos)
            if any(raw[t.size :]):
                self.flag(f"{t.canonical()} with dirty padding")
            return raw[: t.size]
        if isinstance(t, (BytesType, StringType)):
            n = int.from_bytes(self.word(pos), "big")
            start = pos + WORD
            if n > len(self.data) - start:
                raise AbiDecodeError(f"length {n} exceeds buffer")
            raw = self.data[start : start + n]
            pad = self.data[start + n : start + n + (-n % WORD)]
            if len(pad) != -n % WORD:
                self.flag("missing tail padding")
            elif any(pad):
                self.flag("dirty tail padding")
            if isinstance(t, BytesType):
                return raw
            try:
                return raw.decode("utf-8")
            except UnicodeDecodeError:
                self.flag("string is not valid utf-8")
                return raw.decode("utf-8", errors="replace")
        if isinstance(t, ArrayType):
            if t.length is None:
                n = int.from_bytes(self.word(pos), "big")
                base = pos + WORD
                if n * t.elem.head_size() > len(self.data) - base:
                    raise AbiDecodeError(f"array length {n} exceeds buffer")
            else:
                n, base = t.length, pos
            return self.sequence([t.elem] * n, base)
        if isinstance(t, TupleType):
            return dict(zip(t.names, self.sequence(t.types, pos)))
        raise UnsupportedTypeError(f"cannot decode {t!r}")

    def sequence(self, types: Sequence[AbiType], base: int) -> list:
        out, head = [], base
        for t in types:
            if t.is_dynamic:
                out.append(self.decode(t, self.offset(base, head)))
            else:
                out.append(self.decode(t, head))
            head += t.head_size()
        return out


def decode_values(t: TupleType, data: bytes, *, strict: bool = False, notes: list[str] | None = None) -> dict:
    if not t.components:
        return {}
    return _Decoder(bytes(data), strict, notes).decode(t, 0)


def decode_call(fn: FunctionDescriptor, data: bytes, *, strict: bool = False, notes: list[str] | None = None) -> dict:
    """Decode call data (selector included) into a name -> value record."""
    data = bytes(data)
    if len(data) < 4:
        raise AbiDecodeError("call data shorter than a selector")
    if data[:4] != fn.selector:
        raise AbiDecodeError(f"selector 0x{data[:4].hex()} does not match {fn.signature}")
    return decode_values(fn.tuple_type, data[4:], strict=strict, notes=notes)


def decode_log(
    ev: EventDescriptor,
    topics: Sequence[bytes],
    data: bytes,
    *,
    strict: bool = False,
    notes: list[str] | None = None,
) -> tuple[str, dict]:
    topics = [bytes(t) for t in topics]
    if not ev.anonymous:
        if not topics or topics[0] != ev.topic0:
            raise AbiDecodeError(f"topic0 does not match {ev.signature}")
        topics = topics[1:]
    if len(topics) != ev.n_indexed:
        raise AbiDecodeError(f"{ev.name} expects {ev.n_indexed} indexed topics, got {len(topics)}")
    data_types = TupleType(tuple((n, t) for (n, t), idx in zip(ev.inputs, ev.indexed) if not idx))
    body = decode_values(data_types, data, strict=strict, notes=notes)
    dec = _Decoder(b"", strict, notes)
    out, it = {}, iter(topics)
    for (name, t), idx in zip(ev.inputs, ev.indexed):
        if not idx:
            out[name] = body[name]
            continue
        topic = next(it)
        if len(topic) != WORD:
            raise AbiDecodeError("topic is not 32 bytes")
        if t.is_dynamic or isinstance(t, (TupleType, ArrayType)):
            out[name] = HashedTopic(topic)
        else:
            dec.data = topic
            out[name] = dec.decode(t, 0)
    return ev.name, out


# ---------------------------------------------------------------------------
# registry and instance decoding


@dataclass
class AbiRegistry:
    functions: dict[bytes, FunctionDescriptor] = field(default_factory=dict)
    events: dict[bytes, EventDescriptor] = field(default_factory=dict)

    def add_abi(self, abi: Iterable[Mapping]):
        for entry in abi:
            kind = entry.get("type", "function")
            try:
                if kind == "function":
                    fn = FunctionDescriptor.from_json(entry)
                    self.functions[fn.selector] = fn
                elif kind == "event":
                    ev = EventDescriptor.from_json(entry)
                    if not ev.anonymous:
                        self.events[ev.topic0] = ev
            except UnsupportedTypeError as exc:
                logger.warning("skipping %s %s: %s", kind, entry.get("name"), exc)
        return self

    def add(self, *descriptors: FunctionDescriptor | EventDescriptor):
        for d in descriptors:
            if isinstance(d, FunctionDescriptor):
                self.functions[d.selector] = d
            else:
                self.events[d.topic0] = d
        return self

    @classmethod
    def from_files(cls, paths: Iterable[str | Path]) -> "AbiRegistry":
        reg = cls()
        for p in paths:
            data = json.loads(Path(p).read_text())
            if isinstance(data, Mapping):
                data = data.get("abi", [])
            reg.add_abi(data)
        return reg

    @classmethod
    def from_dir(cls, directory: str | Path) -> "AbiRegistry":
        return cls.from_files(sorted(Path(directory).rglob("*.json")))


def _hex(text: str) -> bytes:
    text = text[2:] if text[:2].lower() == "0x" else text
    return bytes.fromhex(text)


def decode_instance(
    raw_tx: Mapping,
    raw_logs: Sequence[Mapping] | None,
    registry: AbiRegistry,
    *,
    side: Side | str = Side.SOURCE,
    strict: bool = False,
    drop_unknown: bool = False,
    diagnostics: list[str] | None = None,
) -> TransactionInstance:
    """Decode a raw transaction and its logs into an instance.

    Unknown selectors and topics become ``unknown`` placeholder nodes (or are
    dropped with ``drop_unknown``); problems are appended to ``diagnostics``.
    """
    diag = diagnostics if diagnostics is not None else []
    tx_hash = raw_tx["hash"]
    data = _hex(raw_tx.get("input", "0x"))
    call = None
    if data:
        fn = registry.functions.get(data[:4])
        if fn is not None:
            try:
                notes: list[str] = []
                args = decode_call(fn, data, strict=strict, notes=notes)
                call = Call(fn.name, args, fn.tuple_type.canonical())
                diag.extend(f"{tx_hash}: call {fn.name}: {n}" for n in notes)
            except AbiDecodeError as exc:
                diag.append(f"{tx_hash}: call {fn.name} undecodable: {exc}")
        else:
            diag.append(f"{tx_hash}: unknown selector 0x{data[:4].hex()}")
        if call is None and not drop_unknown:
            call = Call("unknown", {"selector": data[:4], "data": data[4:]}, "(bytes,bytes)")

    logs = []
    raw_logs = raw_logs if raw_logs is not None else raw_tx.get("logs", [])
    for i, raw in enumerate(raw_logs):
        topics = [_hex(t) for t in raw.get("topics", [])]
        body = _hex(raw.get("data", "0x"))
        address = Address(raw["address"])
        ev = registry.events.get(topics[0]) if topics else None
        entry = None
        if ev is not None:
            try:
                notes = []
                name, args = decode_log(ev, topics, body, strict=strict, notes=notes)
                entry = LogEntry(name, address, args, ev.decoded_schema())
                diag.extend(f"{tx_hash}: log {i} {name}: {n}" for n in notes)
            except AbiDecodeError as exc:
                diag.append(f"{tx_hash}: log {i} {ev.name} undecodable: {exc}")
        else:
            diag.append(f"{tx_hash}: log {i} unknown topic")
        if entry is None:
            if drop_unknown:
                continue
            t0 = topics[0] if topics else b""
            entry = LogEntry("unknown", address, {"topic0": t0, "data": body}, "(bytes,bytes)")
        logs.append(entry)

    return TransactionInstance(
        chain=int(raw_tx["chain"]),
        tx_hash=_hex(tx_hash),
        block_number=int(raw_tx.get("block_number", 0)),
        timestamp=int(raw_tx["timestamp"]),
        sender=Address(raw_tx["from"]),
        contract=Address(raw_tx["to"]),
        native_value=int(raw_tx.get("value", 0)),
        call=call,
        logs=tuple(logs),
        side=Side(side),
    )
