"""Core domain types: values, field paths, transaction instances, quintuples."""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Any, Iterator, Mapping, Sequence

UINT256_MAX = 2**256 - 1

ROLES = ("D", "C", "T", "A", "Ts")

NATIVE = "native"

ZERO_ADDRESS_HEX = "0x" + "00" * 20


class Side(str, enum.Enum):
    SOURCE = "source"
    DESTINATION = "destination"

    def other(self) -> "Side":
        return Side.DESTINATION if self is Side.SOURCE else Side.SOURCE


class Address(bytes):
    """A 20-byte EVM address. Compares as raw bytes, renders as lowercase hex."""

    def __new__(cls, value: "bytes | str | Address"):
        if isinstance(value, str):
            text = value[2:] if value[:2].lower() == "0x" else value
            try:
                value = bytes.fromhex(text)
            except ValueError:
                raise ValueError(f"invalid address hex: {value!r}") from None
        if len(value) != 20:
            raise ValueError(f"address must be 20 bytes, got {len(value)}")
        return super().__new__(cls, value)

    def __str__(self) -> str:
        return "0x" + self.hex()

    def __repr__(self) -> str:
        return f"Address({str(self)!r})"

    # bytes.__hash__/__eq__ are inherited so Address(b) == b for 20-byte b


class HashedTopic(bytes):
    """32-byte keccak digest standing in for an indexed dynamic event input.

    The original value cannot be recovered from the log.
    """

    def __repr__(self) -> str:
        return f"HashedTopic(0x{self.hex()})"


def value_kind(value: Any) -> str:
    """Classify a decoded value: uint, address, bool, bytes, text, list or record."""
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "uint"
    if isinstance(value, Address):
        return "address"
    if isinstance(value, (bytes, bytearray)):
        return "bytes"
    if isinstance(value, str):
        return "text"
    if isinstance(value, Mapping):
        return "record"
    if isinstance(value, (list, tuple)):
        return "list"
    raise TypeError(f"unsupported value type {type(value).__name__}")


def canonical_address(value: Any) -> str | None:
    """Lowercase 0x-hex for anything that carries an EVM address, else None.

    Accepts Address, 20-byte strings, left-padded 32-byte words and hex text.
    """
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, Address):
        return str(value)
    if isinstance(value, (bytes, bytearray)):
        raw = bytes(value)
        if len(raw) == 20:
            return "0x" + raw.hex()
        if len(raw) == 32 and not any(raw[:12]):
            return "0x" + raw[12:].hex()
        return None
    if isinstance(value, str):
        text = value.strip().lower()
        if re.fullmatch(r"0x[0-9a-f]{40}", text):
            return text
        return None
    return None


# ---------------------------------------------------------------------------
# field paths

_PATH_RE = re.compile(r"^(transaction|log)(?:\[([^\[\]]+)\])?((?:\.[^.\[\]]+)*)$")


@total_ordering
@dataclass(frozen=True)
class FieldPath:
    """Root-to-leaf key path identifying one value slot in an instance.

    ``root`` is ``"transaction"`` or ``"log"``. ``name`` is the function name
    for call arguments, the event name (with a ``#k`` occurrence suffix for
    the k-th repeat of the same event) for logs, and ``None`` for the
    instance-level metadata fields such as ``transaction.timestamp``.
    """

    root: str
    name: str | None
    segments: tuple[str, ...] = ()

    def __post_init__(self):
        if self.root not in ("transaction", "log"):
            raise ValueError(f"bad path root {self.root!r}")
        if self.root == "log" and not self.name:
            raise ValueError("log paths need an event name")
        if self.name is None and not self.segments:
            raise ValueError("metadata path needs a key")
        for seg in self.segments:
            if not seg or "." in seg or "[" in seg or "]" in seg:
                raise ValueError(f"bad path segment {seg!r}")

    def render(self) -> str:
        head = self.root if self.name is None else f"{self.root}[{self.name}]"
        return head + "".join("." + s for s in self.segments)

    __str__ = render

    def __lt__(self, other: "FieldPath") -> bool:
        if not isinstance(other, FieldPath):
            return NotImplemented
        return self.render() < other.render()

    @classmethod
    def parse(cls, text: str) -> "FieldPath":
        m = _PATH_RE.match(text)
        if not m:
            raise ValueError(f"not a field path: {text!r}")
        root, name, rest = m.groups()
        segments = tuple(rest.split(".")[1:]) if rest else ()
        return cls(root, name, segments)

    @property
    def is_meta(self) -> bool:
        return self.name is None


def render_path(path: FieldPath) -> str:
    return path.render()


def as_path(path: "FieldPath | str") -> FieldPath:
    return path if isinstance(path, FieldPath) else FieldPath.parse(path)


META_FIELDS = ("sender", "contract", "value", "timestamp")
TIMESTAMP_PATH = FieldPath("transaction", None, ("timestamp",))
NATIVE_VALUE_PATH = FieldPath("transaction", None, ("value",))


def iter_leaves(name_root: tuple[str, str | None], value: Any, segments=()) -> Iterator[tuple[FieldPath, Any]]:
    """Yield (path, leaf) pairs under one record; list indices are not part of the path."""
    kind = value_kind(value)
    if kind == "record":
        for key, child in value.items():
            yield from iter_leaves(name_root, child, segments + (key,))
    elif kind == "list":
        for child in value:
            yield from iter_leaves(name_root, child, segments)
    else:
        yield FieldPath(name_root[0], name_root[1], segments), value


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class Call:
    name: str
    args: dict
    schema: str = "()"


@dataclass(frozen=True)
class LogEntry:
    event: str
    address: Address
    args: dict
    schema: str = "()"


@dataclass(frozen=True, eq=False)
class TransactionInstance:
    """One transaction with its decoded call and event logs."""

    chain: int
    tx_hash: bytes
    block_number: int
    timestamp: int
    sender: Address
    contract: Address
    native_value: int
    call: Call | None
    logs: tuple[LogEntry, ...]
    side: Side

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive")
        if len(self.tx_hash) != 32:
            raise ValueError("tx_hash must be 32 bytes")
        if not 0 <= self.native_value <= UINT256_MAX:
            raise ValueError("native_value out of uint256 range")
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "logs", tuple(self.logs))

    @property
    def ref(self) -> tuple[int, str]:
        return (self.chain, self.hash_hex)

    @property
    def hash_hex(self) -> str:
        return "0x" + self.tx_hash.hex()

    def iter_leaves(self) -> Iterator[tuple[FieldPath, Any]]:
        meta = {
            "sender": self.sender,
            "contract": self.contract,
            "value": self.native_value,
            "timestamp": self.timestamp,
        }
        for key in META_FIELDS:
            yield FieldPath("transaction", None, (key,)), meta[key]
        if self.call is not None:
            yield from iter_leaves(("transaction", self.call.name), self.call.args)
        seen: dict[str, int] = {}
        for entry in self.logs:
            seen[entry.event] = seen.get(entry.event, 0) + 1
            n = seen[entry.event]
            label = entry.event if n == 1 else f"{entry.event}#{n}"
            yield from iter_leaves(("log", label), entry.args)

    @cached_property
    def leaf_map(self) -> dict[FieldPath, Any]:
        out: dict[FieldPath, Any] = {}
        for path, value in self.iter_leaves():
            out.setdefault(path, value)
        return out

    @cached_property
    def ambiguous_paths(self) -> frozenset[FieldPath]:
        """Paths reached by more than one leaf (list elements); resolve picks the first."""
        counts: dict[FieldPath, int] = {}
        for path, _ in self.iter_leaves():
            counts[path] = counts.get(path, 0) + 1
        return frozenset(p for p, c in counts.items() if c > 1)

    @cached_property
    def field_set(self) -> tuple[str, ...]:
        return tuple(sorted(p.render() for p in self.leaf_map))

    @cached_property
    def category_key(self) -> str:
        return category_key(self.field_set)


_MISSING = object()


def resolve(tx: TransactionInstance, path: "FieldPath | str", default: Any = None) -> Any:
    """Leaf value at ``path`` or ``default`` when the path does not exist in ``tx``."""
    value = tx.leaf_map.get(as_path(path), _MISSING)
    return default if value is _MISSING else value


# ---------------------------------------------------------------------------
# quintuples and categories


@dataclass(frozen=True)
class Quintuple:
    D: FieldPath
    C: FieldPath
    T: FieldPath
    A: FieldPath
    Ts: FieldPath

    def __post_init__(self):
        for role in ROLES:
            object.__setattr__(self, role, as_path(getattr(self, role)))

    def __getitem__(self, role: str) -> FieldPath:
        if role not in ROLES:
            raise KeyError(role)
        return getattr(self, role)

    def items(self):
        return [(role, self[role]) for role in ROLES]

    def to_dict(self) -> dict[str, str]:
        return {role: self[role].render() for role in ROLES}

    @classmethod
    def from_dict(cls, data: Mapping[str, str]) -> "Quintuple":
        return cls(**{role: FieldPath.parse(data[role]) for role in ROLES})


@dataclass
class CandidateQuintuple:
    """Per-role candidate fields with confidences, highest first."""

    roles: dict[str, list[tuple[FieldPath, float]]] = field(default_factory=dict)
    uninferable: bool = False

    def __post_init__(self):
        for role in ROLES:
            entries = [(as_path(p), float(c)) for p, c in self.roles.get(role, [])]
            for _, c in entries:
                if not 0.0 <= c <= 1.0:
                    raise ValueError(f"confidence {c} outside [0, 1]")
            entries.sort(key=lambda e: (-e[1], e[0].render()))
            self.roles[role] = entries

    def paths(self, role: str) -> list[FieldPath]:
        return [p for p, _ in self.roles.get(role, [])]

    def confidence(self, role: str, path: FieldPath) -> float:
        for p, c in self.roles.get(role, []):
            if p == path:
                return c
        return 0.0

    @property
    def complete(self) -> bool:
        return all(self.roles.get(role) for role in ROLES)

    def space_size(self) -> int:
        size = 1
        for role in ROLES:
            size *= len(self.roles.get(role, []))
        return size

    def to_dict(self) -> dict:
        return {
            "uninferable": self.uninferable,
            "roles": {
                role: [{"field": p.render(), "confidence": c} for p, c in self.roles.get(role, [])]
                for role in ROLES
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CandidateQuintuple":
        roles = {
            role: [(FieldPath.parse(e["field"]), e["confidence"]) for e in data["roles"].get(role, [])]
            for role in ROLES
        }
        return cls(roles=roles, uninferable=bool(data.get("uninferable", False)))


def category_key(field_set: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(field_set).encode()).hexdigest()


@dataclass
class Category:
    field_set: tuple[str, ...]
    members: list[TransactionInstance] = field(default_factory=list)
    side: Side | None = None

    @cached_property
    def key(self) -> str:
        return category_key(self.field_set)

    @property
    def pairable(self) -> bool:
        return len(self.field_set) >= 5

    @property
    def paths(self) -> list[FieldPath]:
        return [FieldPath.parse(f) for f in self.field_set]

    def manifest(self) -> dict:
        return {
            "key": self.key,
            "side": self.side.value if self.side else None,
            "size": len(self.members),
            "n_fields": len(self.field_set),
            "pairable": self.pairable,
            "fields": list(self.field_set),
        }


# ---------------------------------------------------------------------------
# pairing parameters and results


@dataclass
class PairingParams:
    """Tolerances and alias tables used by examination and pairing.

    ``chain_alias`` maps bridge-internal chain ids to canonical chain ids.
    ``token_alias`` maps ``(chain, token)`` to a symbol shared across chains;
    ``token`` is a lowercase address string or :data:`NATIVE`.
    """

    timewindow: int = 7200
    fee_rate: float = 0.2
    chain_alias: dict[int, int] = field(default_factory=dict)
    token_alias: dict[tuple[int, str], str] = field(default_factory=dict)

    def __post_init__(self):
        if self.timewindow <= 0:
            raise ValueError("timewindow must be positive")
        if not 0.0 <= self.fee_rate <= 1.0:
            raise ValueError("fee_rate must lie in [0, 1]")
        self.chain_alias = {int(k): int(v) for k, v in self.chain_alias.items()}
        self.token_alias = {
            (int(c), t if t == NATIVE else t.lower()): s for (c, t), s in self.token_alias.items()
        }

    @property
    def fee_fraction(self) -> Fraction:
        # decimal-exact so that a ratio equal to the configured rate passes
        return Fraction(str(self.fee_rate))

    def resolve_chain(self, value: Any) -> int | None:
        if isinstance(value, bool) or not isinstance(value, int):
            return None
        return self.chain_alias.get(value, value)

    def canonical_token(self, chain: int, value: Any) -> str | None:
        """Cross-chain token identity: alias symbol if known, else the address itself."""
        if value == NATIVE:
            return self.token_alias.get((chain, NATIVE), NATIVE)
        addr = canonical_address(value)
        if addr is not None:
            if (chain, addr) in self.token_alias:
                return self.token_alias[(chain, addr)]
            return addr
        if isinstance(value, str) and value:
            return self.token_alias.get((chain, value.lower()), value.upper())
        return None

    def to_dict(self) -> dict:
        return {
            "timewindow": self.timewindow,
            "fee_rate": self.fee_rate,
            "chain_alias": {str(k): v for k, v in self.chain_alias.items()},
            "token_alias": [[c, t, s] for (c, t), s in sorted(self.token_alias.items())],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PairingParams":
        alias = data.get("token_alias", [])
        if isinstance(alias, Mapping):
            alias = [k.split(":", 1) + [v] for k, v in alias.items()]
        return cls(
            timewindow=int(data.get("timewindow", 7200)),
            fee_rate=float(data.get("fee_rate", 0.2)),
            chain_alias={int(k): int(v) for k, v in data.get("chain_alias", {}).items()},
            token_alias={(int(c), t): s for c, t, s in alias},
        )


@dataclass(frozen=True)
class Pair:
    src_ref: tuple[int, str]
    dst_ref: tuple[int, str]
    values: dict
    rule_trace: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "src_chain": self.src_ref[0],
            "src_hash": self.src_ref[1],
            "dst_chain": self.dst_ref[0],
            "dst_hash": self.dst_ref[1],
            "values": dict(self.values),
            "rules": list(self.rule_trace),
        }
