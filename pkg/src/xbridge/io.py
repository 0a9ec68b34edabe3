"""File formats shared by the CLI stages.

Instances are stored one JSON document per line. Each call/log record carries
its ABI ``schema`` (a tuple type string) so leaves can be typed back: uints
are decimal strings, addresses and byte strings 0x-hex, strings and bools
native JSON.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .abi import (
    AddressType,
    ArrayType,
    BoolType,
    BytesType,
    FixedBytesType,
    IntType,
    StringType,
    TupleType,
    UIntType,
    parse_type,
)
from .model import (
    Address,
    Call,
    LogEntry,
    Pair,
    Side,
    TransactionInstance,
)


class DataError(ValueError):
    """Malformed input data (exit code 3 at the CLI)."""


def _hex(b: bytes) -> str:
    return "0x" + bytes(b).hex()


def _unhex(text: str) -> bytes:
    if not isinstance(text, str) or not text.startswith("0x"):
        raise DataError(f"expected 0x-hex string, got {text!r}")
    return bytes.fromhex(text[2:])


def value_to_json(value: Any, t) -> Any:
    if isinstance(t, (UIntType, IntType)):
        return str(value)
    if isinstance(t, AddressType):
        return str(Address(value))
    if isinstance(t, BoolType):
        return bool(value)
    if isinstance(t, (FixedBytesType, BytesType)):
        return _hex(value)
    if isinstance(t, StringType):
        return value
    if isinstance(t, ArrayType):
        return [value_to_json(v, t.elem) for v in value]
    if isinstance(t, TupleType):
        # keys come from the record: schema strings carry types only
        return {name: value_to_json(v, ct) for (name, v), (_, ct) in zip(value.items(), t.components)}
    raise DataError(f"cannot serialize type {t}")


def value_from_json(data: Any, t) -> Any:
    try:
        if isinstance(t, (UIntType, IntType)):
            return int(data)
        if isinstance(t, AddressType):
            return Address(data)
        if isinstance(t, BoolType):
            if not isinstance(data, bool):
                raise DataError(f"expected bool, got {data!r}")
            return data
        if isinstance(t, (FixedBytesType, BytesType)):
            return _unhex(data)
        if isinstance(t, StringType):
            if not isinstance(data, str):
                raise DataError(f"expected string, got {data!r}")
            return data
        if isinstance(t, ArrayType):
            return [value_from_json(v, t.elem) for v in data]
        if isinstance(t, TupleType):
            if len(data) != len(t.components):
                raise DataError(f"record has {len(data)} keys, schema {t.canonical()} has {len(t.components)}")
            return {name: value_from_json(v, ct) for (name, v), (_, ct) in zip(data.items(), t.components)}
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"bad value {data!r} for {t}: {exc}") from None
    raise DataError(f"cannot deserialize type {t}")


def _record_to_json(args: Mapping, schema: str) -> dict:
    t = parse_type(schema)
    return {name: value_to_json(v, ct) for (name, v), (_, ct) in zip(args.items(), t.components)}


def _record_from_json(args: Mapping, schema: str) -> dict:
    t = parse_type(schema)
    return value_from_json(args, t) if t.components else {}


def instance_to_json(tx: TransactionInstance) -> dict:
    doc = {
        "chain": tx.chain,
        "tx_hash": tx.hash_hex,
        "block_number": tx.block_number,
        "timestamp": tx.timestamp,
        "sender": str(tx.sender),
        "contract": str(tx.contract),
        "native_value": str(tx.native_value),
        "side": tx.side.value,
        "call": None,
        "logs": [],
    }
    if tx.call is not None:
        doc["call"] = {
            "name": tx.call.name,
            "schema": tx.call.schema,
            "args": _record_to_json(tx.call.args, tx.call.schema),
        }
    for entry in tx.logs:
        doc["logs"].append(
            {
                "event": entry.event,
                "address": str(entry.address),
                "schema": entry.schema,
                "args": _record_to_json(entry.args, entry.schema),
            }
        )
    return doc


def instance_from_json(doc: Mapping) -> TransactionInstance:
    try:
        call = None
        if doc.get("call"):
            c = doc["call"]
            call = Call(c["name"], _record_from_json(c["args"], c["schema"]), c["schema"])
        logs = [
            LogEntry(e["event"], Address(e["address"]), _record_from_json(e["args"], e["schema"]), e["schema"])
            for e in doc.get("logs", [])
        ]
        return TransactionInstance(
            chain=int(doc["chain"]),
            tx_hash=_unhex(doc["tx_hash"]),
            block_number=int(doc.get("block_number", 0)),
            timestamp=int(doc["timestamp"]),
            sender=Address(doc["sender"]),
            contract=Address(doc["contract"]),
            native_value=int(doc.get("native_value", 0)),
            call=call,
            logs=tuple(logs),
            side=Side(doc["side"]),
        )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed instance document: {exc}") from None


# ---------------------------------------------------------------------------
# json lines helpers


def write_jsonl(path: str | Path, docs: Iterable[Mapping]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, separators=(",", ":")) + "\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None


def save_instances(path: str | Path, txs: Iterable[TransactionInstance]) -> None:
    write_jsonl(path, (instance_to_json(tx) for tx in txs))


def load_instances(path: str | Path) -> list[TransactionInstance]:
    return [instance_from_json(doc) for doc in read_jsonl(path)]


# ---------------------------------------------------------------------------
# truth and pairs


def save_truth_pairs(path: str | Path, pairs: Iterable[tuple[str, str]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src_hash", "dst_hash"])
        for s, d in sorted(pairs):
            writer.writerow([s, d])


def load_truth_pairs(path: str | Path) -> set[tuple[str, str]]:
    out = set()
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "src_hash":
                continue
            if len(row) != 2:
                raise DataError(f"{path}: expected src_hash,dst_hash rows")
            out.add((row[0].lower(), row[1].lower()))
    return out


def save_pairs(path: str | Path, pairs: Iterable[Pair]) -> None:
    write_jsonl(path, (p.to_dict() for p in pairs))


def load_pair_hashes(path: str | Path) -> set[tuple[str, str]]:
    return {(d["src_hash"], d["dst_hash"]) for d in read_jsonl(path)}
