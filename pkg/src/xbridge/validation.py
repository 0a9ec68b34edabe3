"""Input checks used at estimator and CLI boundaries."""

from __future__ import annotations

from typing import Any, Iterable, Mapping

from .model import PairingParams, Side, TransactionInstance


def check_instances(X: Any, side: Side | None = None) -> list[TransactionInstance]:
    """Return ``X`` as a list of instances, optionally all on one side."""
    if isinstance(X, TransactionInstance):
        raise TypeError("expected an iterable of TransactionInstance, got a single instance")
    try:
        txs = list(X)
    except TypeError:
        raise TypeError(f"expected an iterable of TransactionInstance, got {type(X).__name__}") from None
    for tx in txs:
        if not isinstance(tx, TransactionInstance):
            raise TypeError(f"expected TransactionInstance, got {type(tx).__name__}")
        if side is not None and tx.side is not side:
            raise ValueError(f"instance {tx.hash_hex} is on the {tx.side.value} side, expected {side.value}")
    return txs


def check_params(params: PairingParams | Mapping | None) -> PairingParams:
    if params is None:
        return PairingParams()
    if isinstance(params, PairingParams):
        return params
    if isinstance(params, Mapping):
        return PairingParams.from_dict(params)
    raise TypeError(f"cannot build PairingParams from {type(params).__name__}")


def check_truth(truth: Iterable) -> set[tuple[str, str]]:
    out = set()
    for item in truth:
        if len(item) != 2:
            raise ValueError(f"truth entries must be (src_hash, dst_hash), got {item!r}")
        s, d = item
        out.add((str(s).lower(), str(d).lower()))
    return out


def check_fraction(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)
