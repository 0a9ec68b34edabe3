"""Identifier extraction and cross-chain pairing."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import (
    Pair,
    PairingParams,
    Quintuple,
    Side,
    TransactionInstance,
    canonical_address,
    resolve,
    value_kind,
)

logger = logging.getLogger(__name__)

_MISSING = object()


@dataclass(frozen=True)
class Identifier:
    """Canonical values a quintuple extracts from one transaction."""

    D: str
    C: int
    T: str
    A: int
    Ts: int
    side: Side
    own_chain: int
    tx_hash: str

    @property
    def ref(self) -> tuple[int, str]:
        return (self.own_chain, self.tx_hash)


class ExtractionError(ValueError):
    pass


def extract_identifier(tx: TransactionInstance, qt: Quintuple, params: PairingParams) -> Identifier:
    """Resolve and canonicalize the five values; raise ExtractionError when one is missing or ill-typed."""
    raw = {}
    for role, path in qt.items():
        v = resolve(tx, path, _MISSING)
        if v is _MISSING:
            raise ExtractionError(f"{tx.hash_hex}: {path.render()} not present")
        raw[role] = v
    d = canonical_address(raw["D"])
    if d is None:
        raise ExtractionError(f"{tx.hash_hex}: destination {raw['D']!r} is not an address")
    c = params.resolve_chain(raw["C"])
    if c is None:
        raise ExtractionError(f"{tx.hash_hex}: chain {raw['C']!r} is not an integer")
    t = params.canonical_token(tx.chain, raw["T"])
    if t is None:
        raise ExtractionError(f"{tx.hash_hex}: token {raw['T']!r} not recognised")
    if value_kind(raw["A"]) != "uint" or value_kind(raw["Ts"]) != "uint":
        raise ExtractionError(f"{tx.hash_hex}: amount/timestamp are not integers")
    return Identifier(d, c, t, raw["A"], raw["Ts"], tx.side, tx.chain, tx.hash_hex)


def extract_all(
    txs: Iterable[TransactionInstance],
    quintuples: Mapping[str, Quintuple],
    params: PairingParams,
    diagnostics: list[str] | None = None,
) -> list[Identifier]:
    """Identifiers for every transaction whose category has a quintuple."""
    out = []
    skipped = 0
    for tx in txs:
        qt = quintuples.get(tx.category_key)
        if qt is None:
            skipped += 1
            continue
        try:
            out.append(extract_identifier(tx, qt, params))
        except ExtractionError as exc:
            if diagnostics is not None:
                diagnostics.append(str(exc))
    if skipped and diagnostics is not None:
        diagnostics.append(f"{skipped} transactions in categories without a quintuple")
    return out


def match_pair(id_s: Identifier, id_d: Identifier, params: PairingParams) -> tuple[bool, list[dict]]:
    """Evaluate the six pairing rules; returns the verdict and a per-rule trace."""
    trace = []
    ok1 = id_s.side is Side.SOURCE and id_d.side is Side.DESTINATION
    trace.append({"rule": "role", "src_side": id_s.side.value, "dst_side": id_d.side.value, "ok": ok1})
    ok2 = id_s.D == id_d.D
    trace.append({"rule": "destination", "src": id_s.D, "dst": id_d.D, "ok": ok2})
    ok3 = id_s.T == id_d.T
    trace.append({"rule": "token", "src": id_s.T, "dst": id_d.T, "ok": ok3})
    if id_s.A == 0:
        ok4, ratio = False, None
        trace.append({"rule": "amount", "src": str(id_s.A), "dst": str(id_d.A), "ratio": None, "ok": False,
                      "note": "source amount is zero"})
    else:
        ratio = Fraction(abs(id_s.A - id_d.A), id_s.A)
        ok4 = ratio <= params.fee_fraction
        trace.append({"rule": "amount", "src": str(id_s.A), "dst": str(id_d.A), "ratio": float(ratio), "ok": ok4})
    ok5 = id_d.own_chain == id_s.C and id_s.own_chain == id_d.C
    trace.append(
        {"rule": "chain", "src_chain": id_s.own_chain, "src_counterpart": id_s.C, "dst_chain": id_d.own_chain,
         "dst_counterpart": id_d.C, "ok": ok5}
    )
    gap = abs(id_s.Ts - id_d.Ts)
    ok6 = gap <= params.timewindow
    trace.append({"rule": "timestamp", "gap": gap, "timewindow": params.timewindow, "ok": ok6})
    return all(r["ok"] for r in trace), trace


def rules_hold(id_s: Identifier, id_d: Identifier, params: PairingParams) -> bool:
    """Fast boolean form of :func:`match_pair`."""
    return (
        id_s.side is Side.SOURCE
        and id_d.side is Side.DESTINATION
        and id_s.D == id_d.D
        and id_s.T == id_d.T
        and id_s.A != 0
        and Fraction(abs(id_s.A - id_d.A), id_s.A) <= params.fee_fraction
        and id_d.own_chain == id_s.C
        and id_s.own_chain == id_d.C
        and abs(id_s.Ts - id_d.Ts) <= params.timewindow
    )


def _pair_values(id_s: Identifier, id_d: Identifier) -> dict:
    return {
        "D": id_s.D,
        "C": id_s.C,
        "T": id_s.T,
        "A_s": str(id_s.A),
        "A_d": str(id_d.A),
        "Ts_s": id_s.Ts,
        "Ts_d": id_d.Ts,
    }


def pair_identifiers(
    sources: Sequence[Identifier],
    destinations: Sequence[Identifier],
    params: PairingParams,
    *,
    consume: bool = True,
) -> list[Pair]:
    """Greedy pairing: sources in ascending (Ts, hash) order take the earliest valid destination.

    Destinations are looked up in an index keyed by (token, destination
    address, chain) and bucketed by time with bucket width ``timewindow``.
    With ``consume`` a destination serves at most one source.
    """
    tw = params.timewindow
    index: dict[tuple, dict[int, list[Identifier]]] = defaultdict(lambda: defaultdict(list))
    for d in destinations:
        index[(d.T, d.D, d.own_chain)][d.Ts // tw].append(d)

    used: set[tuple[int, str]] = set()
    pairs = []
    for s in sorted(sources, key=lambda i: (i.Ts, i.tx_hash)):
        buckets = index.get((s.T, s.D, s.C))
        if not buckets:
            continue
        b = s.Ts // tw
        best = None
        for cand in (*buckets.get(b - 1, ()), *buckets.get(b, ()), *buckets.get(b + 1, ())):
            if consume and cand.ref in used:
                continue
            if not rules_hold(s, cand, params):
                continue
            if best is None or (cand.Ts, cand.tx_hash) < (best.Ts, best.tx_hash):
                best = cand
        if best is None:
            continue
        if consume:
            used.add(best.ref)
        _, trace = match_pair(s, best, params)
        pairs.append(Pair(s.ref, best.ref, _pair_values(s, best), tuple(trace)))
    pairs.sort(key=lambda p: (p.values["Ts_s"], p.src_ref[1]))
    return pairs


def pair_all(
    tx_s: Iterable[TransactionInstance],
    tx_d: Iterable[TransactionInstance],
    qt_s: Mapping[str, Quintuple],
    qt_d: Mapping[str, Quintuple],
    params: PairingParams,
    *,
    consume: bool = True,
    diagnostics: list[str] | None = None,
) -> list[Pair]:
    sources = extract_all(tx_s, qt_s, params, diagnostics)
    dests = extract_all(tx_d, qt_d, params, diagnostics)
    return pair_identifiers(sources, dests, params, consume=consume)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    n_pred: int = 0
    n_true: int = 0

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "n_pred": self.n_pred,
            "n_true": self.n_true,
        }


def _hash_pairs(pairs: Iterable) -> set[tuple[str, str]]:
    out = set()
    for p in pairs:
        if isinstance(p, Pair):
            out.add((p.src_ref[1].lower(), p.dst_ref[1].lower()))
        else:
            s, d = p
            out.add((str(s).lower(), str(d).lower()))
    return out


def score(pairs: Iterable, truth: Iterable) -> Scores:
    """Precision, recall and F1 of predicted (src_hash, dst_hash) pairs; zero when undefined."""
    pred, gold = _hash_pairs(pairs), _hash_pairs(truth)
    tp = len(pred & gold)
    p = tp / len(pred) if pred else 0.0
    r = tp / len(gold) if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return Scores(p, r, f1, tp, len(pred), len(gold))
