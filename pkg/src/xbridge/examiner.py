"""Candidate quintuple examination.

For every category the examiner keeps only candidate fields whose values are
borne out by evidence: amount/token pairs must match an asset flow of the
transaction itself, and destination/chain/timestamp triples must locate a
counterpart transaction that carries the same destination address. Roles left
with several fields are then refined by consistency and uniqueness.
"""

from __future__ import annotations

import bisect
import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .model import (
    NATIVE,
    ROLES,
    Address,
    CandidateQuintuple,
    Category,
    FieldPath,
    PairingParams,
    Quintuple,
    Side,
    TransactionInstance,
    canonical_address,
    resolve,
    value_kind,
)

logger = logging.getLogger(__name__)

ZERO = Address(b"\x00" * 20)
_MISSING = object()


@dataclass(frozen=True)
class AssetFlow:
    direction: str
    token: str
    amount: int

    def __post_init__(self):
        if self.direction not in ("inflow", "outflow"):
            raise ValueError(f"bad flow direction {self.direction!r}")
        if self.amount <= 0:
            raise ValueError("flow amount must be positive")


def _erc20_transfer(entry) -> tuple[Any, Any, int] | None:
    if entry.event != "Transfer" or entry.schema != "(address,address,uint256)":
        return None
    src, dst, amount = entry.args.values()
    return src, dst, amount


def analyze_asset_flow(tx: TransactionInstance, perspective: Side | None = None) -> set[AssetFlow]:
    """Token movements of ``tx`` relative to the party that moves the asset.

    On the source side that party is the transaction sender (the user). On
    the destination side a relayer usually sends the transaction, so flows
    are taken relative to the bridge contract, with mints (transfers from the
    zero address) counted as the contract paying out.
    """
    side = perspective or tx.side
    flows = set()
    if tx.native_value > 0:
        flows.add(AssetFlow("outflow", NATIVE, tx.native_value))
    for entry in tx.logs:
        t = _erc20_transfer(entry)
        if t is None:
            continue
        src, dst, amount = t
        if amount <= 0:
            continue
        token = str(entry.address)
        if side is Side.SOURCE:
            if src == tx.sender:
                flows.add(AssetFlow("outflow", token, amount))
            elif dst == tx.sender:
                flows.add(AssetFlow("inflow", token, amount))
        else:
            if src == tx.contract or src == ZERO:
                flows.add(AssetFlow("outflow", token, amount))
            elif dst == tx.contract:
                flows.add(AssetFlow("inflow", token, amount))
    return flows


def flow_match(flows: Iterable[AssetFlow], amount: Any, token: Any, chain: int, params: PairingParams) -> bool:
    if value_kind(amount) != "uint" or amount <= 0:
        return False
    want = params.canonical_token(chain, token)
    if want is None:
        return False
    for f in flows:
        if f.amount == amount and params.canonical_token(chain, f.token) == want:
            return True
    return False


def check_consistency(txs: Iterable[TransactionInstance], fields: Sequence[FieldPath]) -> bool:
    """True iff every transaction yields one and the same value across ``fields``."""
    if len(fields) < 2:
        raise ValueError("consistency needs at least two fields")
    for tx in txs:
        first = resolve(tx, fields[0], _MISSING)
        for f in fields[1:]:
            if resolve(tx, f, _MISSING) != first:
                return False
    return True


def is_unique(txs: Iterable[TransactionInstance], path: FieldPath) -> bool:
    """True iff the field does not hold a single constant value over ``txs``."""
    values = set()
    for tx in txs:
        v = resolve(tx, path, _MISSING)
        values.add(v if v is not _MISSING else None)
    return len(values) != 1


# ---------------------------------------------------------------------------
# counterpart lookup


class CounterpartIndex:
    """Time-sorted counterpart transactions per chain with their destination values."""

    def __init__(
        self,
        txs: Sequence[TransactionInstance],
        d_candidates: Mapping[str, Sequence[FieldPath]],
    ):
        self.by_chain: dict[int, tuple[list[int], list[frozenset[str]]]] = {}
        self.fallbacks = 0
        rows: dict[int, list[tuple[int, bytes, frozenset[str]]]] = {}
        for tx in txs:
            paths = d_candidates.get(tx.category_key)
            if paths is None:
                self.fallbacks += 1
                paths = [p for p, v in tx.leaf_map.items() if value_kind(v) in ("address", "text")]
            values = set()
            for p in paths:
                addr = canonical_address(resolve(tx, p))
                if addr is not None:
                    values.add(addr)
            rows.setdefault(tx.chain, []).append((tx.timestamp, tx.tx_hash, frozenset(values)))
        for chain, items in rows.items():
            items.sort()
            self.by_chain[chain] = ([t for t, _, _ in items], [v for _, _, v in items])

    def d_values(self, chain: int | None, ts: int, timewindow: int, direction: str) -> set[str]:
        """Union of destination values of transactions located by chain and time."""
        if chain is None or chain not in self.by_chain:
            return set()
        times, values = self.by_chain[chain]
        lo = ts - timewindow if direction in ("backward", "symmetric") else ts
        hi = ts + timewindow if direction in ("forward", "symmetric") else ts
        i, j = bisect.bisect_left(times, lo), bisect.bisect_right(times, hi)
        out: set[str] = set()
        for v in values[i:j]:
            out |= v
        return out

    def count(self, chain: int | None, ts: int, timewindow: int, direction: str) -> int:
        if chain is None or chain not in self.by_chain:
            return 0
        times, _ = self.by_chain[chain]
        lo = ts - timewindow if direction in ("backward", "symmetric") else ts
        hi = ts + timewindow if direction in ("forward", "symmetric") else ts
        return bisect.bisect_right(times, hi) - bisect.bisect_left(times, lo)


def find_by_chain_timestamp(
    txs: Sequence[TransactionInstance],
    chain_value: Any,
    ts: Any,
    params: PairingParams,
    direction: str = "forward",
) -> list[TransactionInstance]:
    """Counterpart transactions on the chain named by ``chain_value`` within the time window."""
    chain = params.resolve_chain(chain_value)
    if chain is None or value_kind(ts) != "uint":
        return []
    tw = params.timewindow
    lo = ts - tw if direction in ("backward", "symmetric") else ts
    hi = ts + tw if direction in ("forward", "symmetric") else ts
    return [tx for tx in txs if tx.chain == chain and lo <= tx.timestamp <= hi]


# ---------------------------------------------------------------------------
# examination


@dataclass
class CategoryExamination:
    key: str
    side: Side
    size: int
    quintuple: Quintuple | None = None
    reason: str | None = None
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    survivors: dict[str, list[str]] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.quintuple is not None

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "side": self.side.value,
            "size": self.size,
            "quintuple": self.quintuple.to_dict() if self.quintuple else None,
            "reason": self.reason,
            "counts": self.counts,
            "survivors": self.survivors,
            "diagnostics": self.diagnostics,
        }


@dataclass
class ExaminationReport:
    categories: dict[str, CategoryExamination] = field(default_factory=dict)

    @property
    def quintuples(self) -> dict[str, Quintuple]:
        return {k: c.quintuple for k, c in self.categories.items() if c.quintuple is not None}

    @property
    def n_survivors(self) -> int:
        return len(self.quintuples)

    def to_dict(self) -> dict:
        return {"categories": [c.to_dict() for c in self.categories.values()]}


def phase1_filter(
    tx: TransactionInstance,
    a_paths: Sequence[FieldPath],
    t_paths: Sequence[FieldPath],
    params: PairingParams,
    flows: set[AssetFlow] | None = None,
) -> set[tuple[FieldPath, FieldPath]]:
    """(amount, token) field pairs whose values match one asset flow of ``tx``."""
    flows = analyze_asset_flow(tx) if flows is None else flows
    kept = set()
    for fa, ft in itertools.product(a_paths, t_paths):
        va, vt = resolve(tx, fa, _MISSING), resolve(tx, ft, _MISSING)
        if va is _MISSING or vt is _MISSING:
            continue
        if flow_match(flows, va, vt, tx.chain, params):
            kept.add((fa, ft))
    return kept


def phase2_match(
    tx: TransactionInstance,
    d_paths: Sequence[FieldPath],
    c_paths: Sequence[FieldPath],
    ts_paths: Sequence[FieldPath],
    index: CounterpartIndex,
    params: PairingParams,
    direction: str = "forward",
) -> set[tuple[FieldPath, FieldPath, FieldPath]]:
    """(destination, chain, timestamp) triples that locate a counterpart with the same destination."""
    d_vals = {}
    for fd in d_paths:
        addr = canonical_address(resolve(tx, fd))
        if addr is not None:
            d_vals[fd] = addr
    if not d_vals:
        return set()
    kept = set()
    for fc, fts in itertools.product(c_paths, ts_paths):
        vc, vts = resolve(tx, fc, _MISSING), resolve(tx, fts, _MISSING)
        if vc is _MISSING or vts is _MISSING or value_kind(vts) != "uint":
            continue
        chain = params.resolve_chain(vc)
        found = index.d_values(chain, vts, params.timewindow, direction)
        if not found:
            continue
        for fd, addr in d_vals.items():
            if addr in found:
                kept.add((fd, fc, fts))
    return kept


def _validation_sample(members: Sequence[TransactionInstance], n: int, seed: int, key: str) -> list:
    ordered = sorted(members, key=lambda tx: (tx.timestamp, tx.tx_hash))
    if n <= 0 or len(ordered) <= n:
        return ordered
    rng = random.Random(f"{seed}:{key}")
    return [ordered[i] for i in sorted(rng.sample(range(len(ordered)), n))]


def _refine(
    role: str,
    fields: list[FieldPath],
    members: Sequence[TransactionInstance],
    cq: CandidateQuintuple,
    report: CategoryExamination,
) -> FieldPath | None:
    if len(fields) == 1:
        return fields[0]
    by_name = sorted(fields, key=lambda p: p.render())
    if check_consistency(members, by_name):
        return by_name[0]
    kept = [f for f in by_name if is_unique(members, f)]
    removed = [f.render() for f in by_name if f not in kept]
    if removed:
        report.diagnostics.append(f"{role}: removed constant fields {removed}")
    if not kept:
        return None
    if len(kept) == 1:
        return kept[0]
    if check_consistency(members, kept):
        return kept[0]
    best = max(kept, key=lambda p: (cq.confidence(role, p), [-ord(ch) for ch in p.render()]))
    report.diagnostics.append(f"{role}: {len(kept)} inconsistent fields survive, chose {best.render()}")
    return best


def examine_category(
    cat: Category,
    cq: CandidateQuintuple,
    index: CounterpartIndex,
    params: PairingParams,
    *,
    direction: str = "forward",
    validation_sample: int = 200,
    seed: int = 0,
) -> CategoryExamination:
    side = cat.side or (cat.members[0].side if cat.members else Side.SOURCE)
    rep = CategoryExamination(cat.key, side, len(cat.members))
    rep.counts["candidates"] = {r: len(cq.paths(r)) for r in ROLES}
    if cq.uninferable or not cq.complete:
        rep.reason = "uninferable"
        return rep
    if len(cat.members) == 1:
        rep.diagnostics.append("singleton category: uniqueness cannot hold for any field")

    sample = _validation_sample(cat.members, validation_sample, seed, cat.key)
    at_ok: set[tuple[FieldPath, FieldPath]] = set()
    dcts_ok: set[tuple[FieldPath, FieldPath, FieldPath]] = set()
    a_paths, t_paths = cq.paths("A"), cq.paths("T")
    d_paths, c_paths, ts_paths = cq.paths("D"), cq.paths("C"), cq.paths("Ts")
    for tx in sample:
        flows = analyze_asset_flow(tx, side)
        at_ok |= phase1_filter(tx, a_paths, t_paths, params, flows)
        dcts_ok |= phase2_match(tx, d_paths, c_paths, ts_paths, index, params, direction)

    role_sets = {
        "A": {a for a, _ in at_ok},
        "T": {t for _, t in at_ok},
        "D": {d for d, _, _ in dcts_ok},
        "C": {c for _, c, _ in dcts_ok},
        "Ts": {s for _, _, s in dcts_ok},
    }
    rep.counts["phase1"] = {"A": len(role_sets["A"]), "T": len(role_sets["T"])}
    rep.counts["phase2"] = {r: len(role_sets[r]) for r in ("D", "C", "Ts")}
    rep.survivors = {r: sorted(p.render() for p in role_sets[r]) for r in ROLES}
    if not at_ok:
        rep.reason = "phase1-empty"
        return rep
    if not dcts_ok:
        rep.reason = "phase2-empty"
        return rep

    chosen = {}
    for role in ROLES:
        pick = _refine(role, sorted(role_sets[role]), cat.members, cq, rep)
        if pick is None:
            rep.reason = f"phase3-empty:{role}"
            rep.counts["phase3"] = {r: int(r in chosen) for r in ROLES}
            return rep
        chosen[role] = pick
    rep.counts["phase3"] = {r: 1 for r in ROLES}

    missing = [tx.hash_hex for tx in cat.members if any(resolve(tx, p, _MISSING) is _MISSING for p in chosen.values())]
    if missing:
        rep.reason = f"unresolvable in {len(missing)} members"
        return rep
    rep.quintuple = Quintuple(**chosen)
    return rep


def examine(
    candidates: Mapping[str, CandidateQuintuple],
    categories: Sequence[Category],
    counterpart: Sequence[TransactionInstance],
    counterpart_d: Mapping[str, Sequence[FieldPath]],
    params: PairingParams,
    *,
    side: Side = Side.SOURCE,
    symmetric: bool = False,
    validation_sample: int = 200,
    seed: int = 0,
) -> ExaminationReport:
    """Examine every category of one side against the counterpart dataset.

    ``counterpart_d`` maps counterpart category keys to their destination
    candidate fields. Destination-side examination looks backwards in time.
    """
    direction = "symmetric" if symmetric else ("forward" if side is Side.SOURCE else "backward")
    index = CounterpartIndex(counterpart, counterpart_d)
    report = ExaminationReport()
    for cat in sorted(categories, key=lambda c: c.key):
        cq = candidates.get(cat.key)
        if cq is None:
            rep = CategoryExamination(cat.key, side, len(cat.members), reason="no-candidates")
        else:
            rep = examine_category(
                cat, cq, index, params, direction=direction, validation_sample=validation_sample, seed=seed
            )
        if index.fallbacks:
            rep.diagnostics.append(f"{index.fallbacks} counterpart txs used address fields as destination candidates")
        report.categories[cat.key] = rep
    return report
