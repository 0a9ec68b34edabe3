"""Synthetic two-chain bridge datasets with known pairs and identifier fields.

Every generated transaction is byte-encoded with the ABI codec and decoded
back, so the resulting instances look exactly like decoded chain data. Each
bridge route gives one category on each side. Routes receive random filler
fields up to the configured size, and optionally decoy fields whose names
collide with the role lexicon but whose values carry no cross-chain meaning.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .abi import (
    AbiRegistry,
    AbiType,
    ArrayType,
    EventDescriptor,
    FunctionDescriptor,
    TupleType,
    decode_instance,
    encode_call,
    encode_log,
    keccak256,
    parse_type,
)
from .io import save_instances, save_truth_pairs, write_jsonl
from .model import NATIVE, ROLES, Address, PairingParams, Side, TIMESTAMP_PATH, TransactionInstance

T0 = 1_700_000_000
ZERO = Address(b"\x00" * 20)
ERC20_TRANSFER = EventDescriptor(
    "Transfer",
    (("from", parse_type("address")), ("to", parse_type("address")), ("value", parse_type("uint256"))),
    (True, True, False),
)

# Words free of role-lexicon terms, used for filler names.
FILLER_WORDS = (
    "nonce", "salt", "flags", "version", "slot", "epoch", "gas", "limit", "ref", "code", "payload", "extra",
    "data", "hash", "root", "proof", "status", "mode", "kind", "route", "pool", "fee", "bps", "ratio", "score",
    "level", "count", "offset", "round", "batch", "ticket", "label", "tag", "seq", "vault", "hook", "auth",
    "hint", "bonus", "tier", "relay", "memo", "nonce", "config", "quote", "credit", "weight", "bucket", "lane",
)
FILLER_EVENTS = (
    "Sync", "Approval", "FeeCollected", "MessageSent", "PacketSent", "Executed", "Checkpoint", "Heartbeat",
    "QuotePosted", "CreditUpdated", "PoolSynced", "VaultRebalanced",
)
FILLER_TYPES = (
    "uint256", "uint256", "uint64", "uint32", "uint8", "address", "bytes32", "bool", "bytes", "string", "uint256[]",
)

SRC_FUNCTIONS = ("deposit", "lock", "send", "bridge", "dispatch", "initiate", "enter", "createOrder")
DST_FUNCTIONS = ("release", "claim", "fill", "settle", "finalize", "execute", "redeem", "unlock")
SRC_EVENTS = ("Deposited", "Locked", "Sent", "BridgeOut", "Dispatched", "Initiated", "Entered", "OrderCreated")
DST_EVENTS = ("Released", "Claimed", "Filled", "Settled", "Finalized", "Executed", "Redeemed", "Unlocked")
STRUCT_NAMES = ("order", "params", "request", "payload")

# Truth-field names per side and role; the same names may repeat across routes.
TRUTH_NAMES = {
    Side.SOURCE: {
        "D": ("recipient", "receiver", "receiverDst", "beneficiary"),
        "C": ("dstChainId", "destinationChain", "targetChain", "chainIdDst"),
        "T": ("token", "srcToken", "inputAsset", "asset"),
        "A": ("amount", "amountIn", "inputAmount", "quantity"),
    },
    Side.DESTINATION: {
        "D": ("recipient", "receiver", "beneficiary", "to"),
        "C": ("srcChainId", "sourceChain", "originChain", "fromChainId"),
        "T": ("token", "tokenOut", "outputAsset", "asset"),
        "A": ("amount", "amountOut", "outputAmount", "quantity"),
    },
}
# Event copies of truth values; always one word longer than the decoy names.
MIRROR_NAMES = {"D": "finalRecipient", "T": "bridgedToken", "A": "bridgedAmount", "C": "peerChain", "Ts": "blockTimestamp"}
DECOY_EVENT = "Refund"
DECOY_NAMES = {"D": "recipient", "T": "token", "A": "amount", "C": "chain"}
DECOY_DEADLINE = "deadline"

TOKENS = ("USDC", "USDT", "DAI", "WBTC", "LINK")


class ScenarioError(ValueError):
    """Contradictory scenario configuration."""


@dataclass
class ScenarioConfig:
    seed: int = 0
    n_transfers: int = 1000
    src_chain: int = 1
    dst_chain: int = 56
    chain_alias: dict[int, int] = field(default_factory=lambda: {101: 1, 102: 56})
    n_categories: int = 4
    fields_per_category: tuple[int, int] = (24, 40)
    logs_per_category: tuple[int, int] = (3, 5)
    decoy_field_rate: float = 0.0
    decoy_tx_rate: float = 0.0
    fee_max: float = 0.1
    delay: tuple[int, int] = (120, 1800)
    late_fraction: float = 0.0
    late_delay: tuple[int, int] = (10_000, 20_000)
    inter_arrival: int = 60
    tokens: tuple[str, ...] = TOKENS
    native_rate: float = 0.25

    def __post_init__(self):
        self.fields_per_category = tuple(self.fields_per_category)
        self.logs_per_category = tuple(self.logs_per_category)
        self.delay = tuple(self.delay)
        self.late_delay = tuple(self.late_delay)
        self.tokens = tuple(self.tokens)
        self.chain_alias = {int(k): int(v) for k, v in self.chain_alias.items()}
        for name in ("decoy_field_rate", "decoy_tx_rate", "late_fraction", "native_rate", "fee_max"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ScenarioError(f"{name} must lie in [0, 1], got {v}")
        if self.n_transfers < 0:
            raise ScenarioError("n_transfers must be non-negative")
        if self.n_categories < 1:
            raise ScenarioError("n_categories must be at least 1")
        if self.n_categories > len(SRC_FUNCTIONS):
            raise ScenarioError(f"at most {len(SRC_FUNCTIONS)} categories per side are supported")
        lo, hi = self.fields_per_category
        if lo < 5 or hi < lo:
            raise ScenarioError(f"fields_per_category must be an interval with lower bound >= 5, got {lo}..{hi}")
        lo, hi = self.logs_per_category
        if lo < 1 or hi < lo:
            raise ScenarioError("logs_per_category must be an interval with lower bound >= 1")
        for name in ("delay", "late_delay"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ScenarioError(f"{name} must be an interval of positive seconds")
        if self.inter_arrival < 1:
            raise ScenarioError("inter_arrival must be positive")
        if not self.tokens:
            raise ScenarioError("token set is empty")
        if self.src_chain == self.dst_chain:
            raise ScenarioError("source and destination chains must differ")
        for internal, canon in self.chain_alias.items():
            if canon not in (self.src_chain, self.dst_chain):
                raise ScenarioError(f"alias {internal}->{canon} names an unknown chain")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["chain_alias"] = {str(k): v for k, v in self.chain_alias.items()}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)


def clean_config(seed: int = 1, n_transfers: int = 5000) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, n_transfers=n_transfers, delay=(120, 1800), fee_max=0.1)


def decoy_config(seed: int = 1, n_transfers: int = 5000, fields: tuple[int, int] = (40, 80)) -> ScenarioConfig:
    return ScenarioConfig(
        seed=seed,
        n_transfers=n_transfers,
        fields_per_category=fields,
        logs_per_category=(4, 7),
        decoy_field_rate=0.5,
        decoy_tx_rate=0.2,
        # busy-bridge traffic: about 170k transfers in 10 days
        inter_arrival=5,
    )


def motivating_config(seed: int = 1, n_transfers: int = 200) -> ScenarioConfig:
    """One category per side with 9 logs and 144 fields, decoys included."""
    return ScenarioConfig(
        seed=seed,
        n_transfers=n_transfers,
        n_categories=1,
        fields_per_category=(144, 144),
        logs_per_category=(9, 9),
        decoy_field_rate=1.0,
        native_rate=0.0,
    )


# ---------------------------------------------------------------------------
# category layout


@dataclass
class _Slot:
    """One leaf in a record: a role value, a mirror, a decoy or filler."""

    name: str
    type: AbiType
    source: str  # role name, "mirror:<role>", "decoy:<role>", "deadline", "id" or "filler"
    constant: Any = None


@dataclass
class CategoryLayout:
    route: int
    side: Side
    native: bool
    decoy: bool
    function: FunctionDescriptor
    call_slots: list  # list of _Slot or (struct_name, list[_Slot])
    events: list  # list of (EventDescriptor, list[_Slot]) in emission order; Transfer appears as None slots
    truth: dict[str, list[str]]
    n_fields: int

    def abi(self) -> list[dict]:
        out = [self.function.to_json()]
        seen = set()
        for ev, _ in self.events:
            if ev.signature not in seen:
                seen.add(ev.signature)
                out.append(ev.to_json())
        return out


def _filler_type(rng: random.Random) -> AbiType:
    return parse_type(rng.choice(FILLER_TYPES))


class _Names:
    def __init__(self, rng: random.Random, taken: Iterable[str] = ()):
        self.rng = rng
        self.taken = set(taken)

    def fresh(self) -> str:
        while True:
            a, b = self.rng.sample(FILLER_WORDS, 2)
            name = a + b[0].upper() + b[1:]
            if name not in self.taken:
                self.taken.add(name)
                return name


def _count_leaves(slots) -> int:
    n = 0
    for s in slots:
        n += len(s[1]) if isinstance(s, tuple) else 1
    return n


def _design(
    rng: random.Random,
    route: int,
    side: Side,
    n_fields: int,
    n_logs: int,
    *,
    native: bool,
    decoy: bool,
    d_bytes32: bool,
) -> CategoryLayout:
    names = TRUTH_NAMES[side]
    fn_name = (SRC_FUNCTIONS if side is Side.SOURCE else DST_FUNCTIONS)[route]
    ev_name = (SRC_EVENTS if side is Side.SOURCE else DST_EVENTS)[route]
    addr, u256 = parse_type("address"), parse_type("uint256")
    chain_t = parse_type(rng.choice(("uint256", "uint64", "uint32")))
    role_slots = [
        _Slot(rng.choice(names["D"]), parse_type("bytes32") if d_bytes32 else addr, "D"),
        _Slot(rng.choice(names["C"]), chain_t, "C"),
        _Slot(rng.choice(names["T"]), addr, "T"),
        _Slot(rng.choice(names["A"]), u256, "A"),
    ]
    if len({s.name for s in role_slots}) < 4:
        raise AssertionError("truth names collide")
    struct = rng.choice(STRUCT_NAMES) if rng.random() < 0.5 else None

    # the asset-moving Transfer: source ERC-20 routes pull from the user, every destination route pays out
    has_transfer = side is Side.DESTINATION or not native
    mirrors = [r for r in ("D", "A", "T", "Ts") if rng.random() < 0.5]
    main_slots = [_Slot("transferId", parse_type("bytes32"), "id")]
    for r in mirrors:
        t = {"D": addr, "A": u256, "T": addr, "Ts": u256}[r]
        if r == "D" and d_bytes32:
            t = parse_type("bytes32")
        main_slots.append(_Slot(MIRROR_NAMES[r], t, f"mirror:{r}"))
    main_ev = EventDescriptor(ev_name, tuple((s.name, s.type) for s in main_slots), (True,) + (False,) * (len(main_slots) - 1))

    decoy_slots = []
    extra_call = []
    if decoy:
        decoy_slots = [
            _Slot(DECOY_NAMES["D"], addr, "decoy:D"),
            _Slot(DECOY_NAMES["T"], addr, "decoy:T"),
            _Slot(DECOY_NAMES["A"], u256, "decoy:A"),
            _Slot(DECOY_NAMES["C"], u256, "decoy:C"),
        ]
        extra_call.append(_Slot(DECOY_DEADLINE, u256, "deadline", constant=T0 + 10**8 + rng.randrange(10**6)))

    req_logs = 1 + int(has_transfer) + int(decoy)
    n_filler_events = n_logs - req_logs
    required = 4 + len(role_slots) + len(extra_call) + len(main_slots) + 3 * has_transfer + len(decoy_slots)
    required += max(n_filler_events, 0)
    if n_filler_events < 0 or n_fields < required:
        raise ScenarioError(
            f"route {route} {side.value}: needs at least {max(required, 0)} fields and {req_logs} logs, "
            f"configured {n_fields} fields and {n_logs} logs"
        )

    # spread the remaining filler leaves over the call, the struct and filler events
    spare = n_fields - required
    ev_sizes = [1] * n_filler_events
    call_extra = 0
    for _ in range(spare):
        if ev_sizes and rng.random() < 0.5:
            ev_sizes[rng.randrange(len(ev_sizes))] += 1
        else:
            call_extra += 1

    call_names = _Names(rng, [s.name for s in role_slots + extra_call])
    fillers = [_Slot(call_names.fresh(), _filler_type(rng), "filler") for _ in range(call_extra)]
    if struct:
        inner = role_slots + fillers[: len(fillers) // 2]
        rng.shuffle(inner)
        outer = fillers[len(fillers) // 2 :] + extra_call
        call_slots = [(struct, inner)] + outer
        rng.shuffle(call_slots)
    else:
        call_slots = role_slots + fillers + extra_call
        rng.shuffle(call_slots)

    inputs = []
    for s in call_slots:
        if isinstance(s, tuple):
            inputs.append((s[0], TupleType(tuple((c.name, c.type) for c in s[1]))))
        else:
            inputs.append((s.name, s.type))
    function = FunctionDescriptor(fn_name, tuple(inputs))

    events: list = [(main_ev, main_slots)]
    if has_transfer:
        events.append((ERC20_TRANSFER, None))
    if decoy:
        events.append((EventDescriptor(DECOY_EVENT, tuple((s.name, s.type) for s in decoy_slots)), decoy_slots))
    # filler events may repeat a previous filler event with the same layout
    made: list = []
    for size in ev_sizes:
        reuse = [m for m in made if len(m[1]) == size]
        if reuse and rng.random() < 0.3:
            events.append(rng.choice(reuse))
            continue
        ev_names = _Names(rng)
        slots = [_Slot(ev_names.fresh(), _filler_type(rng), "filler") for _ in range(size)]
        taken = {e.name for e, _ in events} | {e.name for e, _ in made}
        pool = [n for n in FILLER_EVENTS if n not in taken] or [f"Aux{len(made)}"]
        name = rng.choice(pool)
        idx = tuple(rng.random() < 0.3 and not s.type.is_dynamic for s in slots)
        ev = EventDescriptor(name, tuple((s.name, s.type) for s in slots), idx)
        made.append((ev, slots))
        events.append((ev, slots))
    head, tail = events[:1], events[1:]
    rng.shuffle(tail)
    events = head + tail

    # equivalent truth paths: the call field first, then copies carrying identical values
    def call_path(slot_name):
        return f"transaction[{fn_name}].{struct}.{slot_name}" if struct else f"transaction[{fn_name}].{slot_name}"

    labels = _event_labels([e for e, _ in events])
    main_label = labels[0]
    truth = {r: [call_path(next(s.name for s in role_slots if s.source == r))] for r in ("D", "C", "T", "A")}
    truth["Ts"] = [TIMESTAMP_PATH.render()]
    for r in mirrors:
        truth[r].append(f"log[{main_label}].{MIRROR_NAMES[r]}")
    if has_transfer:
        t_label = labels[[e for e, _ in events].index(ERC20_TRANSFER)]
        truth["A"].append(f"log[{t_label}].value")
        if side is Side.DESTINATION and not d_bytes32:
            truth["D"].append(f"log[{t_label}].to")
    if native and side is Side.SOURCE:
        truth["A"].append("transaction.value")

    layout = CategoryLayout(route, side, native, decoy, function, call_slots, events, truth, n_fields)
    return layout


def _event_labels(events: Sequence[EventDescriptor]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for ev in events:
        seen[ev.name] = seen.get(ev.name, 0) + 1
        n = seen[ev.name]
        out.append(ev.name if n == 1 else f"{ev.name}#{n}")
    return out


# ---------------------------------------------------------------------------
# value generation


def _random_value(rng: random.Random, t: AbiType) -> Any:
    if isinstance(t, ArrayType):
        n = t.length if t.length is not None else rng.randint(1, 3)
        return [_random_value(rng, t.elem) for _ in range(n)]
    c = t.canonical()
    if c.startswith("uint"):
        bits = int(c[4:]) if c[4:].isdigit() else 256
        return rng.getrandbits(bits)
    if c == "address":
        return Address(rng.randbytes(20))
    if c == "bool":
        return rng.random() < 0.5
    if c == "bytes32":
        return rng.randbytes(32)
    if c == "bytes":
        return rng.randbytes(rng.randrange(0, 48))
    if c == "string":
        return "-".join(rng.sample(FILLER_WORDS, 2))
    raise ScenarioError(f"no generator for {c}")


def _pad_address(a: Address) -> bytes:
    return b"\x00" * 12 + bytes(a)


@dataclass
class Transfer:
    """Planted values of one bridged transfer (or one unpaired noise transaction)."""

    route: int
    src_hash: str | None
    dst_hash: str | None
    recipient: str
    token: str
    src_token: str
    dst_token: str
    amount_src: int
    amount_dst: int
    ts_src: int | None
    ts_dst: int | None
    src_chain: int
    dst_chain: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["amount_src"] = str(self.amount_src)
        d["amount_dst"] = str(self.amount_dst)
        return d


@dataclass
class Scenario:
    config: ScenarioConfig
    params: PairingParams
    abis: dict[str, list[dict]]
    registry: AbiRegistry
    layouts: dict[Side, list[CategoryLayout]]
    raw_src: list[dict]
    raw_dst: list[dict]
    src: list[TransactionInstance]
    dst: list[TransactionInstance]
    transfers: list[Transfer]
    noise: list[Transfer]
    truth_pairs: set[tuple[str, str]]
    truth_quintuples: dict[Side, dict[str, dict[str, list[str]]]]
    planted: dict[str, tuple[dict | None, list[dict]]] = field(default_factory=dict)

    def truth_for(self, side: Side, key: str) -> dict[str, list[str]] | None:
        return self.truth_quintuples[side].get(key)


def _spread_decoys(rng: random.Random, n_routes: int, rate: float) -> set[tuple[int, Side]]:
    """Pick round(rate * 2n) categories to carry decoys.

    One route is left clean while the budget allows it, so that lexical
    matching has something to get right. The rest of the budget goes first
    to one side of each remaining route, then to the other side.
    """
    n = round(rate * 2 * n_routes)
    order = list(range(n_routes))
    rng.shuffle(order)
    if n <= 2 * (n_routes - 1):
        order = order[:-1]
    first = [(r, Side.SOURCE if i % 2 == 0 else Side.DESTINATION) for i, r in enumerate(order)]
    second = [(r, s.other()) for r, s in first]
    return set((first + second)[:n])


def generate(cfg: ScenarioConfig) -> Scenario:
    """Build a deterministic two-chain dataset from ``cfg``."""
    rng = random.Random(cfg.seed)
    n_routes = cfg.n_categories
    internal = {v: k for k, v in cfg.chain_alias.items()}
    bridge = {Side.SOURCE: Address(rng.randbytes(20)), Side.DESTINATION: Address(rng.randbytes(20))}
    relayer = Address(rng.randbytes(20))
    token_addr = {
        (chain, sym): Address(rng.randbytes(20)) for chain in (cfg.src_chain, cfg.dst_chain) for sym in cfg.tokens
    }
    weth = Address(rng.randbytes(20))
    alias: dict[tuple[int, str], str] = {(c, str(a)): s for (c, s), a in token_addr.items()}
    alias[(cfg.src_chain, NATIVE)] = "ETH"
    alias[(cfg.src_chain, str(ZERO))] = "ETH"
    alias[(cfg.dst_chain, str(weth))] = "ETH"
    params = PairingParams(chain_alias=dict(cfg.chain_alias), token_alias=alias)

    n_native = round(cfg.native_rate * n_routes)
    native_routes = set(rng.sample(range(n_routes), n_native))
    decoyed = _spread_decoys(rng, n_routes, cfg.decoy_field_rate)

    layouts: dict[Side, list[CategoryLayout]] = {Side.SOURCE: [], Side.DESTINATION: []}
    route_info = []
    for r in range(n_routes):
        native = r in native_routes
        tokens = ["ETH"] if native else rng.sample(cfg.tokens, rng.randint(1, min(3, len(cfg.tokens))))
        # chain ids in call data are either canonical or bridge-internal
        use_internal = rng.random() < 0.5
        route_info.append((tokens, use_internal))
        for side in (Side.SOURCE, Side.DESTINATION):
            n_fields = rng.randint(*cfg.fields_per_category)
            n_logs = rng.randint(*cfg.logs_per_category)
            d_bytes32 = side is Side.SOURCE and rng.random() < 0.25
            layouts[side].append(
                _design(
                    rng, r, side, n_fields, n_logs, native=native, decoy=(r, side) in decoyed, d_bytes32=d_bytes32
                )
            )

    registry = AbiRegistry()
    abis: dict[str, list[dict]] = {"ERC20": [ERC20_TRANSFER.to_json()]}
    for side, ls in layouts.items():
        entries = []
        for lay in ls:
            entries.extend(lay.abi())
        abis[f"bridge_{side.value}"] = entries
    for entries in abis.values():
        registry.add_abi(entries)

    def chain_field(chain: int, use_int: bool) -> int:
        return internal.get(chain, chain) if use_int else chain

    def tx_hash(side: Side, i: int) -> bytes:
        return keccak256(f"{cfg.seed}:{side.value}:{i}".encode())

    # planted values
    transfers: list[Transfer] = []
    ts = T0
    for i in range(cfg.n_transfers):
        ts += rng.randint(1, 2 * cfg.inter_arrival - 1)
        r = rng.randrange(n_routes)
        tokens, _ = route_info[r]
        sym = rng.choice(tokens)
        a_src = rng.randint(10**15, 10**21)
        fee = int(a_src * rng.uniform(0, cfg.fee_max))
        if rng.random() < cfg.late_fraction:
            delay = rng.randint(*cfg.late_delay)
        else:
            delay = rng.randint(*cfg.delay)
        transfers.append(
            Transfer(
                r, None, None, str(Address(rng.randbytes(20))), sym,
                str(ZERO) if sym == "ETH" else str(token_addr[(cfg.src_chain, sym)]),
                str(weth) if sym == "ETH" else str(token_addr[(cfg.dst_chain, sym)]),
                a_src, a_src - fee, ts, ts + delay, cfg.src_chain, cfg.dst_chain,
            )
        )
    span = (T0, max(ts, T0 + 1))
    n_noise = round(cfg.decoy_tx_rate * cfg.n_transfers)
    noise: list[Transfer] = []
    for side in (Side.SOURCE, Side.DESTINATION):
        for _ in range(n_noise):
            r = rng.randrange(n_routes)
            sym = rng.choice(route_info[r][0])
            a = rng.randint(10**15, 10**21)
            t = rng.randint(*span) + (cfg.delay[0] if side is Side.DESTINATION else 0)
            noise.append(
                Transfer(
                    r, "" if side is Side.SOURCE else None, "" if side is Side.DESTINATION else None,
                    str(Address(rng.randbytes(20))), sym,
                    str(ZERO) if sym == "ETH" else str(token_addr[(cfg.src_chain, sym)]),
                    str(weth) if sym == "ETH" else str(token_addr[(cfg.dst_chain, sym)]),
                    a, a - int(a * rng.uniform(0, cfg.fee_max)),
                    t if side is Side.SOURCE else None, t if side is Side.DESTINATION else None,
                    cfg.src_chain, cfg.dst_chain,
                )
            )

    # emission
    raw = {Side.SOURCE: [], Side.DESTINATION: []}
    planted: dict[str, tuple[dict | None, list[dict]]] = {}
    counters = {Side.SOURCE: 0, Side.DESTINATION: 0}

    def emit(side: Side, tr: Transfer):
        lay = layouts[side][tr.route]
        use_int = route_info[tr.route][1]
        i = counters[side]
        counters[side] += 1
        h = tx_hash(side, i)
        own = cfg.src_chain if side is Side.SOURCE else cfg.dst_chain
        peer = cfg.dst_chain if side is Side.SOURCE else cfg.src_chain
        ts_ = tr.ts_src if side is Side.SOURCE else tr.ts_dst
        amount = tr.amount_src if side is Side.SOURCE else tr.amount_dst
        token = Address(tr.src_token if side is Side.SOURCE else tr.dst_token)
        recipient = Address(tr.recipient)
        user = Address(rng.randbytes(20)) if side is Side.SOURCE else relayer
        native_value = amount if (side is Side.SOURCE and lay.native) else 0
        role_values = {
            "D": _pad_address(recipient) if _d_is_bytes32(lay) else recipient,
            "C": chain_field(peer, use_int),
            "T": token,
            "A": amount,
            "Ts": ts_,
        }
        decoy_values = {
            "decoy:D": Address(rng.randbytes(20)),
            "decoy:T": Address(rng.randbytes(20)),
            "decoy:A": rng.randint(10**15, 10**21),
            "decoy:C": _decoy_chain(rng, cfg),
        }

        def value_of(slot: _Slot):
            if slot.source in role_values:
                return role_values[slot.source]
            if slot.source.startswith("mirror:"):
                return role_values[slot.source[7:]]
            if slot.source.startswith("decoy:"):
                return decoy_values[slot.source]
            if slot.source == "deadline":
                return slot.constant
            if slot.source == "id":
                return keccak256(h + b"id")
            return _random_value(rng, slot.type)

        call_args: dict = {}
        for s in lay.call_slots:
            if isinstance(s, tuple):
                call_args[s[0]] = {c.name: value_of(c) for c in s[1]}
            else:
                call_args[s.name] = value_of(s)
        logs_raw, logs_planted = [], []
        for ev, slots in lay.events:
            if ev is ERC20_TRANSFER:
                if side is Side.SOURCE:
                    args = {"from": user, "to": bridge[side], "value": amount}
                else:
                    src_addr = ZERO if tr.route % 2 else bridge[side]
                    args = {"from": src_addr, "to": recipient, "value": amount}
                emitter = token
            else:
                args = {s.name: value_of(s) for s in slots}
                emitter = bridge[side]
            topics, data = encode_log(ev, args)
            logs_raw.append({"address": str(emitter), "topics": ["0x" + t.hex() for t in topics], "data": "0x" + data.hex()})
            logs_planted.append({"event": ev.name, "address": str(emitter), "args": args})
        calldata = encode_call(lay.function, call_args)
        block_time = 12 if own == cfg.src_chain else 3
        doc = {
            "chain": own,
            "hash": "0x" + h.hex(),
            "block_number": 18_000_000 + (ts_ - T0) // block_time,
            "timestamp": ts_,
            "from": str(user),
            "to": str(bridge[side]),
            "value": str(native_value),
            "input": "0x" + calldata.hex(),
            "logs": logs_raw,
        }
        raw[side].append(doc)
        planted[doc["hash"]] = (call_args, logs_planted)
        return doc["hash"]

    # emit in timestamp order per side so the datasets read like chain exports
    src_jobs = [(tr.ts_src, 0, tr) for tr in transfers] + [(n.ts_src, 1, n) for n in noise if n.ts_src is not None]
    dst_jobs = [(tr.ts_dst, 0, tr) for tr in transfers] + [(n.ts_dst, 1, n) for n in noise if n.ts_dst is not None]
    for _, _, tr in sorted(src_jobs, key=lambda j: (j[0], j[1], id(j[2]))):
        tr.src_hash = emit(Side.SOURCE, tr)
    for _, _, tr in sorted(dst_jobs, key=lambda j: (j[0], j[1], id(j[2]))):
        tr.dst_hash = emit(Side.DESTINATION, tr)

    decoded = {}
    for side in raw:
        decoded[side] = [decode_instance(doc, doc["logs"], registry, side=side, strict=True) for doc in raw[side]]

    truth_q: dict[Side, dict[str, dict[str, list[str]]]] = {Side.SOURCE: {}, Side.DESTINATION: {}}
    route_of = {}
    for tr in transfers + noise:
        if tr.src_hash:
            route_of[tr.src_hash] = tr.route
        if tr.dst_hash:
            route_of[tr.dst_hash] = tr.route
    for side in decoded:
        for tx in decoded[side]:
            lay = layouts[side][route_of[tx.hash_hex]]
            truth_q[side].setdefault(tx.category_key, lay.truth)

    pairs = {(tr.src_hash, tr.dst_hash) for tr in transfers}
    return Scenario(
        config=cfg,
        params=params,
        abis=abis,
        registry=registry,
        layouts=layouts,
        raw_src=raw[Side.SOURCE],
        raw_dst=raw[Side.DESTINATION],
        src=decoded[Side.SOURCE],
        dst=decoded[Side.DESTINATION],
        transfers=transfers,
        noise=noise,
        truth_pairs=pairs,
        truth_quintuples=truth_q,
        planted=planted,
    )


def _d_is_bytes32(lay: CategoryLayout) -> bool:
    for s in lay.call_slots:
        slots = s[1] if isinstance(s, tuple) else [s]
        for c in slots:
            if c.source == "D":
                return c.type.canonical() == "bytes32"
    return False


def _decoy_chain(rng: random.Random, cfg: ScenarioConfig) -> int:
    taken = {cfg.src_chain, cfg.dst_chain, *cfg.chain_alias}
    while True:
        c = rng.randint(2, 50_000)
        if c not in taken:
            return c


# ---------------------------------------------------------------------------
# analytic oracle


def replay_truth(transfers: Iterable[Transfer], params: PairingParams) -> set[tuple[str, str]]:
    """Truth pairs that satisfy the pairing rules under ``params``, computed from planted values."""
    out = set()
    fee = params.fee_fraction
    for tr in transfers:
        if not tr.src_hash or not tr.dst_hash:
            continue
        if tr.amount_src == 0:
            continue
        if abs(tr.amount_src - tr.amount_dst) * fee.denominator > fee.numerator * tr.amount_src:
            continue
        if abs(tr.ts_src - tr.ts_dst) > params.timewindow:
            continue
        t_s = params.canonical_token(tr.src_chain, tr.src_token)
        t_d = params.canonical_token(tr.dst_chain, tr.dst_token)
        if t_s != t_d:
            continue
        out.add((tr.src_hash, tr.dst_hash))
    return out


# ---------------------------------------------------------------------------
# files


def write_scenario(sc: Scenario, out: str | Path) -> Path:
    """Write raw transactions, ABIs, decoded instances and truth files under ``out``."""
    out = Path(out)
    (out / "abis").mkdir(parents=True, exist_ok=True)
    for name, entries in sc.abis.items():
        (out / "abis" / f"{name}.json").write_text(json.dumps(entries, indent=1))
    write_jsonl(out / "src_raw.jsonl", sc.raw_src)
    write_jsonl(out / "dst_raw.jsonl", sc.raw_dst)
    save_instances(out / "src_instances.jsonl", sc.src)
    save_instances(out / "dst_instances.jsonl", sc.dst)
    save_truth_pairs(out / "truth_pairs.csv", sc.truth_pairs)
    tq = {side.value: sc.truth_quintuples[side] for side in sc.truth_quintuples}
    (out / "truth_quintuples.json").write_text(json.dumps(tq, indent=1, sort_keys=True))
    (out / "params.json").write_text(json.dumps(sc.params.to_dict(), indent=1))
    (out / "scenario.json").write_text(json.dumps(sc.config.to_dict(), indent=1))
    write_jsonl(out / "transfers.jsonl", (t.to_dict() for t in sc.transfers))
    return out


def truth_matches(chosen: dict[str, str], truth: dict[str, list[str]]) -> bool:
    """True iff every chosen path is one of the role's equivalent truth paths."""
    return all(chosen[r] in truth[r] for r in ROLES)
