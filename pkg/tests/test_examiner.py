import pytest

from conftest import log, make_tx
from xbridge.categorize import categorize
from xbridge.examiner import (
    AssetFlow,
    CounterpartIndex,
    analyze_asset_flow,
    check_consistency,
    examine,
    find_by_chain_timestamp,
    flow_match,
    is_unique,
)
from xbridge.inference import LexicalProvider, infer_candidates
from xbridge.model import NATIVE, ROLES, Address, CandidateQuintuple, FieldPath, PairingParams, Side
from xbridge.simulator import ZERO, truth_matches

USER = b"\x01" * 20
BRIDGE = b"\x02" * 20
TOKEN = b"\x09" * 20
SCHEMA = "(address,address,uint256)"


def transfer(frm, to, amount):
    return log("Transfer", {"from": Address(frm), "to": Address(to), "value": amount}, TOKEN, SCHEMA)


def test_source_flows_are_relative_to_sender():
    tx = make_tx(1, value=5, logs=[transfer(USER, BRIDGE, 100), transfer(BRIDGE, USER, 3)])
    assert analyze_asset_flow(tx) == {
        AssetFlow("outflow", NATIVE, 5),
        AssetFlow("outflow", "0x" + TOKEN.hex(), 100),
        AssetFlow("inflow", "0x" + TOKEN.hex(), 3),
    }


def test_destination_flows_are_relative_to_contract_and_count_mints():
    relayer = b"\x07" * 20
    pay = make_tx(1, side=Side.DESTINATION, sender=relayer, logs=[transfer(BRIDGE, USER, 90)])
    mint = make_tx(2, side=Side.DESTINATION, sender=relayer, logs=[transfer(bytes(ZERO), USER, 90)])
    for tx in (pay, mint):
        assert analyze_asset_flow(tx) == {AssetFlow("outflow", "0x" + TOKEN.hex(), 90)}


def test_non_standard_transfer_schema_is_ignored():
    odd = log("Transfer", {"from": Address(USER), "to": Address(BRIDGE), "value": 1}, TOKEN, "(address,address,uint128)")
    assert analyze_asset_flow(make_tx(1, logs=[odd])) == set()


def test_flow_validation():
    with pytest.raises(ValueError):
        AssetFlow("sideways", NATIVE, 1)
    with pytest.raises(ValueError):
        AssetFlow("inflow", NATIVE, 0)
    flows = {AssetFlow("outflow", "0x" + TOKEN.hex(), 100)}
    params = PairingParams(token_alias={(1, "0x" + TOKEN.hex()): "USDC"})
    assert flow_match(flows, 100, Address(TOKEN), 1, params)
    assert not flow_match(flows, 99, Address(TOKEN), 1, params)
    assert not flow_match(flows, 100, Address(USER), 1, params)
    assert not flow_match(flows, True, Address(TOKEN), 1, params)


def test_consistency_and_uniqueness():
    txs = [make_tx(i, call={"a": i, "b": i, "c": 7}) for i in range(1, 4)]
    a, b, c = (FieldPath.parse(f"transaction[go].{n}") for n in "abc")
    assert check_consistency(txs, [a, b])
    assert not check_consistency(txs, [a, c])
    assert is_unique(txs, a) and not is_unique(txs, c)
    with pytest.raises(ValueError):
        check_consistency(txs, [a])


def test_counterpart_lookup_directions():
    d = FieldPath.parse("transaction[go].to")
    txs = [make_tx(i, chain=56, timestamp=1000 + 100 * i, call={"to": Address(bytes([i]) * 20)}) for i in range(1, 4)]
    index = CounterpartIndex(txs, {txs[0].category_key: [d]})
    params = PairingParams(timewindow=150)
    fwd = index.d_values(56, 1150, 150, "forward")
    back = index.d_values(56, 1150, 150, "backward")
    assert fwd == {"0x" + "02" * 20, "0x" + "03" * 20}
    assert back == {"0x" + "01" * 20}
    assert index.count(56, 1150, 150, "symmetric") == 3
    assert index.d_values(99, 1150, 150, "forward") == set()
    assert [t.timestamp for t in find_by_chain_timestamp(txs, 56, 1150, params)] == [1200, 1300]


def _examine(sc, side, candidates=None):
    cats = {s: [c for c in categorize(data) if c.pairable] for s, data in ((Side.SOURCE, sc.src), (Side.DESTINATION, sc.dst))}
    if candidates is None:
        candidates = {}
        for s in Side:
            candidates.update(infer_candidates(cats[s], LexicalProvider()))
    d_cands = {k: cq.paths("D") for k, cq in candidates.items()}
    other = sc.dst if side is Side.SOURCE else sc.src
    return cats[side], examine(candidates, cats[side], other, d_cands, sc.params, side=side)


@pytest.mark.parametrize("side", list(Side))
def test_examiner_recovers_truth_on_clean_data(clean_small, side):
    cats, report = _examine(clean_small, side)
    assert report.n_survivors == len(cats)
    for cat in cats:
        chosen = report.categories[cat.key].quintuple.to_dict()
        assert truth_matches(chosen, clean_small.truth_for(side, cat.key))


@pytest.mark.parametrize("side", list(Side))
def test_examiner_rejects_decoys(decoy_small, side):
    cats, report = _examine(decoy_small, side)
    for cat in cats:
        rep = report.categories[cat.key]
        assert rep.accepted, rep.reason
        assert truth_matches(rep.quintuple.to_dict(), decoy_small.truth_for(side, cat.key))
        # survivors never exceed inferred candidates
        for role in ROLES:
            assert len(rep.survivors[role]) <= rep.counts["candidates"][role]


def test_uninferable_category_is_reported(clean_small):
    cats = [c for c in categorize(clean_small.src) if c.pairable]
    cands = {c.key: CandidateQuintuple({}, uninferable=True) for c in cats}
    _, report = _examine(clean_small, Side.SOURCE, candidates=cands)
    assert {r.reason for r in report.categories.values()} == {"uninferable"}
    assert report.quintuples == {}


def test_candidates_without_flows_fail_phase_one(clean_small):
    cats = [c for c in categorize(clean_small.src) if c.pairable]
    junk = "transaction.timestamp"
    cands = {c.key: CandidateQuintuple({r: [(junk, 1.0)] for r in ROLES}) for c in cats}
    _, report = _examine(clean_small, Side.SOURCE, candidates=cands)
    assert {r.reason for r in report.categories.values()} == {"phase1-empty"}
