import json

import pytest

from oracles import keccak256 as keccak_ref
from xbridge.categorize import categorize, combination_count
from xbridge.inference import RoleLexicon, tokenize_path
from xbridge.model import ROLES, HashedTopic, PairingParams, Side, canonical_address, resolve
from xbridge.simulator import (
    DECOY_EVENT,
    FILLER_EVENTS,
    FILLER_WORDS,
    ScenarioConfig,
    ScenarioError,
    generate,
    motivating_config,
    replay_truth,
    write_scenario,
)


def test_generation_is_deterministic():
    cfg = ScenarioConfig(seed=4, n_transfers=80, decoy_field_rate=0.5, decoy_tx_rate=0.2)
    a, b = generate(cfg), generate(cfg)
    assert [t.hash_hex for t in a.src] == [t.hash_hex for t in b.src]
    assert [t.leaf_map for t in a.dst] == [t.leaf_map for t in b.dst]
    assert a.truth_pairs == b.truth_pairs
    c = generate(ScenarioConfig(seed=5, n_transfers=80))
    assert {t.hash_hex for t in c.src}.isdisjoint(t.hash_hex for t in a.src)


def test_decoded_values_equal_planted_values(decoy_small):
    by_hash = {t.hash_hex: t for t in decoy_small.src + decoy_small.dst}
    checked = 0
    for h, (call_args, logs) in list(decoy_small.planted.items())[:300]:
        tx = by_hash[h]
        if call_args is not None:
            assert tx.call.args == call_args
        assert len(tx.logs) == len(logs)
        for entry, want in zip(tx.logs, logs):
            assert entry.event == want["event"]
            assert str(entry.address) == want["address"]
            for k, v in want["args"].items():
                got = entry.args[k]
                if isinstance(got, HashedTopic):
                    raw = v.encode() if isinstance(v, str) else bytes(v)
                    assert bytes(got) == keccak_ref(raw)
                else:
                    assert got == v
        checked += 1
    assert checked == 300


def test_truth_pairs_are_one_to_one_and_present(clean_small):
    src = {t.hash_hex for t in clean_small.src}
    dst = {t.hash_hex for t in clean_small.dst}
    pairs = clean_small.truth_pairs
    assert len(pairs) == clean_small.config.n_transfers
    assert {s for s, _ in pairs} <= src and {d for _, d in pairs} <= dst
    assert len({d for _, d in pairs}) == len(pairs)


def test_truth_pairs_satisfy_rules_analytically(clean_small):
    assert replay_truth(clean_small.transfers, clean_small.params) == clean_small.truth_pairs


def test_late_transfers_fall_outside_window():
    sc = generate(ScenarioConfig(seed=2, n_transfers=200, late_fraction=0.3, late_delay=(8000, 9000)))
    late = {(t.src_hash, t.dst_hash) for t in sc.transfers if t.ts_dst - t.ts_src > 7200}
    assert late and late <= sc.truth_pairs
    assert replay_truth(sc.transfers, sc.params).isdisjoint(late)
    assert replay_truth(sc.transfers, PairingParams(10_000, 0.2, sc.params.chain_alias, sc.params.token_alias)) >= late


@pytest.mark.parametrize("fixture", ["clean_small", "decoy_small"])
def test_truth_quintuples_name_equivalent_fields(fixture, request):
    sc = request.getfixturevalue(fixture)
    for side, txs in ((Side.SOURCE, sc.src), (Side.DESTINATION, sc.dst)):
        for cat in categorize(txs):
            truth = sc.truth_for(side, cat.key)
            if truth is None:
                continue
            for role in ROLES:
                assert set(truth[role]) <= set(cat.field_set)
                for tx in cat.members[:25]:
                    values = {resolve(tx, p) for p in truth[role]}
                    if role == "D":
                        values = {canonical_address(v) for v in values}
                    assert len(values) == 1, (role, truth[role])


def test_filler_names_avoid_lexicon_terms():
    lex = RoleLexicon.load()
    terms = {t for ws in lex.terms.values() for t in ws}
    for word in FILLER_WORDS + FILLER_EVENTS:
        assert not set(tokenize_path(f"log[{word}].x")[1:-1]) & terms, word


def test_decoys_leave_one_route_clean(decoy_small):
    decoyed = {}
    for side, txs in ((Side.SOURCE, decoy_small.src), (Side.DESTINATION, decoy_small.dst)):
        for cat in categorize(txs):
            truth = decoy_small.truth_for(side, cat.key)
            if truth is not None:
                decoyed[(side, cat.key)] = any(f.startswith(f"log[{DECOY_EVENT}]") for f in cat.field_set)
    assert sum(decoyed.values()) == 4
    assert len(decoyed) == 8
    routes = {lay.route for side in Side for lay in decoy_small.layouts[side] if lay.decoy}
    assert len(routes) == 3


def test_motivating_category_shape():
    sc = generate(motivating_config(seed=1, n_transfers=20))
    cats = [c for c in categorize(sc.src) if sc.truth_for(Side.SOURCE, c.key)]
    assert len(cats) == 1
    assert len(cats[0].field_set) == 144
    assert {len(tx.logs) for tx in cats[0].members} == {9}
    assert combination_count(cats) == 481_008_528


@pytest.mark.parametrize(
    "kwargs",
    [
        {"decoy_field_rate": 1.5},
        {"fields_per_category": (4, 10)},
        {"fields_per_category": (30, 20)},
        {"n_categories": 0},
        {"n_categories": 9},
        {"src_chain": 5, "dst_chain": 5},
        {"chain_alias": {7: 999}},
        {"inter_arrival": 0},
        {"delay": (0, 10)},
        {"tokens": ()},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ScenarioError):
        ScenarioConfig(**kwargs)


def test_structural_minimum_is_enforced():
    with pytest.raises(ScenarioError):
        generate(ScenarioConfig(n_transfers=5, fields_per_category=(5, 5)))
    with pytest.raises(ScenarioError):
        generate(ScenarioConfig(n_transfers=5, logs_per_category=(1, 1), decoy_field_rate=1.0))


def test_config_dict_round_trip_and_unknown_keys():
    cfg = ScenarioConfig(seed=3, chain_alias={7: 1})
    assert ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_dict({"seeed": 1})


def test_write_scenario(tmp_path):
    sc = generate(ScenarioConfig(seed=1, n_transfers=30))
    out = write_scenario(sc, tmp_path / "s")
    names = {p.name for p in out.iterdir()}
    assert {"abis", "src_raw.jsonl", "dst_raw.jsonl", "src_instances.jsonl", "dst_instances.jsonl",
            "truth_pairs.csv", "truth_quintuples.json", "params.json", "scenario.json", "transfers.jsonl"} <= names
    assert PairingParams.from_dict(json.loads((out / "params.json").read_text())) == sc.params
