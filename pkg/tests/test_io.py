import json

import pytest

from xbridge.io import (
    DataError,
    instance_from_json,
    instance_to_json,
    load_instances,
    load_truth_pairs,
    save_instances,
    save_truth_pairs,
)


def test_instances_round_trip_through_files(tmp_path, decoy_small):
    txs = decoy_small.src[:150] + decoy_small.dst[:150]
    path = tmp_path / "x.jsonl"
    save_instances(path, txs)
    back = load_instances(path)
    for a, b in zip(txs, back):
        assert a.leaf_map == b.leaf_map
        assert a.category_key == b.category_key
        assert (a.chain, a.tx_hash, a.side, a.timestamp) == (b.chain, b.tx_hash, b.side, b.timestamp)


def test_nested_struct_names_survive_serialization(clean_small):
    nested = [tx for tx in clean_small.src + clean_small.dst if tx.call and any(
        isinstance(v, dict) for v in tx.call.args.values())]
    assert nested, "scenario should contain struct arguments"
    for tx in nested[:20]:
        assert instance_from_json(instance_to_json(tx)).field_set == tx.field_set


def test_malformed_instance_is_data_error():
    with pytest.raises(DataError):
        instance_from_json({"chain": 1})
    with pytest.raises(DataError):
        instance_from_json({"chain": 1, "tx_hash": "zz", "timestamp": 1, "sender": "", "contract": "", "side": "source"})


def test_bad_json_line_is_data_error(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"a": 1}\n{broken\n')
    with pytest.raises(DataError):
        load_instances(p)


def test_truth_csv_round_trip(tmp_path):
    pairs = {("0xaa", "0xbb"), ("0xcc", "0xdd")}
    save_truth_pairs(tmp_path / "t.csv", pairs)
    assert load_truth_pairs(tmp_path / "t.csv") == pairs
    (tmp_path / "bad.csv").write_text("src_hash,dst_hash\n0xaa\n")
    with pytest.raises(DataError):
        load_truth_pairs(tmp_path / "bad.csv")
    json.dumps(sorted(pairs))
