import csv
import json

import httpx
import pytest

from xbridge.harness import (
    ablation_report,
    baseline_chronological,
    baseline_hybrid,
    baseline_similarity,
    best_cells,
    llm_whole_matching_demo,
    sweep,
)
from xbridge.pairing import score
from xbridge.pipeline import BridgePairer


def _model(sc, **kw):
    return BridgePairer(chain_alias=sc.params.chain_alias, token_alias=sc.params.token_alias, **kw)


def _anchor(sc):
    first = min(sc.transfers, key=lambda t: (t.ts_src, t.src_hash))
    return first.src_hash, first.dst_hash


def test_chronological_pairs_positionally(clean_small):
    pairs = baseline_chronological(clean_small.src, clean_small.dst, _anchor(clean_small))
    assert pairs[0] == _anchor(clean_small)
    assert len(pairs) <= min(len(clean_small.src), len(clean_small.dst))
    with pytest.raises(ValueError):
        baseline_chronological(clean_small.src, clean_small.dst, ("0x00", "0x01"))


def test_similarity_baselines_trail_the_pipeline_under_decoys(decoy_small):
    truth = decoy_small.truth_pairs
    pipe = score(_model(decoy_small).fit_predict(decoy_small.src, decoy_small.dst), truth).f1
    sim = score(baseline_similarity(decoy_small.src, decoy_small.dst, decoy_small.params), truth).f1
    hyb = score(baseline_hybrid(decoy_small.src, decoy_small.dst, decoy_small.params), truth).f1
    examined = score(
        baseline_similarity(decoy_small.src, decoy_small.dst, decoy_small.params, with_examiner=True), truth
    ).f1
    assert pipe == 1.0
    assert sim < pipe and hyb < pipe
    assert examined == pipe


def test_ablation_report(decoy_small):
    model = _model(decoy_small).fit(decoy_small.src, decoy_small.dst)
    rows = ablation_report(model)
    assert [r.side for r in rows] == ["source", "destination"]
    for r in rows:
        assert r.X > r.Y > 0
        assert r.survivors == r.M == 4
        assert set(r.as_dict()) == {"side", "X", "Y", "survivors", "M"}


def test_sweep_grid_and_csv(clean_small, tmp_path):
    cells = sweep(
        clean_small.src, clean_small.dst, clean_small.truth_pairs,
        timewindows=(60, 7200), fee_rates=(0.01, 0.2),
        base=_model(clean_small), out_csv=tmp_path / "s.csv",
    )
    assert [(c.timewindow, c.fee_rate) for c in cells] == [(60, 0.01), (60, 0.2), (7200, 0.01), (7200, 0.2)]
    f1 = {(c.timewindow, c.fee_rate): c.scores.f1 for c in cells}
    assert f1[(60, 0.2)] == 0.0
    assert f1[(7200, 0.2)] == 1.0
    assert [(c.timewindow, c.fee_rate) for c in best_cells(cells)] == [(7200, 0.2)]
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert len(rows) == 4 and "f1" in rows[0]


def test_llm_demo_keeps_only_known_hashes(clean_small):
    src = sorted(clean_small.src, key=lambda t: (t.timestamp, t.tx_hash))
    dst = sorted(clean_small.dst, key=lambda t: (t.timestamp, t.tx_hash))
    seen = {}

    def handler(request):
        seen["prompt"] = json.loads(json.loads(request.content)["prompt"])
        return httpx.Response(200, json={"pairs": [[src[0].hash_hex, dst[0].hash_hex], ["0xdead", dst[1].hash_hex], "junk"]})

    out = llm_whole_matching_demo(clean_small.src, clean_small.dst, "http://llm.test/", transport=httpx.MockTransport(handler),
                                  limit=5)
    assert out == [(src[0].hash_hex, dst[0].hash_hex)]
    assert len(seen["prompt"]["source"]) == 5
