import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from xbridge.inference import LexicalProvider
from xbridge.model import Side
from xbridge.pipeline import BridgePairer, InstanceDecoder
from xbridge.simulator import truth_matches


class CountingProvider(LexicalProvider):
    def __init__(self):
        super().__init__()
        self.calls = 0

    def propose(self, cat, sample):
        self.calls += 1
        return super().propose(cat, sample)


def _model(sc, **kw):
    return BridgePairer(chain_alias=sc.params.chain_alias, token_alias=sc.params.token_alias, **kw)


def test_estimator_params_round_trip():
    m = BridgePairer(timewindow=60, fee_rate=0.05, top_k=3)
    c = clone(m)
    assert c.get_params()["timewindow"] == 60 and c.get_params()["top_k"] == 3
    c.set_params(timewindow=600)
    assert c.timewindow == 600 and m.timewindow == 60


def test_predict_requires_fit(clean_small):
    with pytest.raises(NotFittedError):
        BridgePairer().predict(clean_small.src, clean_small.dst)


def test_fit_predict_recovers_everything(clean_small):
    m = _model(clean_small).fit(clean_small.src, clean_small.dst)
    for side in Side:
        for key, q in m.quintuples_[side].items():
            assert truth_matches(q.to_dict(), clean_small.truth_for(side, key))
    assert m.score(clean_small.src, clean_small.dst, clean_small.truth_pairs) == 1.0
    assert m.diagnostics_ == [] or all(isinstance(d, str) for d in m.diagnostics_)


def test_refit_reuses_candidates(clean_small):
    prov = CountingProvider()
    m = _model(clean_small, provider=prov).fit(clean_small.src, clean_small.dst)
    calls = prov.calls
    assert calls == len(m.categories_[Side.SOURCE]) + len(m.categories_[Side.DESTINATION])
    m.refit_params(clean_small.src, clean_small.dst, timewindow=60)
    assert prov.calls == calls
    assert m.params_.timewindow == 60
    assert m.score(clean_small.src, clean_small.dst, clean_small.truth_pairs) == 0.0


def test_symmetric_and_prefilter_variants_agree_on_clean_data(clean_small):
    for kw in ({"symmetric": True}, {"prefilter": True}):
        m = _model(clean_small, **kw)
        assert m.fit(clean_small.src, clean_small.dst).score(clean_small.src, clean_small.dst, clean_small.truth_pairs) == 1.0


def test_predict_on_held_out_slice(clean_small):
    m = _model(clean_small).fit(clean_small.src, clean_small.dst)
    half_s = clean_small.src[: len(clean_small.src) // 2]
    pairs = m.predict(half_s, clean_small.dst)
    wanted = {(s, d) for s, d in clean_small.truth_pairs if s in {t.hash_hex for t in half_s}}
    assert {(p.src_ref[1], p.dst_ref[1]) for p in pairs} == wanted


def test_instance_decoder_matches_simulator(clean_small):
    dec = InstanceDecoder(clean_small.registry, side="source", strict=True).fit()
    out = dec.transform(clean_small.raw_src[:50])
    assert [t.leaf_map for t in out] == [t.leaf_map for t in clean_small.src[:50]]
    assert dec.diagnostics_ == []


def test_side_mismatch_is_rejected(clean_small):
    with pytest.raises(ValueError):
        _model(clean_small).fit(clean_small.dst, clean_small.src)
