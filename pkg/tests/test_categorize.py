from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_tx
from xbridge.categorize import Categorizer, candidate_space_size, categorize, combination_count
from xbridge.model import CandidateQuintuple


def test_categories_are_exact_field_set_classes():
    txs = [
        make_tx(1, call={"a": 1, "b": 2}),
        make_tx(2, call={"a": 5, "b": 6}),
        make_tx(3, call={"a": 1}),
        make_tx(4, call={"b": 1, "a": 2}),
    ]
    cats = categorize(txs)
    assert [len(c.members) for c in cats] == [3, 1]
    for c in cats:
        assert all(tx.field_set == c.field_set for tx in c.members)


def test_category_order_is_size_then_key():
    txs = [make_tx(i, call={f"f{i % 3}": 1}) for i in range(9)]
    cats = categorize(txs)
    assert [c.key for c in cats] == sorted(c.key for c in cats)


@given(st.lists(st.integers(0, 200), max_size=20))
def test_combination_count_is_sum_of_binomials(sizes):
    assert combination_count(sizes) == sum(comb(n, 5) for n in sizes)


def test_motivating_count():
    assert combination_count([144]) == 481_008_528


def test_candidate_space_size():
    cq = CandidateQuintuple({"D": [("log[E].a", 1.0), ("log[E].b", 0.5)], "C": [("log[E].c", 1)],
                             "T": [("log[E].d", 1)], "A": [("log[E].e", 1), ("log[E].f", 1)],
                             "Ts": [("transaction.timestamp", 1)]})
    assert candidate_space_size({"k": cq, "j": cq}) == 8


def test_categorizer_estimator(clean_small):
    est = Categorizer().fit(clean_small.src)
    keys = est.transform(clean_small.src[:10])
    assert all(k is not None for k in keys)
    assert est.transform([make_tx(999, call={"zz": 1})]) == [None]
    assert est.combination_count() == combination_count(est.pairable_)
    # four metadata fields alone are too few to pair
    bare = Categorizer().fit([make_tx(1)])
    assert bare.skipped_ == [bare.categories_[0].key]


def test_input_validation(clean_small):
    from xbridge.model import Side
    from xbridge.validation import check_instances

    with pytest.raises(TypeError):
        Categorizer().fit(["not an instance"])
    with pytest.raises(ValueError):
        check_instances(clean_small.dst[:3], Side.SOURCE)
