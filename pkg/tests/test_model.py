import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import log, make_tx
from xbridge.model import (
    NATIVE,
    Address,
    CandidateQuintuple,
    FieldPath,
    PairingParams,
    Quintuple,
    canonical_address,
    resolve,
    value_kind,
)

segment = st.text(alphabet="abcdefghijklmnopqrstuvwxyzABC_0123456789", min_size=1, max_size=8)


@given(
    st.sampled_from(["transaction", "log"]),
    st.one_of(st.none(), segment, segment.map(lambda s: s + "#2")),
    st.lists(segment, max_size=4),
)
def test_path_parse_render_round_trip(root, name, segs):
    if root == "log" and name is None:
        name = "Ev"
    if name is None and not segs:
        segs = ["timestamp"]
    p = FieldPath(root, name, tuple(segs))
    assert FieldPath.parse(p.render()) == p


@pytest.mark.parametrize("bad", ["", "block.x", "log.x", "transaction[f].a..b", "transaction[f[x]].a"])
def test_path_parse_rejects(bad):
    with pytest.raises(ValueError):
        FieldPath.parse(bad)


def test_meta_and_named_paths_sort_together():
    paths = [FieldPath.parse(s) for s in ("transaction[f].x", "transaction.timestamp", "log[E].a")]
    assert [p.render() for p in sorted(paths)] == ["log[E].a", "transaction.timestamp", "transaction[f].x"]


def test_leaves_cover_meta_nested_records_and_repeated_events():
    tx = make_tx(
        1,
        call={"order": {"to": Address(b"\x05" * 20), "amt": 3}, "ids": [1, 2]},
        logs=[log("Sent", {"v": 1}), log("Sent", {"v": 2})],
    )
    fs = tx.field_set
    assert "transaction.timestamp" in fs and "transaction.sender" in fs
    assert "transaction[go].order.to" in fs and "transaction[go].ids" in fs
    assert "log[Sent].v" in fs and "log[Sent#2].v" in fs
    assert resolve(tx, "log[Sent#2].v") == 2
    # list elements share one path; the first element is what resolves
    assert resolve(tx, "transaction[go].ids") == 1
    assert FieldPath.parse("transaction[go].ids") in tx.ambiguous_paths


def test_resolve_default_for_missing():
    tx = make_tx(1)
    assert resolve(tx, "log[X].y", "missing") == "missing"


def test_category_key_depends_only_on_field_set():
    a = make_tx(1, call={"x": 1}, timestamp=5)
    b = make_tx(2, call={"x": 99}, timestamp=7)
    c = make_tx(3, call={"y": 1})
    assert a.category_key == b.category_key != c.category_key


def test_instance_validation():
    with pytest.raises(ValueError):
        make_tx(1, timestamp=0)
    with pytest.raises(ValueError):
        make_tx(1, value=-1)


@pytest.mark.parametrize(
    "value,expected",
    [
        (Address(b"\xaa" * 20), "0x" + "aa" * 20),
        (b"\x00" * 12 + b"\xbb" * 20, "0x" + "bb" * 20),
        (b"\x01" + b"\x00" * 11 + b"\xbb" * 20, None),
        ("0x" + "CC" * 20, "0x" + "cc" * 20),
        (5, None),
        (True, None),
    ],
)
def test_canonical_address(value, expected):
    assert canonical_address(value) == expected


def test_value_kind():
    assert value_kind(True) == "bool"
    assert value_kind(3) == "uint"
    assert value_kind(Address(b"\x00" * 20)) == "address"
    assert value_kind({}) == "record"
    with pytest.raises(TypeError):
        value_kind(1.5)


def test_params_validation_and_alias():
    with pytest.raises(ValueError):
        PairingParams(timewindow=0)
    with pytest.raises(ValueError):
        PairingParams(fee_rate=1.5)
    p = PairingParams(chain_alias={101: 1}, token_alias={(1, "0x" + "AB" * 20): "USDC", (56, NATIVE): "BNB"})
    assert p.resolve_chain(101) == 1 and p.resolve_chain(7) == 7 and p.resolve_chain(True) is None
    assert p.canonical_token(1, Address(b"\xab" * 20)) == "USDC"
    assert p.canonical_token(56, NATIVE) == "BNB"
    assert p.canonical_token(1, 12) is None


def test_params_dict_round_trip():
    p = PairingParams(60, 0.05, {101: 1}, {(1, "0x" + "ab" * 20): "USDC"})
    q = PairingParams.from_dict(p.to_dict())
    assert q == p


def test_fee_fraction_is_decimal_exact():
    from fractions import Fraction

    assert PairingParams(fee_rate=0.1).fee_fraction == Fraction(1, 10)


def test_quintuple_round_trip():
    q = Quintuple("transaction[f].to", "transaction[f].chain", "log[E].token", "log[E].amount", "transaction.timestamp")
    assert Quintuple.from_dict(q.to_dict()) == q
    assert q["Ts"].is_meta


def test_candidate_quintuple_orders_and_validates():
    cq = CandidateQuintuple({"D": [("log[E].b", 0.2), ("log[E].a", 0.9)]})
    assert cq.paths("D")[0].render() == "log[E].a"
    assert not cq.complete and cq.space_size() == 0
    with pytest.raises(ValueError):
        CandidateQuintuple({"D": [("log[E].a", 1.5)]})
    assert CandidateQuintuple.from_dict(cq.to_dict()).roles == cq.roles
