"""Random ABI types and matching values, as plain RNG draws and as hypothesis strategies."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from xbridge.abi import (
    AbiType,
    AddressType,
    ArrayType,
    BoolType,
    BytesType,
    FixedBytesType,
    IntType,
    StringType,
    TupleType,
    UIntType,
)
from xbridge.model import Address

_TEXT = "abc xyz 0123 é中\U0001f600"


def random_type(rng: random.Random, depth: int = 0) -> AbiType:
    roll = rng.random()
    if depth >= 3 or roll < 0.6:
        kind = rng.randrange(7)
        if kind == 0:
            return UIntType(8 * rng.randint(1, 32))
        if kind == 1:
            return IntType(8 * rng.randint(1, 32))
        if kind == 2:
            return AddressType()
        if kind == 3:
            return BoolType()
        if kind == 4:
            return FixedBytesType(rng.randint(1, 32))
        if kind == 5:
            return BytesType()
        return StringType()
    if roll < 0.8:
        return ArrayType(random_type(rng, depth + 1), rng.choice([None, None, 1, 2, 3]))
    n = rng.randint(1, 3)
    return TupleType(tuple((f"f{i}", random_type(rng, depth + 1)) for i in range(n)))


def random_value(rng: random.Random, t: AbiType):
    if isinstance(t, UIntType):
        return rng.choice([0, 2**t.bits - 1, rng.getrandbits(t.bits)])
    if isinstance(t, IntType):
        lo, hi = -(2 ** (t.bits - 1)), 2 ** (t.bits - 1) - 1
        return rng.choice([lo, hi, -1, rng.randint(lo, hi)])
    if isinstance(t, AddressType):
        return Address(rng.randbytes(20))
    if isinstance(t, BoolType):
        return rng.random() < 0.5
    if isinstance(t, FixedBytesType):
        return rng.randbytes(t.size)
    if isinstance(t, BytesType):
        return rng.randbytes(rng.choice([0, 1, 31, 32, 33, rng.randint(0, 100)]))
    if isinstance(t, StringType):
        return "".join(rng.choice(_TEXT) for _ in range(rng.randint(0, 40)))
    if isinstance(t, ArrayType):
        n = t.length if t.length is not None else rng.randint(0, 3)
        return [random_value(rng, t.elem) for _ in range(n)]
    assert isinstance(t, TupleType)
    return {n: random_value(rng, ct) for n, ct in t.components}


# hypothesis strategies

_elementary = st.one_of(
    st.integers(1, 32).map(lambda n: UIntType(8 * n)),
    st.integers(1, 32).map(lambda n: IntType(8 * n)),
    st.just(AddressType()),
    st.just(BoolType()),
    st.integers(1, 32).map(FixedBytesType),
    st.just(BytesType()),
    st.just(StringType()),
)

abi_types = st.recursive(
    _elementary,
    lambda inner: st.one_of(
        st.tuples(inner, st.one_of(st.none(), st.integers(1, 3))).map(lambda p: ArrayType(*p)),
        st.lists(inner, min_size=1, max_size=3).map(
            lambda ts: TupleType(tuple((f"f{i}", t) for i, t in enumerate(ts)))
        ),
    ),
    max_leaves=6,
)


def values_of(t: AbiType) -> st.SearchStrategy:
    if isinstance(t, UIntType):
        return st.integers(0, 2**t.bits - 1)
    if isinstance(t, IntType):
        return st.integers(-(2 ** (t.bits - 1)), 2 ** (t.bits - 1) - 1)
    if isinstance(t, AddressType):
        return st.binary(min_size=20, max_size=20).map(Address)
    if isinstance(t, BoolType):
        return st.booleans()
    if isinstance(t, FixedBytesType):
        return st.binary(min_size=t.size, max_size=t.size)
    if isinstance(t, BytesType):
        return st.binary(max_size=80)
    if isinstance(t, StringType):
        return st.text(max_size=30)
    if isinstance(t, ArrayType):
        if t.length is None:
            return st.lists(values_of(t.elem), max_size=3)
        return st.lists(values_of(t.elem), min_size=t.length, max_size=t.length)
    assert isinstance(t, TupleType)
    return st.fixed_dictionaries({n: values_of(ct) for n, ct in t.components})


typed_values = abi_types.flatmap(lambda t: st.tuples(st.just(t), values_of(t)))


def to_eth_abi(value, t: AbiType):
    """Convert a value tree to the form the reference encoder expects."""
    if isinstance(t, AddressType):
        return "0x" + bytes(value).hex()
    if isinstance(t, ArrayType):
        return [to_eth_abi(v, t.elem) for v in value]
    if isinstance(t, TupleType):
        return tuple(to_eth_abi(value[n], ct) for n, ct in t.components)
    return value


def from_eth_abi(value, t: AbiType):
    if isinstance(t, AddressType):
        return Address(value)
    if isinstance(t, ArrayType):
        return [from_eth_abi(v, t.elem) for v in value]
    if isinstance(t, TupleType):
        return {n: from_eth_abi(v, ct) for (n, ct), v in zip(t.components, value)}
    return value
