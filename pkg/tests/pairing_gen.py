"""Random identifier sets with many near-collisions, for pairing checks."""

import random

from xbridge.model import Side
from xbridge.pairing import Identifier

FEES = (0.0, 0.01, 0.05, 0.1, 0.15, 0.2, 0.3)


def random_identifiers(rng: random.Random, n_src: int, n_dst: int):
    addrs = [f"0x{i:040x}" for i in range(1, rng.randint(2, 6))]
    tokens = ["USDC", "DAI", "ETH"][: rng.randint(1, 3)]
    chains = (1, 56, 137)
    horizon = rng.choice([500, 5_000, 50_000])

    def one(side, own, other, i):
        base = rng.choice([100, 1000, 10_000])
        return Identifier(
            D=rng.choice(addrs),
            C=rng.choice([other, other, rng.choice(chains)]),
            T=rng.choice(tokens),
            A=rng.randint(0, base),
            Ts=rng.randint(1, horizon),
            side=side,
            own_chain=own,
            tx_hash=f"0x{side.value[0]}{i:063x}",
        )

    src = [one(Side.SOURCE, 1, 56, i) for i in range(n_src)]
    dst = [one(Side.DESTINATION, rng.choice([56, 56, 137]), 1, i) for i in range(n_dst)]
    # some exact duplicates of timestamps and amounts to exercise tie-breaks
    for _ in range(min(n_src, n_dst) // 3):
        s = rng.choice(src)
        k = rng.randrange(len(dst))
        d = dst[k]
        dst[k] = Identifier(s.D, d.C, s.T, s.A, s.Ts + rng.choice([0, 1, -1, 7]), d.side, d.own_chain, d.tx_hash)
    return src, dst
