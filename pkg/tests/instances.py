"""Seeded random batches for the ordering optimizer."""

import random
from fractions import Fraction

from interpool.amm import PoolState
from interpool.chainsim.transactions import BUY, SELL, Exchange, MainnetTx, ProvideLiquidity
from interpool.core import Amount, Hash256, Wallets
from interpool.poe import PoeParams, ScoreSnapshot


def random_tx(rng: random.Random, sender: str, nonce: int, ratio: Fraction) -> MainnetTx:
    price = Amount.of(rng.randrange(1, 40)) / 1000
    limit = Amount.of(rng.randrange(1, 4))
    if rng.random() < 0.1:
        return MainnetTx(sender, nonce, price, limit, ProvideLiquidity(Amount.of(rng.randrange(1, 20))))
    buy = rng.random() < 0.5
    vol = Amount.of(rng.randrange(1, 60)) if buy else Amount.of(rng.randrange(1, 25))
    centre = ratio * Fraction(rng.randrange(85, 116), 100)
    width = Fraction(rng.randrange(1, 15), 100)
    lo, hi = Amount.of(centre * (1 - width)), Amount.of(centre * (1 + width))
    return MainnetTx(sender, nonce, price, limit, Exchange(BUY if buy else SELL, vol, lo, hi))


def small_instance(seed: int, n: int | None = None):
    """A batch of at most 8 txs with a forging constraint that is known to be satisfiable."""
    rng = random.Random(seed)
    n = n or rng.randrange(1, 9)
    i_inv = rng.randrange(50, 400)
    ratio = Fraction(rng.randrange(100, 500), 100)
    pool = PoolState(Amount.of(i_inv), Amount.of(ratio * i_inv), fee_rate=Fraction(rng.choice([0, 1, 3, 10]), 1000),
                     fee_method=rng.choice(["native", "intertoken"]), min_volume_threshold=Amount.of(rng.choice([0, 10**6])))
    senders = [f"s{j}" for j in range(rng.randrange(1, 5))]
    txs = [random_tx(rng, rng.choice(senders), j, ratio) for j in range(n)]
    wallets = Wallets()
    for s in senders:
        wallets.credit(s, Amount.of(rng.choice([0, 1, 30, 1000])))
        wallets.credit(s, Amount.of(rng.choice([0, 5, 100])), "intertoken")
    snap = ScoreSnapshot.from_pool(pool, wallets if rng.random() < 0.6 else None)
    b = rng.choice([1, 1, 2])
    prefix = rng.randrange(0, n // b + 1)
    key = rng.random() < 0.5
    hidden = rng.sample(txs, len(txs))[:prefix]
    tbits = "".join(t.tx_hash.bits(0, b) for t in hidden)
    kbits = "".join(t.tx_hash.bits(256 - b, b) for t in hidden)
    pad = lambda bits: Hash256.from_bits(bits + "".join(rng.choice("01") for _ in range(256 - len(bits))))
    params = PoeParams((pad(tbits),), pad(kbits) if key else None, hash_bits=len(tbits), bits_per_tx=b,
                       seed=seed, move_budget=200, restarts=1)
    return txs, params, snap


def large_instance(seed: int, n: int = 512, hash_bits: int = 256):
    """``n`` txs spread evenly over the four (first bit, last bit) classes; random target and key."""
    rng = random.Random(seed)
    i_inv = rng.randrange(500, 5000)
    ratio = Fraction(rng.randrange(100, 500), 100)
    pool = PoolState(Amount.of(i_inv), Amount.of(ratio * i_inv), fee_rate=Fraction(3, 1000))
    senders = [f"s{j}" for j in range(16)]
    nonces = {s: 0 for s in senders}
    txs = []
    for j in range(n):
        want = j % 4
        s = rng.choice(senders)
        base = random_tx(rng, s, nonces[s], ratio)
        while True:
            t = MainnetTx(s, nonces[s], base.gas_price, base.gas_limit, base.kind)
            nonces[s] += 1
            if t.tx_hash.bit(0) * 2 + t.tx_hash.bit(255) == want:
                break
        txs.append(t)
    rng.shuffle(txs)
    target = Hash256(rng.randbytes(32))
    key = Hash256(rng.randbytes(32))
    params = PoeParams((target,), key, hash_bits=hash_bits, bits_per_tx=1, seed=seed, move_budget=2000, restarts=0)
    return txs, params, ScoreSnapshot.from_pool(pool)
