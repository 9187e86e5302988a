"""Order a 512-tx mempool so its first bits spell an alien header hash and a booster key."""

import random

from interpool.amm import PoolState
from interpool.core import Amount, Hash256, KeyPair
from interpool.poe import PoeParams, optimize_batch, random_baseline, reconstruct_forged
from interpool.scenario import WorkloadSpec, generate_workload


def main() -> None:
    rng = random.Random(42)
    header = Hash256(rng.randbytes(32))
    booster = KeyPair.derive("demo-booster")
    txs = generate_workload(WorkloadSpec(tx_per_block=512, users=16), rng, min_count=256)
    pool = PoolState(Amount.of(4000), Amount.of(10_000), fee_rate=Amount.of("0.003").to_fraction())
    params = PoeParams((header,), booster.pubkey, hash_bits=256, bits_per_tx=1, seed=1, restarts=0)
    batch = optimize_batch(txs, params, pool)
    forged, key = reconstruct_forged(batch.ordered_txs, params)
    print("alien header   ", header.hex())
    print("decoded header ", forged.hex(), "match" if forged == header else "MISMATCH")
    print("decoded key    ", key.hex(), "match" if key == booster.pubkey else "MISMATCH")
    best = random_baseline(txs, params, pool, 200, random.Random(0))
    print(f"miner score {batch.miner_score}  vs best of 200 random feasible orderings {best[0]}")
    print(f"volume score {batch.volume_score} ({batch.method})")


if __name__ == "__main__":
    main()
