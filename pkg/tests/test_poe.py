import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st

from instances import large_instance, small_instance
from interpool.amm import PoolState
from interpool.chainsim.transactions import BUY, SELL, Exchange, MainnetTx
from interpool.core import Amount, Hash256
from interpool.poe import (
    EntropyParams,
    InfeasibleError,
    ParameterError,
    PoeParams,
    brute_force_optimize,
    count_feasible,
    count_orderings,
    entropy,
    is_feasible,
    optimize_batch,
    random_baseline,
    random_feasible_ordering,
    reconstruct_forged,
    reconstruct_targets,
    score_ordering,
    slot_classes,
    tx_class,
)

POOL = PoolState(Amount.of(100), Amount.of(250))


def tx_with_first_bit(bit, nonce_start=0, sender="g", gas=1, direction=BUY, vol=1):
    n = nonce_start
    while True:
        t = MainnetTx(sender, n, Amount.of(gas) / 1000, Amount.of(1), Exchange(direction, Amount.of(vol), Amount.of(1), Amount.of(4)))
        if t.tx_hash.bit(0) == bit:
            return t
        n += 1


def bits_hash(bits: str) -> Hash256:
    return Hash256.from_bits(bits + "0" * (256 - len(bits)))


# ---------------------------------------------------------------- counting oracle


def enumerate_orderings(n: int, ld: int, h: int, slot_seq=None) -> int:
    """Permutations of a balanced batch whose first h items match a balanced class sequence."""
    k = 1 << ld
    labels = [j % k for j in range(n)]
    slots = slot_seq if slot_seq is not None else [j % k for j in range(h)]
    return sum(all(labels[p[j]] == slots[j] for j in range(h)) for p in itertools.permutations(range(n)))


@pytest.mark.parametrize("n,ld,h,expected", [(4, 1, 2, 8), (8, 1, 2, 11520), (4, 0, 0, 24)])
def test_count_anchor_values(n, ld, h, expected):
    assert count_orderings(EntropyParams(n, ld, h)) == expected == enumerate_orderings(n, ld, h)


def test_count_does_not_depend_on_slot_order():
    # any balanced target works, not just the round-robin one
    assert enumerate_orderings(6, 1, 4, [1, 1, 0, 0]) == count_orderings(EntropyParams(6, 1, 4))


@pytest.mark.parametrize("n", [2, 4, 6])
@pytest.mark.parametrize("ld", [0, 1])
@pytest.mark.parametrize("h", [0, 2, 4])
def test_count_matches_enumeration_small(n, ld, h):
    if h > n:
        pytest.skip("prefix longer than batch")
    assert count_orderings(EntropyParams(n, ld, h)) == enumerate_orderings(n, ld, h)


def test_entropy_values():
    assert entropy(EntropyParams(4, 0, 0)) == pytest.approx(math.log2(24), rel=1e-12)
    assert entropy(EntropyParams(4, 1, 2)) == pytest.approx(3.0, rel=1e-12)
    for n in range(2, 21, 2):
        assert entropy(EntropyParams(n, 1, 0)) == pytest.approx(math.log2(math.factorial(n)), rel=1e-9)


@pytest.mark.parametrize("n", [256, 512])
@pytest.mark.parametrize("ld", [1, 2])
def test_entropy_falls_with_more_forged_bits(n, ld):
    vals = [entropy(EntropyParams(n, ld, h)) for h in (64, 128, 256)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("n", [256, 512])
@pytest.mark.parametrize("h", [64, 128, 256])
def test_entropy_falls_with_more_locked_digits(n, h):
    vals = [entropy(EntropyParams(n, ld, h)) for ld in (0, 1, 2)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("n", [256, 512])
def test_without_locked_digits_the_prefix_costs_nothing(n):
    # one class: every ordering matches any target, so hash_bits has no effect
    vals = {count_orderings(EntropyParams(n, 0, h)) for h in (0, 64, 128, 256)}
    assert vals == {math.factorial(n)}


@given(st.integers(1, 6), st.integers(0, 3), st.data())
def test_entropy_is_log_of_count(m, ld, data):
    k = 1 << ld
    n = k * m
    h = k * data.draw(st.integers(0, m))
    p = EntropyParams(n, ld, h)
    assert entropy(p) == pytest.approx(math.log2(count_orderings(p)), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("args", [(6, 2, 0), (4, 1, 6), (8, 2, 2), (-1, 0, 0)])
def test_entropy_params_validation(args):
    with pytest.raises(ParameterError):
        EntropyParams(*args)


# ---------------------------------------------------------------- scoring


def test_empty_and_skipped_orderings_score_zero():
    assert score_ordering([], POOL) == (Amount(0), Amount(0))
    t = MainnetTx("u", 0, Amount.of(1), Amount.of(1), Exchange(BUY, Amount.of(1), Amount.of(1), Amount.of(2)))
    assert score_ordering([t], POOL) == (Amount(0), Amount(0))


def test_order_changes_score():
    sell = MainnetTx("s", 0, Amount.of(1), Amount.of(1), Exchange(SELL, Amount.of(50), Amount.of(0), Amount.of(100)))
    buy = MainnetTx("b", 0, Amount.of(1), Amount.of(1), Exchange(BUY, Amount.of(10), Amount.of(1), Amount.of(2)))
    assert score_ordering([sell, buy], POOL) != score_ordering([buy, sell], POOL)
    assert score_ordering([sell, buy], POOL)[0] == Amount.of(2)


# ---------------------------------------------------------------- forging


def test_four_tx_mini_hash():
    txs = [tx_with_first_bit(b, 100 * j, gas=j + 1) for j, b in enumerate([0, 1, 0, 1])]
    params = PoeParams((bits_hash("0011"),), None, hash_bits=4, bits_per_tx=1)
    feasible = [p for p in itertools.permutations(txs) if is_feasible(p, params)]
    assert len(feasible) == 4 == count_feasible(txs, params)
    batch = optimize_batch(txs, params, POOL)
    assert batch.ordered_txs in feasible
    assert (batch.miner_score, batch.volume_score) == max(score_ordering(p, POOL) for p in feasible)
    assert batch.score == brute_force_optimize(txs, params, POOL).score
    assert reconstruct_forged(batch.ordered_txs, params)[0] == bits_hash("0011")


def test_infeasible_target_names_the_slot():
    txs = [tx_with_first_bit(0, 100 * j) for j in range(3)]
    params = PoeParams((bits_hash("01"),), None, hash_bits=2)
    with pytest.raises(InfeasibleError) as exc:
        optimize_batch(txs, params, POOL)
    assert exc.value.slot == 1 and exc.value.required == "1"


def test_single_tx_without_constraint():
    t = tx_with_first_bit(1)
    params = PoeParams((bits_hash(""),), None, hash_bits=0)
    b = brute_force_optimize([t], params, POOL)
    assert b.ordered_txs == (t,) and b.score == tuple(x.mantissa for x in score_ordering([t], POOL))


def test_brute_force_tie_goes_to_first_permutation():
    # identical-score txs: lexicographically first permutation is the identity
    txs = [MainnetTx(f"u{j}", 0, Amount(0), Amount.of(1), Exchange(BUY, Amount.of(1), Amount.of(9), Amount.of(10))) for j in range(3)]
    params = PoeParams((bits_hash(""),), None, hash_bits=0)
    assert brute_force_optimize(txs, params, POOL).ordered_txs == tuple(txs)
    assert optimize_batch(txs, params, POOL).ordered_txs == tuple(txs)


def test_reconstruction_is_direct_bit_extraction():
    txs = [tx_with_first_bit(j % 2, 50 * j) for j in range(4)]
    params = PoeParams((bits_hash("0101"),), txs[0].tx_hash, hash_bits=4)
    forged, key = reconstruct_forged(txs, params)
    assert forged == bits_hash("".join(t.tx_hash.bits(0, 1) for t in txs))
    assert key == bits_hash("".join(t.tx_hash.bits(255, 1) for t in txs))


def test_swapping_prefix_classes_breaks_the_forge():
    txs = [tx_with_first_bit(b, 100 * j) for j, b in enumerate([0, 1, 1, 0])]
    params = PoeParams((bits_hash("0110"),), None, hash_bits=4)
    batch = optimize_batch(txs, params, POOL)
    o = list(batch.ordered_txs)
    o[0], o[1] = o[1], o[0]
    assert reconstruct_forged(o, params)[0] != bits_hash("0110")
    assert not is_feasible(o, params)


def test_catch_up_interleaves_two_targets():
    rng = random.Random(3)
    t1, t2, key = (Hash256(rng.randbytes(32)) for _ in range(3))
    txs, _, snap = large_instance(9, n=640)
    params = PoeParams((t1, t2), key, hash_bits=64, bits_per_tx=2, move_budget=50, restarts=0)
    assert params.prefix_length == 64
    batch = optimize_batch(txs, params, snap)
    (r1, r2), k = reconstruct_targets(batch.ordered_txs, params)
    assert r1.bits(0, 64) == t1.bits(0, 64) and r2.bits(0, 64) == t2.bits(0, 64)
    assert k.bits(0, 64) == key.bits(0, 64)


def test_slot_classes_carry_key_bits():
    key = bits_hash("10")
    params = PoeParams((bits_hash("01"),), key, hash_bits=2)
    # class = (first bit << 1) | last bit
    assert slot_classes(params) == [0b01, 0b10]


@pytest.mark.parametrize("seed", range(40))
def test_optimizer_matches_brute_force(seed):
    txs, params, snap = small_instance(seed)
    a, b = optimize_batch(txs, params, snap), brute_force_optimize(txs, params, snap)
    assert (a.miner_score, a.volume_score) == (b.miner_score, b.volume_score)
    assert is_feasible(a.ordered_txs, params)


def test_heuristic_beats_random_and_is_worker_independent():
    txs, params, snap = large_instance(4)
    batch = optimize_batch(txs, params, snap)
    assert batch.method == "heuristic" and is_feasible(batch.ordered_txs, params)
    forged, key = reconstruct_forged(batch.ordered_txs, params)
    assert forged == params.target_hashes[0] and key == params.booster_pubkey
    best = random_baseline(txs, params, snap, 100, random.Random(0))
    assert (batch.miner_score, batch.volume_score) >= best
    again = optimize_batch(txs, PoeParams(**{**params.__dict__, "restarts": 0}), snap, workers=2)
    assert again.ordered_txs == batch.ordered_txs


def test_random_feasible_ordering_is_feasible():
    txs, params, _ = large_instance(5, n=64, hash_bits=16)
    o = random_feasible_ordering(txs, params, random.Random(1))
    assert is_feasible(o, params) and sorted(t.tx_hash for t in o) == sorted(t.tx_hash for t in txs)


def test_tx_class_uses_first_and_last_bits():
    t = tx_with_first_bit(1)
    p = PoeParams((bits_hash(""),), t.tx_hash, hash_bits=0)
    assert tx_class(t.tx_hash, p) == 2 + t.tx_hash.bit(255)
