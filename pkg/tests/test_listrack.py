"""SPV verification, perturbation suite and the vanilla swap state machine."""

from dataclasses import replace

import pytest

from interpool.chainsim.alien import AlienChain, SpvProof, make_spv_proof, mine_alien_block
from interpool.chainsim.transactions import AlienTx
from interpool.cli import swap_demo
from interpool.core import Amount, Hash256, Wallets
from interpool.listrack import (
    SwapError,
    SwapTerms,
    account_of,
    check_spv,
    expire_swap,
    open_swap,
    sign_terms,
    submit_alien_proof,
    verify_spv,
)


def flip(data: bytes, bit: int) -> bytes:
    b = bytearray(data)
    b[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(b)


def flip_hash(h: Hash256, bit: int) -> Hash256:
    return Hash256(flip(h.data, bit))


def all_proofs(chain):
    for b in chain.blocks:
        for i in range(len(b.txs)):
            yield b, make_spv_proof(b, i)


def single_bit_perturbations(proof: SpvProof):
    """Every proof obtained by flipping exactly one bit of tx bytes, path hashes, side flags or header fields."""
    raw = proof.tx.serialize()
    for bit in range(len(raw) * 8):
        yield "tx", replace(proof, tx=AlienTx.deserialize(flip(raw, bit)))
    for j, (h, side) in enumerate(proof.path):
        for bit in range(256):
            path = list(proof.path)
            path[j] = (flip_hash(h, bit), side)
            yield "path", replace(proof, path=tuple(path))
        path = list(proof.path)
        path[j] = (h, "left" if side == "right" else "right")
        yield "side", replace(proof, path=tuple(path))
    for bit in range(256):
        yield "prev", replace(proof, prev_hash=flip_hash(proof.prev_hash, bit))
        yield "root", replace(proof, merkle_root=flip_hash(proof.merkle_root, bit))
    for bit in range(64):
        yield "height", replace(proof, block_height=proof.block_height ^ (1 << bit))


def test_valid_proofs_verify(busy_chain):
    count = 0
    for block, proof in all_proofs(busy_chain):
        assert verify_spv(proof, block.header_hash)
        assert SpvProof.from_json(proof.to_json()) == proof
        count += 1
    assert count == 22


def test_every_single_bit_perturbation_fails(busy_chain):
    kinds = {}
    for block, proof in all_proofs(busy_chain):
        for kind, bad in single_bit_perturbations(proof):
            kinds[kind] = kinds.get(kind, 0) + 1
            assert not verify_spv(bad, block.header_hash), (block.height, kind)
    assert set(kinds) == {"tx", "path", "side", "prev", "root", "height"}


def test_wrong_forged_hash_and_reasons(busy_chain):
    block = busy_chain.blocks[4]
    proof = make_spv_proof(block, 1)
    assert check_spv(proof, busy_chain.blocks[3].header_hash) == "header-mismatch"
    bad = replace(proof, path=((flip_hash(proof.path[0][0], 0), proof.path[0][1]),) + proof.path[1:])
    assert check_spv(bad, block.header_hash) == "path-mismatch"
    assert not verify_spv(replace(proof, leaf_index=proof.leaf_index + 8), block.header_hash)


# ---------------------------------------------------------------- swap


@pytest.fixture
def swap_env(registry):
    mike_m, alice_m = registry.new_key("mm"), registry.new_key("am")
    mike_a, alice_a = registry.new_key("ma"), registry.new_key("aa")
    wallets = Wallets()
    wallets.credit(account_of(mike_m.pubkey), Amount.of(100))
    wallets.credit(account_of(alice_m.pubkey), Amount.of(50))
    terms = SwapTerms(mike_m.pubkey, alice_m.pubkey, mike_a.pubkey, alice_a.pubkey, Amount.of(25), Amount.of(4), 5)
    chain = AlienChain(registry)
    chain.fund(alice_a.pubkey, Amount.of(20))
    return dict(mm=mike_m, am=alice_m, ma=mike_a, aa=alice_a, wallets=wallets, terms=terms, chain=chain, reg=registry)


def _open(e, collateral=Amount.of(10)):
    t = e["terms"]
    return open_swap(t, sign_terms(e["mm"].secret, t), sign_terms(e["am"].secret, t), collateral, e["wallets"], e["reg"],
                     block=0)


def _mined_proof(e, tx):
    block, rejected = mine_alien_block(e["chain"], [tx])
    assert not rejected
    return make_spv_proof(block, 0), {block.height: block.header_hash}


def test_open_requires_both_signatures_and_collateral(swap_env):
    e, t = swap_env, swap_env["terms"]
    with pytest.raises(SwapError):
        open_swap(t, sign_terms(e["mm"].secret, t), None, Amount.of(10), e["wallets"], e["reg"])
    with pytest.raises(SwapError):
        open_swap(t, sign_terms(e["mm"].secret, t), sign_terms(e["mm"].secret, t), Amount.of(10), e["wallets"], e["reg"])
    with pytest.raises(SwapError):
        _open(e, collateral=Amount(0))
    swap = _open(e)
    assert swap.state == "locked" and swap.escrowed == Amount.of(35)


def test_happy_path_pays_alice(swap_env):
    e = swap_env
    swap = _open(e)
    tx = AlienTx.signed(e["aa"], e["ma"].pubkey, Amount.of(4), 0)
    proof, forged = _mined_proof(e, tx)
    ok, why = submit_alien_proof(swap, tx, proof, forged, e["wallets"], e["reg"], block=3)
    assert ok and why == "" and swap.state == "completed"
    w = e["wallets"]
    assert w.balance(account_of(e["mm"].pubkey)) == Amount.of(75)
    assert w.balance(account_of(e["am"].pubkey)) == Amount.of(75)
    # expiry after completion changes nothing
    assert not expire_swap(swap, 99, w)
    assert w.balance(account_of(e["mm"].pubkey)) == Amount.of(75)


def test_rejections_keep_swap_locked(swap_env):
    e = swap_env
    swap = _open(e)
    wrong_to = AlienTx.signed(e["aa"], e["mm"].pubkey, Amount.of(4), 0)
    proof, forged = _mined_proof(e, wrong_to)
    assert submit_alien_proof(swap, wrong_to, proof, forged, e["wallets"], e["reg"], block=1) == (False, "wrong-recipient")
    short = AlienTx.signed(e["aa"], e["ma"].pubkey, Amount.of(4) - Amount.ulp(), 1)
    proof, forged = _mined_proof(e, short)
    assert submit_alien_proof(swap, short, proof, forged, e["wallets"], e["reg"], block=1) == (False, "wrong-amount")
    good = AlienTx.signed(e["aa"], e["ma"].pubkey, Amount.of(4), 2)
    proof, _ = _mined_proof(e, good)
    assert submit_alien_proof(swap, good, proof, {}, e["wallets"], e["reg"], block=1) == (False, "unknown-height")
    assert swap.state == "locked"


def test_timeout_refunds_mike_and_slashes_alice(swap_env):
    e = swap_env
    swap = _open(e)
    w = e["wallets"]
    assert not expire_swap(swap, 5, w)  # deadline block itself still open
    assert expire_swap(swap, 6, w)
    assert swap.state == "failed"
    assert w.balance(account_of(e["mm"].pubkey)) == Amount.of(110)
    assert w.balance(account_of(e["am"].pubkey)) == Amount.of(40)


def test_proof_at_deadline_settles_before_expiry(swap_env):
    e = swap_env
    swap = _open(e)
    tx = AlienTx.signed(e["aa"], e["ma"].pubkey, Amount.of(4), 0)
    proof, forged = _mined_proof(e, tx)
    block = swap.deadline_block
    ok, _ = submit_alien_proof(swap, tx, proof, forged, e["wallets"], e["reg"], block=block)
    assert ok
    assert not expire_swap(swap, block + 1, e["wallets"])
    assert swap.state == "completed"


def test_swap_demo_balances():
    happy, timeout = swap_demo(True), swap_demo(False)
    assert happy["state"] == "completed"
    assert happy["after"] == {"mike": Amount.of(75), "alice": Amount.of(75)}
    assert happy["alien"] == {"mike": Amount.of(4), "alice": Amount.of(6)}
    assert timeout["state"] == "failed"
    assert timeout["after"] == {"mike": Amount.of(110), "alice": Amount.of(40)}
