import pytest

from interpool.chainsim.alien import (
    EMPTY_LEAF,
    AlienBlock,
    AlienChain,
    AlienChainParams,
    NotYetFinal,
    build_merkle_root,
    check_chain,
    finality_hash,
    fold_path,
    make_spv_proof,
    merkle_path,
    mine_alien_block,
)
from interpool.chainsim.transactions import AlienTx
from interpool.core import Amount, Hash256, hash256
from interpool.listrack import verify_spv


def leaf(i):
    return hash256(bytes([i]))


def test_merkle_root_small_cases():
    a, b, c = leaf(1), leaf(2), leaf(3)
    assert build_merkle_root([a]) == a
    assert build_merkle_root([a, b]) == hash256(a.data + b.data)
    assert build_merkle_root([a, b, c]) == hash256(hash256(a.data + b.data).data + hash256(c.data + c.data).data)
    with pytest.raises(ValueError):
        build_merkle_root([])


def test_four_leaf_path_for_index_two():
    hs = [leaf(i) for i in range(4)]
    path = merkle_path(hs, 2)
    h01 = hash256(hs[0].data + hs[1].data)
    assert path == [(hs[3], "right"), (h01, "left")]
    assert fold_path(hs[2], path) == build_merkle_root(hs)


@pytest.mark.parametrize("n", range(1, 12))
def test_every_path_folds_to_root(n):
    hs = [leaf(i) for i in range(n)]
    root = build_merkle_root(hs)
    for i in range(n):
        assert fold_path(hs[i], merkle_path(hs, i)) == root


def test_empty_block_uses_sentinel_leaf(registry):
    chain = AlienChain(registry)
    block, rejected = mine_alien_block(chain, [])
    assert block.merkle_root == EMPTY_LEAF == hash256(bytes(32))
    assert not rejected and block.height == 1 and block.prev_hash == chain.blocks[0].header_hash


def test_single_tx_block_and_proof(registry):
    k, m = registry.new_key("k"), registry.new_key("m")
    chain = AlienChain(registry)
    chain.fund(k.pubkey, Amount.of(5))
    tx = AlienTx.signed(k, m.pubkey, Amount.of(2), 0)
    block, rejected = mine_alien_block(chain, [tx])
    assert not rejected and block.merkle_root == tx.tx_hash
    proof = make_spv_proof(block, 0)
    assert proof.path == ()
    assert verify_spv(proof, block.header_hash)
    assert chain.balance(m.pubkey) == Amount.of(2)


def test_rejections(registry):
    k, m = registry.new_key("k"), registry.new_key("m")
    chain = AlienChain(registry)
    chain.fund(k.pubkey, Amount.of(5))
    good = AlienTx.signed(k, m.pubkey, Amount.of(1), 0)
    replay = AlienTx.signed(k, m.pubkey, Amount.of(1), 0)
    forged = AlienTx(k.pubkey, m.pubkey, Amount.of(1), 1, Hash256(bytes(32)))
    broke = AlienTx.signed(k, m.pubkey, Amount.of(50), 2)
    block, rejected = mine_alien_block(chain, [good, replay, forged, broke])
    assert [t.tx_hash for t in block.txs] == [good.tx_hash]
    assert [r.reason for r in rejected] == ["replayed-nonce", "bad-signature", "insufficient-balance"]


def test_finality_depth(registry):
    chain = AlienChain(registry)
    for _ in range(10):
        mine_alien_block(chain, [])
    assert finality_hash(chain, AlienChainParams(0)) == chain.tip.header_hash
    assert finality_hash(chain, AlienChainParams(6)) == chain.blocks[4].header_hash
    short = AlienChain(registry)
    for _ in range(3):
        mine_alien_block(short, [])
    with pytest.raises(NotYetFinal):
        finality_hash(short, AlienChainParams(6))


def test_chain_recomputes(busy_chain):
    check_chain(busy_chain)
    b = busy_chain.blocks[3]
    assert AlienBlock.assemble(b.height, b.prev_hash, list(b.txs)).header_hash == b.header_hash


def test_tx_serialization_roundtrip(busy_chain):
    for b in busy_chain.blocks:
        for tx in b.txs:
            assert AlienTx.deserialize(tx.serialize()) == tx
