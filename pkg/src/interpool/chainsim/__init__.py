"""Two-chain simulation: the alien chain and mainnet transaction model.

The mainnet block pipeline lives in :mod:`interpool.chainsim.mainnet`.
"""

from .alien import (
    EMPTY_LEAF,
    AlienBlock,
    AlienChain,
    AlienChainParams,
    NotYetFinal,
    Rejection,
    SpvProof,
    build_merkle_root,
    check_chain,
    final_block,
    final_height,
    finality_hash,
    fold_path,
    header_hash,
    make_spv_proof,
    merkle_path,
    mine_alien_block,
)
from .transactions import BUY, SELL, AlienTx, Exchange, MainnetTx, ProvideLiquidity, dedupe_mempool

__all__ = [
    "BUY",
    "EMPTY_LEAF",
    "SELL",
    "AlienBlock",
    "AlienChain",
    "AlienChainParams",
    "AlienTx",
    "Exchange",
    "MainnetTx",
    "NotYetFinal",
    "ProvideLiquidity",
    "Rejection",
    "SpvProof",
    "build_merkle_root",
    "check_chain",
    "dedupe_mempool",
    "final_block",
    "final_height",
    "finality_hash",
    "fold_path",
    "header_hash",
    "make_spv_proof",
    "merkle_path",
    "mine_alien_block",
]
