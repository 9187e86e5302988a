"""Alien chain model: Merkle trees, blocks, SPV proofs and finality depth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

from ..core import Amount, Encoder, Hash256, InterpoolError, KeyRegistry, hash256
from .transactions import AlienTx

Side = Literal["left", "right"]

# Leaf used for blocks without transactions.
EMPTY_LEAF = hash256(bytes(32))


class NotYetFinal(InterpoolError):
    pass


def _parent(left: Hash256, right: Hash256) -> Hash256:
    return hash256(left.data + right.data)


def merkle_levels(leaves: list[Hash256]) -> list[list[Hash256]]:
    if not leaves:
        raise ValueError("cannot build a Merkle tree without leaves")
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        cur = levels[-1]
        if len(cur) % 2:
            cur = cur + [cur[-1]]
        levels.append([_parent(cur[i], cur[i + 1]) for i in range(0, len(cur), 2)])
    return levels


def build_merkle_root(leaves: list[Hash256]) -> Hash256:
    """Pairwise SHA-256 tree; an odd node is paired with itself."""
    return merkle_levels(leaves)[-1][0]


def merkle_path(leaves: list[Hash256], index: int) -> list[tuple[Hash256, Side]]:
    """Sibling hashes from leaf to root; ``side`` is where the sibling sits."""
    if not 0 <= index < len(leaves):
        raise IndexError(f"leaf index {index} out of range for {len(leaves)} leaves")
    path: list[tuple[Hash256, Side]] = []
    for level in merkle_levels(leaves)[:-1]:
        if index % 2:
            path.append((level[index - 1], "left"))
        else:
            sib = level[index + 1] if index + 1 < len(level) else level[index]
            path.append((sib, "right"))
        index //= 2
    return path


def fold_path(leaf: Hash256, path: list[tuple[Hash256, Side]]) -> Hash256:
    node = leaf
    for sibling, side in path:
        node = _parent(sibling, node) if side == "left" else _parent(node, sibling)
    return node


def header_hash(prev_hash: Hash256, merkle_root: Hash256, height: int) -> Hash256:
    return hash256(Encoder().hash(prev_hash).hash(merkle_root).u64(height).bytes())


@dataclass(frozen=True)
class AlienBlock:
    height: int
    prev_hash: Hash256
    merkle_root: Hash256
    header_hash: Hash256
    txs: tuple[AlienTx, ...]

    @classmethod
    def assemble(cls, height: int, prev_hash: Hash256, txs: list[AlienTx]) -> AlienBlock:
        leaves = [t.tx_hash for t in txs] or [EMPTY_LEAF]
        root = build_merkle_root(leaves)
        return cls(height, prev_hash, root, header_hash(prev_hash, root, height), tuple(txs))

    def leaves(self) -> list[Hash256]:
        return [t.tx_hash for t in self.txs] or [EMPTY_LEAF]

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
            "header_hash": self.header_hash.hex(),
            "txs": [t.tx_hash.hex() for t in self.txs],
        }


@dataclass(frozen=True)
class AlienChainParams:
    finality_depth: int = 6
    blocks_per_mainnet_block: int = 1

    def __post_init__(self):
        if self.finality_depth < 0:
            raise ValueError("finality_depth must be >= 0")
        if self.blocks_per_mainnet_block < 1:
            raise ValueError("blocks_per_mainnet_block must be >= 1")


@dataclass(frozen=True)
class SpvProof:
    tx: AlienTx
    leaf_index: int
    path: tuple[tuple[Hash256, Side], ...]
    block_height: int
    prev_hash: Hash256
    merkle_root: Hash256

    def to_json(self) -> dict:
        return {
            "tx": self.tx.serialize().hex(),
            "leaf_index": self.leaf_index,
            "path": [[h.hex(), side] for h, side in self.path],
            "block_height": self.block_height,
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> SpvProof:
        return cls(
            tx=AlienTx.deserialize(bytes.fromhex(obj["tx"])),
            leaf_index=int(obj["leaf_index"]),
            path=tuple((Hash256.from_hex(h), side) for h, side in obj["path"]),
            block_height=int(obj["block_height"]),
            prev_hash=Hash256.from_hex(obj["prev_hash"]),
            merkle_root=Hash256.from_hex(obj["merkle_root"]),
        )


def make_spv_proof(block: AlienBlock, leaf_index: int) -> SpvProof:
    if not 0 <= leaf_index < len(block.txs):
        raise IndexError(f"block {block.height} has {len(block.txs)} txs, no index {leaf_index}")
    return SpvProof(
        tx=block.txs[leaf_index],
        leaf_index=leaf_index,
        path=tuple(merkle_path(block.leaves(), leaf_index)),
        block_height=block.height,
        prev_hash=block.prev_hash,
        merkle_root=block.merkle_root,
    )


@dataclass(frozen=True)
class Rejection:
    tx: AlienTx
    reason: str


@dataclass
class AlienChain:
    """Append-only alien chain with account balances; no forks."""

    registry: KeyRegistry
    blocks: list[AlienBlock] = field(default_factory=list)
    balances: dict[Hash256, Amount] = field(default_factory=dict)
    nonces: dict[Hash256, int] = field(default_factory=dict)
    tx_index: dict[Hash256, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.blocks:
            self.blocks.append(AlienBlock.assemble(0, Hash256.zero(), []))

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    @property
    def tip(self) -> AlienBlock:
        return self.blocks[-1]

    def fund(self, pubkey: Hash256, amount: Amount) -> None:
        self.balances[pubkey] = self.balances.get(pubkey, Amount(0)) + amount

    def balance(self, pubkey: Hash256) -> Amount:
        return self.balances.get(pubkey, Amount(0))

    def locate(self, tx_hash: Hash256) -> tuple[int, int] | None:
        """(height, leaf index) of a mined tx."""
        return self.tx_index.get(tx_hash)

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "blocks": [b.to_json() for b in self.blocks],
            "balances": {k.hex(): v.mantissa for k, v in sorted(self.balances.items())},
        }


def mine_alien_block(chain: AlienChain, pending: list[AlienTx]) -> tuple[AlienBlock, list[Rejection]]:
    """Append one block holding every valid pending tx, in order."""
    accepted: list[AlienTx] = []
    rejected: list[Rejection] = []
    balances = dict(chain.balances)
    nonces = dict(chain.nonces)
    for tx in pending:
        if not tx.verify_signature(chain.registry):
            rejected.append(Rejection(tx, "bad-signature"))
            continue
        last = nonces.get(tx.from_pubkey, -1)
        if tx.nonce <= last:
            rejected.append(Rejection(tx, "replayed-nonce"))
            continue
        if tx.amount <= 0:
            rejected.append(Rejection(tx, "non-positive-amount"))
            continue
        have = balances.get(tx.from_pubkey, Amount(0))
        if have < tx.amount:
            rejected.append(Rejection(tx, "insufficient-balance"))
            continue
        balances[tx.from_pubkey] = have - tx.amount
        balances[tx.to_pubkey] = balances.get(tx.to_pubkey, Amount(0)) + tx.amount
        nonces[tx.from_pubkey] = tx.nonce
        accepted.append(tx)
    block = AlienBlock.assemble(chain.height + 1, chain.tip.header_hash, accepted)
    chain.blocks.append(block)
    chain.balances = balances
    chain.nonces = nonces
    for i, tx in enumerate(accepted):
        chain.tx_index[tx.tx_hash] = (block.height, i)
    return block, rejected


def finality_hash(chain: AlienChain, params: AlienChainParams) -> Hash256:
    return final_block(chain, params).header_hash


def final_block(chain: AlienChain, params: AlienChainParams) -> AlienBlock:
    target = chain.height - params.finality_depth
    if target < 0:
        raise NotYetFinal(f"chain height {chain.height} below finality depth {params.finality_depth}")
    return chain.blocks[target]


def final_height(chain: AlienChain, params: AlienChainParams) -> int:
    """Highest final height, or -1 when nothing is final yet."""
    return chain.height - params.finality_depth


def check_chain(chain: AlienChain) -> None:
    """Recompute every root and header from raw txs; raises on any mismatch."""
    prev = Hash256.zero()
    for i, b in enumerate(chain.blocks):
        if b.height != i or b.prev_hash != prev:
            raise AssertionError(f"linkage broken at height {i}")
        again = AlienBlock.assemble(b.height, b.prev_hash, list(b.txs))
        if again.merkle_root != b.merkle_root or again.header_hash != b.header_hash:
            raise AssertionError(f"block {i} does not recompute")
        prev = b.header_hash


__all__ = [
    "EMPTY_LEAF",
    "AlienBlock",
    "AlienChain",
    "AlienChainParams",
    "NotYetFinal",
    "Rejection",
    "SpvProof",
    "build_merkle_root",
    "check_chain",
    "final_block",
    "final_height",
    "finality_hash",
    "fold_path",
    "header_hash",
    "make_spv_proof",
    "merkle_path",
    "mine_alien_block",
]
