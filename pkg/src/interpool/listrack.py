"""Listen-and-track verification plus a plain two-party swap escrow.

Verification is two checks: the alien transaction carries a valid signature
from its sender, and its hash folds along a Merkle path up to a header whose
hash equals the forged hash recorded on mainnet for that alien height.

The swap: Mike sells native coin for Alice's alien coin.  Mike's native funds
and Alice's native collateral sit in escrow until Alice proves the alien
transfer (she gets Mike's funds and her collateral back) or the deadline
passes (Mike is refunded and receives Alice's collateral).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional

from .chainsim.alien import SpvProof, fold_path, header_hash
from .chainsim.transactions import AlienTx
from .core import ZERO, Amount, Encoder, Event, EventLog, Hash256, InterpoolError, KeyRegistry, Wallets, sign

__all__ = [
    "Swap",
    "SwapTerms",
    "account_of",
    "check_spv",
    "expire_swap",
    "open_swap",
    "sign_terms",
    "submit_alien_proof",
    "verify_signature",
    "verify_spv",
]


class SwapError(InterpoolError):
    pass


def verify_signature(pubkey: Hash256, tx: AlienTx, registry: KeyRegistry) -> bool:
    """True when ``tx`` is sent by ``pubkey`` and signed by it."""
    return tx.from_pubkey == pubkey and tx.verify_signature(registry)


def check_spv(proof: SpvProof, forged_hash: Hash256) -> Optional[str]:
    """None when the proof folds to ``forged_hash``; otherwise the failure reason."""
    n = len(proof.path)
    if proof.leaf_index < 0 or proof.leaf_index >> n:
        return "path-mismatch"
    # side flags must agree with the leaf position, level by level
    for level, (_, side) in enumerate(proof.path):
        expect = "left" if (proof.leaf_index >> level) & 1 else "right"
        if side != expect:
            return "path-mismatch"
    if fold_path(proof.tx.tx_hash, list(proof.path)) != proof.merkle_root:
        return "path-mismatch"
    if proof.block_height < 0 or header_hash(proof.prev_hash, proof.merkle_root, proof.block_height) != forged_hash:
        return "header-mismatch"
    return None


def verify_spv(proof: SpvProof, forged_hash: Hash256) -> bool:
    return check_spv(proof, forged_hash) is None


def account_of(pubkey: Hash256) -> str:
    """Wallet account name used for a mainnet public key."""
    return pubkey.hex()


@dataclass(frozen=True)
class SwapTerms:
    mike_pubkey_mainnet: Hash256
    alice_pubkey_mainnet: Hash256
    mike_pubkey_alien: Hash256
    alice_pubkey_alien: Hash256
    volume_native: Amount
    volume_alien: Amount
    deadline_block: int

    def __post_init__(self):
        if self.volume_native <= 0 or self.volume_alien <= 0:
            raise ValueError("swap volumes must be positive")

    def payload(self) -> bytes:
        return (
            Encoder()
            .text("swap-terms")
            .hash(self.mike_pubkey_mainnet)
            .hash(self.alice_pubkey_mainnet)
            .hash(self.mike_pubkey_alien)
            .hash(self.alice_pubkey_alien)
            .amount(self.volume_native)
            .amount(self.volume_alien)
            .u64(self.deadline_block)
            .bytes()
        )


DEFAULT_DEADLINE = 6


def sign_terms(secret: bytes, terms: SwapTerms) -> Hash256:
    return sign(secret, terms.payload())


SwapStateName = Literal["agreed", "locked", "completed", "failed"]


@dataclass
class Swap:
    terms: SwapTerms
    mike_locked: Amount = ZERO
    alice_collateral: Amount = ZERO
    state: SwapStateName = "agreed"
    slash_recipient: Optional[str] = None
    settled_tx: Optional[Hash256] = None
    events: EventLog = field(default_factory=EventLog, repr=False)

    @property
    def deadline_block(self) -> int:
        return self.terms.deadline_block

    @property
    def escrowed(self) -> Amount:
        return self.mike_locked + self.alice_collateral if self.state == "locked" else ZERO

    def _emit(self, block: int, kind: str, **payload) -> Event:
        return self.events.emit(block, kind, **payload)


def open_swap(
    terms: SwapTerms,
    mike_sig: Hash256 | None,
    alice_sig: Hash256 | None,
    alice_collateral: Amount | None,
    wallets: Wallets,
    registry: KeyRegistry,
    *,
    block: int = 0,
    slash_recipient: Optional[str] = None,
) -> Swap:
    """Check both signatures over the terms, then move funds and collateral into escrow."""
    if alice_collateral is None:
        alice_collateral = terms.volume_native
    msg = terms.payload()
    if mike_sig is None or not registry.verify(terms.mike_pubkey_mainnet, msg, mike_sig):
        raise SwapError("missing or invalid signature from Mike")
    if alice_sig is None or not registry.verify(terms.alice_pubkey_mainnet, msg, alice_sig):
        raise SwapError("missing or invalid signature from Alice")
    if alice_collateral <= 0:
        raise SwapError("collateral is mandatory")
    mike, alice = account_of(terms.mike_pubkey_mainnet), account_of(terms.alice_pubkey_mainnet)
    if wallets.balance(mike) < terms.volume_native:
        raise SwapError("Mike cannot fund the swap")
    if wallets.balance(alice) < alice_collateral:
        raise SwapError("Alice cannot post the collateral")
    wallets.debit(mike, terms.volume_native)
    wallets.debit(alice, alice_collateral)
    swap = Swap(terms, terms.volume_native, alice_collateral, "locked", slash_recipient or mike)
    swap._emit(block, "swap_locked", mike_locked=swap.mike_locked, alice_collateral=alice_collateral,
               deadline_block=terms.deadline_block)
    return swap


def submit_alien_proof(
    swap: Swap,
    raw_tx: AlienTx,
    proof: SpvProof,
    forged_hashes: Mapping[int, Hash256],
    wallets: Wallets,
    registry: KeyRegistry,
    *,
    block: int,
) -> tuple[bool, str]:
    """Release the escrow to Alice on a valid proof; ``(ok, reason)``."""
    reason = _proof_problem(swap, raw_tx, proof, forged_hashes, registry, block)
    if reason:
        swap._emit(block, "swap_proof_rejected", reason=reason)
        return False, reason
    alice = account_of(swap.terms.alice_pubkey_mainnet)
    wallets.credit(alice, swap.mike_locked + swap.alice_collateral)
    swap._emit(block, "swap_completed", paid=swap.mike_locked, collateral_returned=swap.alice_collateral,
               alien_tx=raw_tx.tx_hash)
    swap.settled_tx = raw_tx.tx_hash
    swap.state = "completed"
    return True, ""


def _proof_problem(swap, raw_tx, proof, forged_hashes, registry, block) -> str:
    if swap.state != "locked":
        return "not-locked"
    if block > swap.deadline_block:
        return "deadline-passed"
    if proof.tx != raw_tx:
        return "tx-mismatch"
    if not verify_signature(swap.terms.alice_pubkey_alien, raw_tx, registry):
        return "bad-signature"
    forged = forged_hashes.get(proof.block_height)
    if forged is None:
        return "unknown-height"
    why = check_spv(proof, forged)
    if why:
        return why
    if raw_tx.to_pubkey != swap.terms.mike_pubkey_alien:
        return "wrong-recipient"
    if raw_tx.amount < swap.terms.volume_alien:
        return "wrong-amount"
    return ""


def expire_swap(swap: Swap, block: int, wallets: Wallets) -> bool:
    """Refund Mike and slash Alice once the deadline has passed; no-op otherwise."""
    if swap.state != "locked" or block <= swap.deadline_block:
        return False
    mike = account_of(swap.terms.mike_pubkey_mainnet)
    wallets.credit(mike, swap.mike_locked)
    wallets.credit(swap.slash_recipient or mike, swap.alice_collateral)
    swap._emit(block, "swap_failed", refunded=swap.mike_locked, slashed=swap.alice_collateral,
               slash_recipient=swap.slash_recipient)
    swap.state = "failed"
    return True
