"""Burn claims: escrow, provider assignment, proof settlement, timeouts and exit penalties.

A user redeems intertokens for alien coin by escrowing them in a claim.  The
claim is handed to a provider (full providers first, then regular providers
in join-order rotation) who must transfer the alien coin before a deadline
and prove it.  A proven claim burns the escrow and releases part of the
provider's collateral; an expired one slashes the collateral and pays the
claimant in native coin instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .amm import UndefinedRatio, pool_ratio
from .chainsim.alien import SpvProof, header_hash
from .chainsim.transactions import AlienTx
from .core import ZERO, Amount, Hash256, InterpoolError, KeyRegistry, min_amount
from .listrack import check_spv, verify_signature
from .state import BurnClaim, BurnParams, BurnQueue, InterpoolState, ProviderPosition

__all__ = [
    "Assignment",
    "BoosterClaim",
    "apply_assignments",
    "assign_claims",
    "claim_burn",
    "early_exit_penalty",
    "penalty_for_distance",
    "plan_assignments",
    "projected_distance",
    "settle_burn_proof",
    "timeout_burns",
    "update_provider_key",
]


class BurnError(InterpoolError):
    pass


def claim_burn(state: InterpoolState, user: str, amount: Amount, claimant_alien_pubkey: Hash256) -> BurnClaim:
    if amount <= 0:
        raise ValueError("burn amount must be positive")
    state.wallets.debit(user, amount, "intertoken")
    claim = BurnClaim(
        claim_id=len(state.claims),
        claimant_id=user,
        amount=amount,
        claimant_alien_pubkey=claimant_alien_pubkey,
        created_block=state.height,
    )
    state.claims[claim.claim_id] = claim
    state.emit("burn_claimed", claim_id=claim.claim_id, claimant=user, amount=amount,
               alien_pubkey=claimant_alien_pubkey)
    return claim


# ---------------------------------------------------------------- assignment


@dataclass(frozen=True)
class Assignment:
    claim_id: int
    provider_id: str
    deadline_block: int
    route: str  # "forced" | "full" | "rotation"


def _idle_since(pos: ProviderPosition) -> int:
    return pos.last_assignment_block if pos.last_assignment_block is not None else pos.join_block


def plan_assignments(
    queue: BurnQueue,
    claims: Mapping[int, BurnClaim],
    positions: Mapping[str, ProviderPosition],
    block: int,
    params: BurnParams,
    appetite: Amount | None = None,
) -> tuple[list[Assignment], list[int]]:
    """Match open claims to providers without mutating anything.

    Returns the assignments and the ids of claims no provider could take.
    Order of preference: regular providers idle for ``never_liquidity_limit``
    blocks, then full providers, then regulars in rotation.  ``appetite``
    caps the rotation volume; forced and full routes are not capped.
    """
    open_claims = sorted((c for c in claims.values() if c.state == "open"), key=lambda c: c.claim_id)
    busy = {p.provider_id for p in positions.values() if p.assigned_claim is not None}
    last_seq = queue.last_served_seq
    budget = appetite
    out: list[Assignment] = []
    stranded: list[int] = []

    def eligible(pid: str, amount: Amount) -> bool:
        pos = positions.get(pid)
        return (
            pos is not None
            and pos.is_open
            and pid not in busy
            and pos.flag_deadline is None
            and pos.obligation >= amount
        )

    for claim in open_claims:
        regulars = queue.rotation(last_seq)
        forced = [
            pid for pid in sorted(regulars, key=lambda p: queue.seq[p])
            if eligible(pid, claim.amount) and block - _idle_since(positions[pid]) >= params.never_liquidity_limit
        ]
        fulls = sorted(
            (pid for pid in queue.order if pid in queue.full and eligible(pid, claim.amount)),
            key=lambda p: (positions[p].assignments, queue.seq[p]),
        )
        chosen: Optional[str] = None
        route = ""
        if forced:
            chosen, route = forced[0], "forced"
        elif fulls:
            chosen, route = fulls[0], "full"
        elif budget is None or budget >= claim.amount:
            for pid in regulars:
                if eligible(pid, claim.amount):
                    chosen, route = pid, "rotation"
                    break
        if chosen is None:
            if not any(eligible(p, claim.amount) for p in queue.order):
                stranded.append(claim.claim_id)
            continue
        if route != "full":
            last_seq = queue.seq[chosen]
        if route == "rotation" and budget is not None:
            budget = budget - claim.amount
        window = params.full_transfer_window if route == "full" else params.transfer_window
        out.append(Assignment(claim.claim_id, chosen, block + window + params.finality_latency, route))
        busy.add(chosen)
    return out, stranded


def apply_assignments(state: InterpoolState, assignments: Sequence[Assignment]) -> None:
    for a in assignments:
        claim = state.claims[a.claim_id]
        pos = state.positions[a.provider_id]
        claim.state = "assigned"
        claim.assigned_provider = a.provider_id
        claim.assigned_block = state.height
        claim.deadline_block = a.deadline_block
        pos.assigned_claim = a.claim_id
        pos.last_assignment_block = state.height
        pos.assignments += 1
        if a.route != "full":
            state.queue.last_served_seq = state.queue.seq[a.provider_id]
        state.emit(
            "burn_assigned",
            claim_id=a.claim_id,
            provider_id=a.provider_id,
            route=a.route,
            amount=claim.amount,
            deadline_block=a.deadline_block,
            claimant_alien_pubkey=claim.claimant_alien_pubkey,
            provider_alien_pubkey=pos.alien_pubkey,
        )


def assign_claims(state: InterpoolState) -> list[Assignment]:
    """Plan and apply assignments for this block; strand-escalate the rest once."""
    appetite = state.queue.burning_appetite or None
    plan, stranded = plan_assignments(
        state.queue, state.claims, state.positions, state.height, state.params.burn, appetite
    )
    apply_assignments(state, plan)
    for cid in stranded:
        claim = state.claims[cid]
        if not claim.escalated:
            claim.escalated = True
            state.emit("burn_escalated", claim_id=cid, amount=claim.amount, reason="no-eligible-provider")
    return plan


# ---------------------------------------------------------------- settlement


@dataclass(frozen=True)
class BoosterClaim:
    """A forged hash a booster put on mainnet for some alien height."""

    height: int
    booster: str
    forged: Hash256


def settle_burn_proof(
    state: InterpoolState,
    claim: BurnClaim,
    raw_tx: AlienTx,
    proof: SpvProof,
    forged_hashes: Mapping[int, Hash256],
    booster_claims: Sequence[BoosterClaim] = (),
) -> tuple[bool, str]:
    """Verify a provider's alien transfer and close the claim.

    ``forged_hashes`` maps alien height to the hash accepted on mainnet.
    ``booster_claims`` lists every hash any booster asserted (accepted or
    not); a verified header that disagrees with one raises a forgery alarm.
    """
    reason = _burn_proof_problem(state, claim, raw_tx, proof, forged_hashes, state.registry)
    if reason:
        state.emit("burn_proof_rejected", claim_id=claim.claim_id, reason=reason)
        return False, reason
    pos = state.positions[claim.assigned_provider]  # type: ignore[index]
    before = pos.obligation
    released = pos.collateral * Fraction(claim.amount.mantissa, before.mantissa)
    released = min_amount(released, pos.collateral)
    pos.collateral -= released
    pos.obligation = before - claim.amount
    if released:
        state.wallets.credit(pos.owner, released, "native")
    state.pool.supply.burned_total += claim.amount
    claim.state = "proven"
    claim.proof_tx = raw_tx.tx_hash
    pos.assigned_claim = None
    state.used_alien_txs.add(raw_tx.tx_hash)
    if pos.obligation <= 0 and not pos.coins_unlocked:
        pos.coins_unlocked = True
        state.emit("coins_unlocked", provider_id=pos.provider_id)
    state.emit(
        "burn_proven",
        claim_id=claim.claim_id,
        provider_id=pos.provider_id,
        amount=claim.amount,
        collateral_released=released,
        alien_tx=raw_tx.tx_hash,
        alien_height=proof.block_height,
    )
    seen = header_hash(proof.prev_hash, proof.merkle_root, proof.block_height)
    for bc in booster_claims:
        if bc.height != proof.block_height or bc.forged == seen:
            continue
        key = (bc.height, bc.booster)
        if key in state.alarms_raised:
            continue
        state.alarms_raised.add(key)
        state.emit("forgery_alarm", alien_height=bc.height, booster=bc.booster, forged=bc.forged,
                   observed=seen, reporter=pos.provider_id)
    return True, ""


def _burn_proof_problem(state, claim, raw_tx, proof, forged_hashes, registry: KeyRegistry) -> str:
    if claim.state != "assigned" or claim.assigned_provider is None:
        return "not-assigned"
    if claim.deadline_block is not None and state.height > claim.deadline_block:
        return "deadline-passed"
    if proof.tx != raw_tx:
        return "tx-mismatch"
    pos = state.positions[claim.assigned_provider]
    if not verify_signature(pos.alien_pubkey, raw_tx, registry):
        return "bad-signature"
    if raw_tx.tx_hash in state.used_alien_txs:
        return "tx-reused"
    forged = forged_hashes.get(proof.block_height)
    if forged is None:
        return "unknown-height"
    why = check_spv(proof, forged)
    if why:
        return why
    if raw_tx.to_pubkey != claim.claimant_alien_pubkey:
        return "wrong-recipient"
    if raw_tx.amount < claim.amount:
        return "wrong-amount"
    return ""


def timeout_burns(state: InterpoolState) -> list[int]:
    """Slash providers whose assigned claim reached its deadline unproven."""
    slashed = []
    try:
        r = pool_ratio(state.pool)
    except UndefinedRatio:
        r = None
    params = state.params.burn
    for claim in sorted(state.claims.values(), key=lambda c: c.claim_id):
        if claim.state != "assigned" or claim.deadline_block is None or state.height < claim.deadline_block:
            continue
        pos = state.positions[claim.assigned_provider]  # type: ignore[index]
        value = claim.amount * r if r is not None else ZERO
        slash = min_amount(pos.collateral, value)
        pos.collateral -= slash
        state.buffer.accrue(slash, "native", "collateral-slash")
        due = value * params.claimant_share
        paid = min_amount(due, state.buffer.native_stack)
        state.buffer.native_stack -= paid
        if paid:
            state.wallets.credit(claim.claimant_id, paid, "native")
        if paid < due:
            state.emit("burn_shortfall", claim_id=claim.claim_id, due=due, paid=paid, shortfall=due - paid)
        state.pool.supply.burned_total += claim.amount
        pos.obligation = pos.obligation - min_amount(claim.amount, pos.obligation)
        pos.assigned_claim = None
        claim.state = "slashed"
        state.emit(
            "burn_slashed",
            claim_id=claim.claim_id,
            provider_id=pos.provider_id,
            amount=claim.amount,
            value=value,
            slashed=slash,
            paid_to_claimant=paid,
            ratio=r,
        )
        slashed.append(claim.claim_id)
    return slashed


# ---------------------------------------------------------------- exits and keys


def projected_distance(pos: ProviderPosition, queue: BurnQueue, block: int, params: BurnParams) -> int:
    """Blocks until the provider is expected to be handed a claim.

    Already assigned: 0.  Full providers are served in order, one per block.
    Regular providers wait one cycle per rotation slot ahead of them.
    """
    if pos.assigned_claim is not None:
        return 0
    if pos.provider_id in queue.full:
        fulls = [p for p in queue.order if p in queue.full]
        return fulls.index(pos.provider_id) if pos.provider_id in fulls else 0
    rot = queue.rotation()
    if pos.provider_id not in rot:
        return 0
    return rot.index(pos.provider_id) * params.cycle_length


def penalty_for_distance(deposit: Amount, distance: int, window: int, p_max: Fraction) -> Amount:
    """Linear decay from ``p_max * deposit`` at distance 0 to zero at ``window``."""
    if window <= 0 or distance >= window:
        return ZERO
    return deposit * (Fraction(p_max) * (1 - Fraction(max(distance, 0), window)))


def early_exit_penalty(
    pos: ProviderPosition,
    queue: BurnQueue,
    block: int,
    params: BurnParams,
    positions: Mapping[str, ProviderPosition] | None = None,
) -> Amount:
    d = projected_distance(pos, queue, block, params)
    return penalty_for_distance(pos.deposit, d, params.window, params.p_max)


def update_provider_key(state: InterpoolState, pos: ProviderPosition, new_alien_pubkey: Hash256) -> Amount:
    """Swap the provider's alien key; free unless a claim is already assigned."""
    if not pos.is_open:
        raise BurnError(f"{pos.provider_id} is {pos.status}")
    penalty = ZERO
    if pos.assigned_claim is not None:
        penalty = min_amount(pos.deposit * state.params.burn.key_change_penalty, pos.collateral)
        pos.collateral -= penalty
        state.buffer.accrue(penalty, "native", "penalty")
    old = pos.alien_pubkey
    pos.alien_pubkey = new_alien_pubkey
    state.emit("key_updated", provider_id=pos.provider_id, old=old, new=new_alien_pubkey, penalty=penalty)
    return penalty
