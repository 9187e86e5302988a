"""Twin-deposit joins, per-block risk passes, collateral top-ups, exits and liquidation.

A provider's native deposit is split in two: one half joins the pool next to
freshly minted intertokens, the other half stays locked as collateral.  The
provider's share ``interpool_coins = minted * twin`` never changes, so its
holdings at any pool ratio follow from the constant-product curve, and every
intertoken the pool has lost to the market is a liability the collateral must
cover.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

from .amm import UndefinedRatio, add_liquidity, pool_ratio, position_at_ratio, remove_liquidity
from .buffer import settle_burn
from .burncycle import early_exit_penalty
from .core import ZERO, Amount, Hash256, InterpoolError, max_amount, min_amount
from .state import InterpoolState, ProviderPosition

__all__ = [
    "MintingDisabled",
    "ProviderPosition",
    "RiskReport",
    "StalePosition",
    "inject_collateral",
    "join_interpool",
    "liquidate",
    "risk_pass",
    "risk_report",
    "withdraw_provider",
]


class MintingDisabled(InterpoolError):
    pass


class StalePosition(InterpoolError):
    pass


Action = Literal["none", "request-injection", "liquidate"]


@dataclass(frozen=True)
class RiskReport:
    provider_id: str
    ratio: Fraction
    current_intertoken: Amount
    current_native: Amount
    risky_intertoken: Amount
    risky_native_value: Amount
    collateral: Amount
    collateral_remaining: Amount
    action: Action = "none"
    request: Amount = ZERO

    @property
    def balance(self) -> Amount:
        """Refund on a voluntary exit right now, before fees and penalties."""
        return self.current_native + self.collateral_remaining

    def to_json(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "ratio": f"{self.ratio.numerator}/{self.ratio.denominator}",
            "current_intertoken": self.current_intertoken.mantissa,
            "current_native": self.current_native.mantissa,
            "risky_intertoken": self.risky_intertoken.mantissa,
            "risky_native_value": self.risky_native_value.mantissa,
            "collateral": self.collateral.mantissa,
            "collateral_remaining": self.collateral_remaining.mantissa,
            "balance": self.balance.mantissa,
            "action": self.action,
            "request": self.request.mantissa,
        }


def join_interpool(
    state: InterpoolState,
    owner: str,
    deposit: Amount,
    *,
    alien_pubkey: Hash256 = Hash256.zero(),
    mainnet_pubkey: Hash256 = Hash256.zero(),
    provider_class: str = "regular",
    initial_ratio: Fraction | None = None,
    genesis: bool = False,
) -> ProviderPosition:
    """Lock half the deposit as collateral and pair the other half with new intertokens."""
    if deposit <= 0:
        raise ValueError("deposit must be positive")
    pool = state.pool
    if not genesis and pool.native_inventory < pool.min_volume_threshold:
        raise MintingDisabled(
            f"pool holds {pool.native_inventory} native, minting starts at {pool.min_volume_threshold}"
        )
    try:
        r = pool_ratio(pool)
    except UndefinedRatio:
        if initial_ratio is None:
            raise
        r = Fraction(initial_ratio)
    twin = deposit / 2
    collateral = deposit - twin
    minted = twin / r
    if minted <= 0:
        raise ValueError("deposit too small to mint at the current ratio")
    state.wallets.debit(owner, deposit, "native")
    add_liquidity(pool, minted, twin)
    pool.supply.minted_total += minted
    pos = ProviderPosition(
        provider_id=state.next_provider_id(),
        owner=owner,
        join_block=state.height,
        deposit=deposit,
        collateral=collateral,
        minted=minted,
        interpool_coins=minted * twin,
        mainnet_pubkey=mainnet_pubkey,
        alien_pubkey=alien_pubkey,
        provider_class="full" if provider_class == "full" else "regular",
        obligation=minted,
    )
    state.positions[pos.provider_id] = pos
    state.queue.add(pos)
    state.emit(
        "joined",
        provider_id=pos.provider_id,
        owner=owner,
        deposit=deposit,
        collateral=collateral,
        minted=minted,
        interpool_coins=pos.interpool_coins,
        provider_class=pos.provider_class,
    )
    return pos


def risk_report(pos: ProviderPosition, ratio: Fraction, margin: Fraction = Fraction(1)) -> RiskReport:
    cur_i, cur_n = position_at_ratio(pos.interpool_coins, ratio)
    risky_i = max_amount(ZERO, pos.obligation - cur_i)
    risky_n = risky_i * ratio
    remaining = pos.collateral - risky_n
    if remaining < 0:
        action: Action = "liquidate"
        request = ZERO
    elif remaining < risky_n * margin:
        action = "request-injection"
        request = risky_n
    else:
        action = "none"
        request = ZERO
    return RiskReport(pos.provider_id, ratio, cur_i, cur_n, risky_i, risky_n, pos.collateral, remaining, action, request)


def risk_pass(state: InterpoolState) -> list[RiskReport]:
    """Evaluate every open position; flag thin ones and liquidate uncovered ones."""
    try:
        r = pool_ratio(state.pool)
    except UndefinedRatio:
        return []
    margin = state.params.risk.injection_margin
    reports = []
    for pos in list(state.positions.values()):
        if not pos.is_open:
            continue
        rep = risk_report(pos, r, margin)
        reports.append(rep)
        if rep.action == "liquidate":
            liquidate(state, pos, reason="undercollateralized")
        elif rep.action == "request-injection":
            if pos.flag_deadline is None:
                pos.flag_deadline = state.height + state.params.risk.grace_blocks
                state.emit(
                    "injection_requested",
                    provider_id=pos.provider_id,
                    amount=rep.request,
                    collateral_remaining=rep.collateral_remaining,
                    deadline_block=pos.flag_deadline,
                )
        elif pos.flag_deadline is not None:
            pos.flag_deadline = None
            state.emit("flag_cleared", provider_id=pos.provider_id)
    return reports


def expire_flags(state: InterpoolState) -> list[str]:
    """Liquidate flagged positions whose grace period is over."""
    out = []
    for pos in list(state.positions.values()):
        if pos.is_open and pos.flag_deadline is not None and state.height >= pos.flag_deadline:
            liquidate(state, pos, reason="grace-expired")
            out.append(pos.provider_id)
    return out


def inject_collateral(state: InterpoolState, pos: ProviderPosition, amount: Amount) -> ProviderPosition:
    if not pos.is_open:
        raise StalePosition(f"{pos.provider_id} is {pos.status}")
    if amount < 0:
        raise ValueError("negative injection")
    if not amount:
        return pos
    state.wallets.debit(pos.owner, amount, "native")
    pos.collateral += amount
    if pos.flag_deadline is not None:
        try:
            rep = risk_report(pos, pool_ratio(state.pool))
            cleared = rep.collateral_remaining >= 0
        except UndefinedRatio:
            cleared = True
        if cleared:
            pos.flag_deadline = None
    state.emit("collateral_injected", provider_id=pos.provider_id, amount=amount, collateral=pos.collateral)
    return pos


def _close(
    state: InterpoolState, pos: ProviderPosition, penalty: Amount, kind: str
) -> tuple[Amount, RiskReport, Amount, Amount]:
    """Shared settlement for exits and liquidations.

    The provider's own (i, n) leaves the pool; pool-held intertokens up to the
    remaining obligation are burned, any surplus belongs to the provider; the
    intertokens already out in the market are burned through the buffer,
    which keeps their native backing.  Returns (refund, report, penalty paid,
    risky native moved to the buffer).
    """
    r = pool_ratio(state.pool)
    rep = risk_report(pos, r)
    pool_i, pool_n = remove_liquidity(state.pool, rep.current_intertoken, rep.current_native)
    burn_from_pool = min_amount(pool_i, pos.obligation)
    state.pool.supply.burned_total += burn_from_pool
    surplus_i = pool_i - burn_from_pool
    if surplus_i:
        state.wallets.credit(pos.owner, surplus_i, "intertoken")
    available = pool_n + pos.collateral
    to_buffer = min_amount(rep.risky_native_value, available)
    settle_burn(state.buffer, to_buffer, rep.risky_intertoken, state.pool.supply)
    left = available - to_buffer
    penalty_paid = min_amount(penalty, left)
    if penalty_paid:
        state.buffer.accrue(penalty_paid, "native", "penalty")
    refund = left - penalty_paid
    if refund:
        state.wallets.credit(pos.owner, refund, "native")
    pos.collateral = ZERO
    pos.obligation = ZERO
    pos.flag_deadline = None
    pos.closed = kind  # type: ignore[assignment]
    if pos.assigned_claim is not None:
        claim = state.claims.get(pos.assigned_claim)
        if claim is not None and claim.state == "assigned":
            claim.state = "open"
            claim.assigned_provider = None
            claim.deadline_block = None
            state.emit("burn_reopened", claim_id=claim.claim_id, provider_id=pos.provider_id)
        pos.assigned_claim = None
    state.queue.remove(pos.provider_id)
    return refund, rep, penalty_paid, to_buffer


def liquidate(state: InterpoolState, pos: ProviderPosition, reason: str = "undercollateralized") -> Amount:
    if not pos.is_open:
        raise StalePosition(f"{pos.provider_id} is {pos.status}")
    ratio_before = pool_ratio(state.pool)
    pre_i, pre_n = state.pool.intertoken_inventory, state.pool.native_inventory
    refund, rep, _, to_buffer = _close(state, pos, ZERO, "liquidated")
    state.emit(
        "liquidated",
        provider_id=pos.provider_id,
        reason=reason,
        refund=refund,
        risky_intertoken=rep.risky_intertoken,
        risky_native_value=rep.risky_native_value,
        to_buffer=to_buffer,
        removed_intertoken=pre_i - state.pool.intertoken_inventory,
        removed_native=pre_n - state.pool.native_inventory,
        pool_before=(pre_i, pre_n),
        pool_after=(state.pool.intertoken_inventory, state.pool.native_inventory),
        ratio_before=ratio_before,
    )
    return refund


def withdraw_provider(state: InterpoolState, pos: ProviderPosition) -> Amount:
    """Voluntary exit; an uncovered position is liquidated instead."""
    if not pos.is_open:
        raise StalePosition(f"{pos.provider_id} is {pos.status}")
    rep = risk_report(pos, pool_ratio(state.pool))
    if rep.collateral_remaining < 0:
        return liquidate(state, pos, reason="withdrawal-undercollateralized")
    penalty = early_exit_penalty(pos, state.queue, state.height, state.params.burn, state.positions)
    refund, rep, paid, to_buffer = _close(state, pos, penalty, "exited")
    state.emit(
        "withdrawn",
        provider_id=pos.provider_id,
        refund=refund,
        balance=rep.balance,
        penalty=paid,
        risky_intertoken=rep.risky_intertoken,
        risky_native_value=rep.risky_native_value,
        to_buffer=to_buffer,
    )
    return refund


def find_position(state: InterpoolState, provider_id: str) -> Optional[ProviderPosition]:
    return state.positions.get(provider_id)
