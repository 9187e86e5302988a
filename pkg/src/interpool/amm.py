"""Constant-product exchange between intertoken and native coin.

Fees never enter the curve: they are charged as a gross-up of the inbound leg
(or skimmed from the outbound leg when the fee coin is the outbound coin) and
forwarded to the liquidity buffer, so ``intertoken * native`` only moves by
rounding between liquidity events.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Optional, Protocol

from .chainsim.transactions import BUY, SELL, Exchange, MainnetTx
from .core import SCALE, ZERO, Amount, InterpoolError, Wallets, fraction_sqrt

FeeCoin = Literal["native", "intertoken"]


class UndefinedRatio(InterpoolError):
    pass


class InsufficientLiquidity(InterpoolError):
    pass


@dataclass
class SupplyLedger:
    minted_total: Amount = ZERO
    burned_total: Amount = ZERO

    @property
    def outstanding(self) -> Amount:
        return self.minted_total - self.burned_total


@dataclass
class PoolState:
    intertoken_inventory: Amount = ZERO
    native_inventory: Amount = ZERO
    supply: SupplyLedger = field(default_factory=SupplyLedger)
    fee_rate: Fraction = Fraction(0)
    fee_method: FeeCoin = "intertoken"
    min_volume_threshold: Amount = ZERO

    def snapshot(self) -> PoolState:
        return copy.deepcopy(self)

    @property
    def product(self) -> int:
        """Exact product of the inventory mantissas (scale 10^24)."""
        return self.intertoken_inventory.mantissa * self.native_inventory.mantissa

    def to_json(self) -> dict:
        return {
            "intertoken_inventory": self.intertoken_inventory.mantissa,
            "native_inventory": self.native_inventory.mantissa,
            "minted_total": self.supply.minted_total.mantissa,
            "burned_total": self.supply.burned_total.mantissa,
            "fee_rate": f"{self.fee_rate.numerator}/{self.fee_rate.denominator}",
            "fee_method": self.fee_method,
        }


def pool_ratio(pool: PoolState) -> Fraction:
    """Native coins per intertoken, exact."""
    i, n = pool.intertoken_inventory.mantissa, pool.native_inventory.mantissa
    if i <= 0 or n <= 0:
        raise UndefinedRatio("pool has an empty side")
    return Fraction(n, i)


def ratio_in_bounds(native_m: int, inter_m: int, lo: Amount, hi: Amount) -> bool:
    # lo <= n/i <= hi, cross-multiplied with the fixed-point bounds
    return lo.mantissa * inter_m <= native_m * SCALE <= hi.mantissa * inter_m


def swap_mantissas(
    inv_i: int,
    inv_n: int,
    buy: bool,
    volume_in: int,
    fee_num: int,
    fee_den: int,
    fee_on_intertoken: bool,
) -> Optional[tuple[int, int, int, int, int]]:
    """Core swap on raw mantissas.

    Returns ``(user_out, fee, gross_in, new_i, new_n)`` or ``None`` when the
    trade cannot be filled (empty pool, zero output).
    """
    if inv_i <= 0 or inv_n <= 0 or volume_in <= 0:
        return None
    if buy:
        inv_in, inv_out = inv_n, inv_i
    else:
        inv_in, inv_out = inv_i, inv_n
    new_in = inv_in + volume_in
    k = inv_in * inv_out
    new_out = -(-k // new_in)
    curve_out = inv_out - new_out
    if curve_out <= 0:
        return None
    fee_on_inbound = fee_on_intertoken != buy
    if fee_num == 0:
        fee = 0
        gross = volume_in
        user_out = curve_out
    elif fee_on_inbound:
        gross = -(-volume_in * fee_den // (fee_den - fee_num))
        fee = gross - volume_in
        user_out = curve_out
    else:
        gross = volume_in
        fee = curve_out * fee_num // fee_den
        user_out = curve_out - fee
    if buy:
        return user_out, fee, gross, new_out, new_in
    return user_out, fee, gross, new_in, new_out


@dataclass(frozen=True)
class SwapQuote:
    direction: str
    volume_in: Amount
    gross_in: Amount
    volume_out: Amount
    fee: Amount
    fee_coin: FeeCoin
    new_intertoken: Amount
    new_native: Amount

    @property
    def inbound_coin(self) -> FeeCoin:
        return "native" if self.direction == BUY else "intertoken"

    @property
    def outbound_coin(self) -> FeeCoin:
        return "intertoken" if self.direction == BUY else "native"

    @property
    def native_volume(self) -> Amount:
        """Native leg of the trade as it hits the curve."""
        if self.direction == BUY:
            return self.volume_in
        return self.volume_out + (self.fee if self.fee_coin == "native" else ZERO)


def quote_swap(
    pool: PoolState,
    direction: str,
    volume_in: Amount,
    fee_rate: Fraction | None = None,
    fee_method: FeeCoin | None = None,
) -> SwapQuote:
    if direction not in (BUY, SELL):
        raise ValueError(f"unknown direction {direction!r}")
    if volume_in <= 0:
        raise ValueError("volume_in must be positive")
    rate = pool.fee_rate if fee_rate is None else Fraction(fee_rate)
    method = pool.fee_method if fee_method is None else fee_method
    if not 0 <= rate < 1:
        raise ValueError("fee rate must lie in [0, 1)")
    res = swap_mantissas(
        pool.intertoken_inventory.mantissa,
        pool.native_inventory.mantissa,
        direction == BUY,
        volume_in.mantissa,
        rate.numerator,
        rate.denominator,
        method == "intertoken",
    )
    if res is None:
        raise InsufficientLiquidity("trade would drain the pool or yields nothing")
    out, fee, gross, new_i, new_n = res
    return SwapQuote(direction, volume_in, Amount(gross), Amount(out), Amount(fee), method, Amount(new_i), Amount(new_n))


class FeeSink(Protocol):
    def accrue(self, amount: Amount, coin: str, source: str = "fee") -> None: ...


@dataclass(frozen=True)
class SwapResult:
    executed: bool
    reason: str = ""
    quote: Optional[SwapQuote] = None
    pre_ratio: Optional[Fraction] = None

    @property
    def skipped(self) -> bool:
        return not self.executed


def execute_swap(
    pool: PoolState,
    tx: MainnetTx,
    buffer: FeeSink | None = None,
    wallets: Wallets | None = None,
) -> SwapResult:
    """Run an exchange tx if the pre-trade ratio sits inside its bounds.

    With ``wallets`` the sender pays the gross inbound amount and receives the
    output; a sender who cannot pay is skipped.  Skips leave everything untouched.
    """
    kind = tx.kind
    if not isinstance(kind, Exchange):
        raise TypeError("execute_swap needs an exchange transaction")
    try:
        r = pool_ratio(pool)
    except UndefinedRatio:
        return SwapResult(False, "empty-pool")
    if not ratio_in_bounds(pool.native_inventory.mantissa, pool.intertoken_inventory.mantissa, kind.ratio_min, kind.ratio_max):
        return SwapResult(False, "ratio-out-of-range", pre_ratio=r)
    try:
        q = quote_swap(pool, kind.direction, kind.volume_in)
    except InsufficientLiquidity:
        return SwapResult(False, "insufficient-liquidity", pre_ratio=r)
    if wallets is not None:
        need = q.gross_in + (tx.gas_fee if q.inbound_coin == "native" else ZERO)
        if wallets.balance(tx.sender, q.inbound_coin) < need:
            return SwapResult(False, "insufficient-balance", pre_ratio=r)
        if q.inbound_coin != "native" and wallets.balance(tx.sender, "native") < tx.gas_fee:
            return SwapResult(False, "insufficient-balance", pre_ratio=r)
        wallets.debit(tx.sender, q.gross_in, q.inbound_coin)
        wallets.credit(tx.sender, q.volume_out, q.outbound_coin)
    pool.intertoken_inventory = q.new_intertoken
    pool.native_inventory = q.new_native
    if buffer is not None and q.fee > 0:
        buffer.accrue(q.fee, q.fee_coin, "fee")
    return SwapResult(True, "", q, r)


def position_at_ratio(coins: Amount, ratio: Fraction | Amount) -> tuple[Amount, Amount]:
    """Holdings (intertoken, native) of a share with product ``coins`` at ``ratio``."""
    r = ratio.to_fraction() if isinstance(ratio, Amount) else Fraction(ratio)
    if coins <= 0 or r <= 0:
        raise ValueError("coins and ratio must be positive")
    c = coins.to_fraction()
    return fraction_sqrt(c / r), fraction_sqrt(c * r)


def add_liquidity(pool: PoolState, intertoken: Amount, native: Amount) -> None:
    if intertoken < 0 or native < 0:
        raise ValueError("negative liquidity")
    pool.intertoken_inventory += intertoken
    pool.native_inventory += native


def remove_liquidity(pool: PoolState, intertoken: Amount, native: Amount) -> tuple[Amount, Amount]:
    """Remove up to the requested amounts; returns what was actually taken."""
    i = min(intertoken, pool.intertoken_inventory, key=lambda a: a.mantissa)
    n = min(native, pool.native_inventory, key=lambda a: a.mantissa)
    pool.intertoken_inventory -= i
    pool.native_inventory -= n
    return i, n
