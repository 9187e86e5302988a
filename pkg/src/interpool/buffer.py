"""Liquidity buffer: native and intertoken stacks kept outside the curve.

The buffer absorbs fees, penalties and slashed collateral, burns intertokens
for broken minting commitments without trading through the pool, pays boosters
(intertoken) and providers (native), and can inject liquidity when the pool
ratio turns volatile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Literal, Optional

import numpy as np

from .amm import PoolState, SupplyLedger, pool_ratio
from .core import ZERO, Amount, Wallets

FeeMethod = Literal["native", "intertoken"]


@dataclass
class FeePolicy:
    fee_min: Fraction = Fraction(5, 10_000)
    fee_max: Fraction = Fraction(3, 100)
    target_liquidity: Amount = Amount.of(1000)
    rate: Fraction = Fraction(3, 1000)

    def __post_init__(self):
        if not self.fee_min <= self.fee_max:
            raise ValueError("fee_min exceeds fee_max")
        if not self.fee_min <= self.rate <= self.fee_max:
            raise ValueError(f"fee rate {self.rate} outside [{self.fee_min}, {self.fee_max}]")

    def update(self, pool_native: Amount) -> Fraction:
        """Placeholder controller: scarce liquidity pushes the rate toward fee_max."""
        if self.target_liquidity <= 0:
            return self.rate
        shortfall = max(Fraction(0), 1 - pool_native.to_fraction() / self.target_liquidity.to_fraction())
        rate = self.fee_min + (self.fee_max - self.fee_min) * shortfall
        # keep the fraction small so downstream integer math stays cheap
        self.rate = Fraction(round(rate * 1_000_000), 1_000_000)
        self.rate = min(max(self.rate, self.fee_min), self.fee_max)
        return self.rate


@dataclass
class DeferredPayment:
    account: str
    amount: Amount
    created_block: int


@dataclass
class LiquidityBuffer:
    native_stack: Amount = ZERO
    intertoken_stack: Amount = ZERO
    burn_debt: Amount = ZERO
    fee_method: FeeMethod = "intertoken"
    deferred: list[DeferredPayment] = field(default_factory=list)
    wallets: Optional[Wallets] = field(default=None, repr=False, compare=False)

    def accrue(self, amount: Amount, coin: str, source: str = "fee") -> None:
        if amount < 0:
            raise ValueError("cannot accrue a negative amount")
        if source not in ("fee", "penalty", "collateral-slash"):
            raise ValueError(f"unknown accrual source {source!r}")
        if not amount:
            return
        if coin == "native":
            self.native_stack += amount
            return
        if coin != "intertoken":
            raise ValueError(f"unknown coin {coin!r}")
        repay = min(amount, self.burn_debt, key=lambda a: a.mantissa)
        self.burn_debt -= repay
        self.intertoken_stack += amount - repay
        self._flush_deferred()

    def _flush_deferred(self) -> None:
        while self.deferred and not self.burn_debt and self.wallets is not None:
            head = self.deferred[0]
            if self.intertoken_stack < head.amount:
                break
            self.intertoken_stack -= head.amount
            self.wallets.credit(head.account, head.amount, "intertoken")
            self.deferred.pop(0)

    @property
    def deferred_total(self) -> Amount:
        return Amount(sum(d.amount.mantissa for d in self.deferred))

    def snapshot(self) -> dict:
        return {
            "native_stack": self.native_stack.mantissa,
            "intertoken_stack": self.intertoken_stack.mantissa,
            "burn_debt": self.burn_debt.mantissa,
            "fee_method": self.fee_method,
        }


def accrue(buffer: LiquidityBuffer, amount: Amount, coin_kind: str, source: str = "fee") -> LiquidityBuffer:
    buffer.accrue(amount, coin_kind, source)
    return buffer


def settle_burn(
    buffer: LiquidityBuffer, risky_native: Amount, risky_intertoken: Amount, ledger: SupplyLedger
) -> LiquidityBuffer:
    """Take in the native backing and burn the matching intertokens from the stack.

    Whatever the stack cannot cover becomes ``burn_debt``; the supply ledger
    always records the full burn.
    """
    if risky_native < 0 or risky_intertoken < 0:
        raise ValueError("settlement amounts must be non-negative")
    buffer.native_stack += risky_native
    from_stack = min(risky_intertoken, buffer.intertoken_stack, key=lambda a: a.mantissa)
    buffer.intertoken_stack -= from_stack
    buffer.burn_debt += risky_intertoken - from_stack
    ledger.burned_total += risky_intertoken
    return buffer


def pay_booster(
    buffer: LiquidityBuffer,
    volume_score: Amount,
    rate: Fraction,
    account: str,
    wallets: Wallets,
    block: int = 0,
) -> Amount:
    """Pay ``rate * volume_score`` intertokens; deferred while debt or a shortfall exists."""
    payment = volume_score * Fraction(rate)
    if not payment:
        return ZERO
    if buffer.burn_debt or buffer.deferred or buffer.intertoken_stack < payment:
        buffer.deferred.append(DeferredPayment(account, payment, block))
        return ZERO
    buffer.intertoken_stack -= payment
    wallets.credit(account, payment, "intertoken")
    return payment


def split_pro_rata(total: Amount, weights: dict[str, Amount | int | Fraction]) -> dict[str, Amount]:
    """Largest-remainder split of ``total`` mantissas; the parts always sum to ``total``."""
    fw = {k: Fraction(w.mantissa if isinstance(w, Amount) else w) for k, w in weights.items()}
    fw = {k: w for k, w in fw.items() if w > 0}
    if not fw or total <= 0:
        return {k: ZERO for k in weights}
    wsum = sum(fw.values())
    exact = {k: total.mantissa * w / wsum for k, w in fw.items()}
    base = {k: int(v) for k, v in exact.items()}
    left = total.mantissa - sum(base.values())
    order = sorted(fw, key=lambda k: (-(exact[k] - base[k]), k))
    for k in order[:left]:
        base[k] += 1
    return {k: Amount(base.get(k, 0)) for k in weights}


def pay_providers(
    buffer: LiquidityBuffer,
    weights: dict[str, Amount | Fraction],
    wallets: Wallets,
    reserve: Amount = ZERO,
) -> dict[str, Amount]:
    """Distribute the native stack above ``reserve`` by weight (interpool coins)."""
    distributable = buffer.native_stack - reserve
    if distributable <= 0 or not weights:
        return {k: ZERO for k in weights}
    payments = split_pro_rata(distributable, weights)
    for acct, amt in payments.items():
        if amt:
            wallets.credit(acct, amt, "native")
    buffer.native_stack -= Amount(sum(a.mantissa for a in payments.values()))
    return payments


@dataclass(frozen=True)
class BufferThresholds:
    intertoken: Amount = Amount.of(1)
    native: Amount = Amount.of(1)


def switch_fee_method(buffer: LiquidityBuffer, thresholds: BufferThresholds) -> FeeMethod:
    """Refill whichever stack runs low; intertoken wins when both do."""
    inter_low = buffer.intertoken_stack - buffer.burn_debt < thresholds.intertoken
    native_low = buffer.native_stack < thresholds.native
    if inter_low:
        buffer.fee_method = "intertoken"
    elif native_low:
        buffer.fee_method = "native"
    return buffer.fee_method


def realized_volatility(ratios: Iterable[Fraction], window: int = 16) -> float:
    """Population variance of log pool ratio over the trailing window."""
    tail = list(ratios)[-window:]
    if len(tail) < 2:
        return 0.0
    logs = np.log(np.array([float(r) for r in tail], dtype=np.float64))
    return float(np.var(logs))


@dataclass(frozen=True)
class Deployment:
    intertoken: Amount
    native: Amount

    def __bool__(self) -> bool:
        return bool(self.intertoken or self.native)


def deploy_on_volatility(
    buffer: LiquidityBuffer,
    pool: PoolState,
    volatility: float,
    threshold: float,
    fraction: Fraction = Fraction(1, 10),
) -> Deployment:
    """Move part of both stacks into the pool without changing its ratio.

    The added pair is an integer multiple of the reduced inventory ratio, so
    the pool ratio is preserved exactly; the deployable amount is the largest
    such multiple within ``fraction`` of each stack (possibly zero).
    """
    none = Deployment(ZERO, ZERO)
    if volatility <= threshold:
        return none
    if not buffer.native_stack or not buffer.intertoken_stack:
        return none
    try:
        pool_ratio(pool)
    except Exception:
        return none
    i_m, n_m = pool.intertoken_inventory.mantissa, pool.native_inventory.mantissa
    g = gcd(i_m, n_m)
    unit_i, unit_n = i_m // g, n_m // g
    cap_i = (buffer.intertoken_stack * fraction).mantissa
    cap_n = (buffer.native_stack * fraction).mantissa
    t = min(cap_i // unit_i, cap_n // unit_n)
    if t <= 0:
        return none
    d = Deployment(Amount(t * unit_i), Amount(t * unit_n))
    buffer.intertoken_stack -= d.intertoken
    buffer.native_stack -= d.native
    pool.intertoken_inventory += d.intertoken
    pool.native_inventory += d.native
    return d
