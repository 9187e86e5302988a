"""Mutable interpool contract state shared by the risk, burn-cycle and pipeline code."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Optional

from .amm import PoolState
from .buffer import BufferThresholds, FeePolicy, LiquidityBuffer
from .core import ZERO, Amount, EventLog, Hash256, KeyRegistry, Wallets

ProviderClass = Literal["full", "regular"]


@dataclass
class RiskParams:
    # flag when collateral_remaining < injection_margin * risky_native_value
    injection_margin: Fraction = Fraction(1)
    grace_blocks: int = 3


@dataclass
class BurnParams:
    transfer_window: int = 3
    full_transfer_window: int = 1
    # extra blocks granted to every deadline for the alien transfer to become final
    finality_latency: int = 0
    cycle_length: int = 16
    never_liquidity_limit: int = 64
    p_max: Fraction = Fraction(5, 100)
    decay_window: Optional[int] = None
    key_change_penalty: Fraction = Fraction(5, 100)
    claimant_share: Fraction = Fraction(1)
    full_fee_multiplier: Fraction = Fraction(1)

    @property
    def window(self) -> int:
        return self.decay_window if self.decay_window is not None else self.cycle_length


@dataclass
class BufferParams:
    booster_rate: Fraction = Fraction(1, 1000)
    provider_epoch: int = 16
    provider_reserve: Amount = ZERO
    thresholds: BufferThresholds = field(default_factory=BufferThresholds)
    volatility_window: int = 16
    volatility_threshold: float = 0.05
    deploy_fraction: Fraction = Fraction(1, 10)
    adaptive_fee: bool = False


@dataclass
class ProtocolParams:
    risk: RiskParams = field(default_factory=RiskParams)
    burn: BurnParams = field(default_factory=BurnParams)
    buffer: BufferParams = field(default_factory=BufferParams)


@dataclass
class ProviderPosition:
    provider_id: str
    owner: str
    join_block: int
    deposit: Amount
    collateral: Amount
    minted: Amount
    interpool_coins: Amount
    mainnet_pubkey: Hash256
    alien_pubkey: Hash256
    provider_class: ProviderClass = "regular"
    # intertokens still to be redeemed in alien coin
    obligation: Amount = ZERO
    closed: Optional[Literal["liquidated", "exited"]] = None
    flag_deadline: Optional[int] = None
    assigned_claim: Optional[int] = None
    last_assignment_block: Optional[int] = None
    assignments: int = 0
    coins_unlocked: bool = False

    @property
    def status(self) -> str:
        if self.closed:
            return self.closed
        if self.flag_deadline is not None:
            return "flagged"
        if self.assigned_claim is not None:
            return "burn-pending"
        if self.obligation <= 0:
            return "completed"
        return "active"

    @property
    def is_open(self) -> bool:
        return self.closed is None

    def to_json(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "owner": self.owner,
            "join_block": self.join_block,
            "deposit": self.deposit.mantissa,
            "collateral": self.collateral.mantissa,
            "minted": self.minted.mantissa,
            "obligation": self.obligation.mantissa,
            "interpool_coins": self.interpool_coins.mantissa,
            "provider_class": self.provider_class,
            "status": self.status,
            "alien_pubkey": self.alien_pubkey.hex(),
        }


ClaimState = Literal["open", "assigned", "proven", "slashed"]


@dataclass
class BurnClaim:
    claim_id: int
    claimant_id: str
    amount: Amount
    claimant_alien_pubkey: Hash256
    created_block: int
    assigned_provider: Optional[str] = None
    assigned_block: Optional[int] = None
    deadline_block: Optional[int] = None
    state: ClaimState = "open"
    escalated: bool = False
    proof_tx: Optional[Hash256] = None

    @property
    def terminal(self) -> bool:
        return self.state in ("proven", "slashed")


@dataclass
class BurnQueue:
    """Providers in join order; regulars are served in rotation after the last one served."""

    order: list[str] = field(default_factory=list)
    full: set[str] = field(default_factory=set)
    seq: dict[str, int] = field(default_factory=dict)
    last_served_seq: int = -1
    burning_appetite: Amount = ZERO

    def add(self, pos: ProviderPosition) -> None:
        if pos.provider_id in self.seq:
            return
        self.seq[pos.provider_id] = len(self.seq)
        self.order.append(pos.provider_id)
        if pos.provider_class == "full":
            self.full.add(pos.provider_id)

    def remove(self, provider_id: str) -> None:
        if provider_id in self.order:
            self.order.remove(provider_id)
        self.full.discard(provider_id)

    def regulars(self) -> list[str]:
        return [p for p in self.order if p not in self.full]

    def rotation(self, last_served_seq: int | None = None) -> list[str]:
        last = self.last_served_seq if last_served_seq is None else last_served_seq
        regular = self.regulars()
        after = [p for p in regular if self.seq[p] > last]
        before = [p for p in regular if self.seq[p] <= last]
        return after + before


@dataclass
class InterpoolState:
    """Everything the interpool contract owns, plus the wallets it settles into."""

    pool: PoolState = field(default_factory=PoolState)
    buffer: LiquidityBuffer = field(default_factory=LiquidityBuffer)
    fee_policy: FeePolicy = field(default_factory=FeePolicy)
    wallets: Wallets = field(default_factory=Wallets)
    registry: KeyRegistry = field(default_factory=KeyRegistry)
    params: ProtocolParams = field(default_factory=ProtocolParams)
    positions: dict[str, ProviderPosition] = field(default_factory=dict)
    queue: BurnQueue = field(default_factory=BurnQueue)
    claims: dict[int, BurnClaim] = field(default_factory=dict)
    events: EventLog = field(default_factory=EventLog)
    height: int = 0
    ratio_history: list[Fraction] = field(default_factory=list)
    used_alien_txs: set[Hash256] = field(default_factory=set)
    alarms_raised: set[tuple[int, str]] = field(default_factory=set)

    def __post_init__(self):
        self.buffer.wallets = self.wallets
        self.pool.fee_method = self.buffer.fee_method
        self.pool.fee_rate = self.fee_policy.rate

    def open_positions(self) -> list[ProviderPosition]:
        return [p for p in self.positions.values() if p.is_open]

    def next_provider_id(self) -> str:
        return f"lp{len(self.positions):04d}"

    def emit(self, kind: str, **payload) -> None:
        self.events.emit(self.height, kind, **payload)

    # conservation bookkeeping ------------------------------------------------

    def native_total(self, extra: Amount = ZERO) -> Amount:
        collateral = sum(p.collateral.mantissa for p in self.positions.values() if p.is_open)
        return (
            self.wallets.total("native")
            + self.pool.native_inventory
            + self.buffer.native_stack
            + Amount(collateral)
            + extra
        )

    def escrowed_intertoken(self) -> Amount:
        return Amount(sum(c.amount.mantissa for c in self.claims.values() if not c.terminal))

    def supply_gap(self) -> Amount:
        """minted - burned minus every place intertokens can sit; zero when coherent."""
        held = (
            self.pool.intertoken_inventory
            + self.wallets.total("intertoken")
            + self.buffer.intertoken_stack
            - self.buffer.burn_debt
            + self.escrowed_intertoken()
        )
        return self.pool.supply.outstanding - held
