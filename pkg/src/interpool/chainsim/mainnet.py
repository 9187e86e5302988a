"""Mainnet block production: the begin-of-block pipeline, forging and execution.

Each mainnet block runs, in this order:

1. settle submitted proofs (burns and swaps), apply queued user actions,
   assign open burn claims;
2. expire burn and swap deadlines and injection grace periods;
3. risk pass over every open position;
4. buffer housekeeping (fee rate, fee method, volatility deployment,
   provider payouts);

then a booster orders the mempool so that the block forges the alien
finality hash (plus any hash missed earlier) and its own key, and the block
is executed through the pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Any, Callable, Optional

from ..amm import UndefinedRatio, execute_swap, pool_ratio
from ..buffer import deploy_on_volatility, pay_booster, pay_providers, realized_volatility, switch_fee_method
from ..burncycle import BoosterClaim, assign_claims, claim_burn, settle_burn_proof, timeout_burns, update_provider_key
from ..core import ZERO, Amount, Hash256, InterpoolError, KeyPair, hash256, to_jsonable
from ..listrack import Swap, expire_swap, submit_alien_proof
from ..poe import InfeasibleError, OptimizedBatch, PoeParams, optimize_batch, reconstruct_targets, score_ordering
from ..risk import MintingDisabled, expire_flags, inject_collateral, join_interpool, risk_pass, withdraw_provider
from ..state import InterpoolState
from .alien import AlienChain, AlienChainParams, SpvProof, final_height, mine_alien_block
from .transactions import BUY, SELL, AlienTx, Exchange, MainnetTx, ProvideLiquidity, dedupe_mempool

__all__ = [
    "Booster",
    "BlockRecord",
    "MainnetSim",
    "PoeConfig",
]


@dataclass
class PoeConfig:
    enabled: bool = True
    hash_bits: int = 256
    bits_per_tx: int = 1
    forge_key: bool = True
    move_budget: int = 300
    restarts: int = 0
    exact_limit: int = 50_000
    workers: int = 0


@dataclass
class Booster:
    name: str
    key: KeyPair
    # mainnet heights at which this booster forges a wrong alien hash
    malicious_blocks: frozenset[int] = frozenset()

    @property
    def account(self) -> str:
        return f"booster:{self.name}"


@dataclass
class BlockRecord:
    height: int
    alien_height: int
    forge_status: str
    target_heights: list[int]
    booster: Optional[str]
    miner_score: Amount
    volume_score: Amount
    txs: int
    executed: int
    booster_paid: Amount
    ratio: Optional[Fraction]
    intertoken_inventory: Amount
    native_inventory: Amount
    buffer: dict
    native_total: Amount
    native_ok: bool
    supply_gap: Amount
    cp_ok: bool
    score_ok: bool
    events: list[dict] = field(default_factory=list)
    risk: list[dict] = field(default_factory=list)
    # what the emitted ordering decodes to, next to the alien headers it should match
    forged: list[Hash256] = field(default_factory=list)
    forged_key: Optional[Hash256] = None
    true_hashes: list[Hash256] = field(default_factory=list)

    @property
    def checks_ok(self) -> bool:
        return self.native_ok and not self.supply_gap and self.cp_ok and self.score_ok

    def to_json(self) -> dict:
        return to_jsonable(
            {
                "height": self.height,
                "alien_height": self.alien_height,
                "forge_status": self.forge_status,
                "target_heights": self.target_heights,
                "true_hashes": self.true_hashes,
                "forged": self.forged,
                "forged_key": self.forged_key,
                "booster": self.booster,
                "miner_score": self.miner_score,
                "volume_score": self.volume_score,
                "txs": self.txs,
                "executed": self.executed,
                "booster_paid": self.booster_paid,
                "ratio": self.ratio,
                "intertoken_inventory": self.intertoken_inventory,
                "native_inventory": self.native_inventory,
                "buffer": self.buffer,
                "native_total": self.native_total,
                "checks": {
                    "native_conservation": self.native_ok,
                    "supply_gap": self.supply_gap,
                    "constant_product": self.cp_ok,
                    "score_recomputed": self.score_ok,
                },
                "risk": self.risk,
                "events": self.events,
            }
        )


class PipelineError(InterpoolError):
    pass


@dataclass
class _Action:
    kind: str
    args: dict[str, Any]


class MainnetSim:
    """Owns the interpool state, the alien chain, the mempool and the forge ledger."""

    def __init__(
        self,
        state: InterpoolState,
        alien: AlienChain,
        alien_params: AlienChainParams,
        poe: PoeConfig | None = None,
        boosters: list[Booster] | None = None,
        *,
        miner: str = "miner",
        seed: int = 0,
    ):
        self.state = state
        self.alien = alien
        self.alien_params = alien_params
        self.poe = poe or PoeConfig()
        self.boosters = boosters or [Booster("b0", KeyPair.derive("booster", 0))]
        self.miner = miner
        self.seed = seed
        self.mempool: list[MainnetTx] = []
        self.actions: list[_Action] = []
        self.pending_alien: list[AlienTx] = []
        self.forged_hashes: dict[int, Hash256] = {}
        self.booster_claims: list[BoosterClaim] = []
        self.missed: list[int] = []
        self.last_target: int = -1
        self.swaps: list[Swap] = []
        self.blocks: list[BlockRecord] = []
        self.native_baseline: Amount = ZERO
        self.last_batch: Optional[OptimizedBatch] = None
        self.last_risk: list = []
        # called after every block with (sim, record); scenario agents hook in here
        self.observers: list[Callable[[MainnetSim, BlockRecord], None]] = []
        self._preroll()
        self.rebase()

    # ------------------------------------------------------------ setup

    def _preroll(self) -> None:
        """Grow the alien chain until something is final."""
        while final_height(self.alien, self.alien_params) < 1:
            mine_alien_block(self.alien, [])
        self.last_target = final_height(self.alien, self.alien_params) - 1
        for h in range(self.last_target + 1):
            self.forged_hashes[h] = self.alien.blocks[h].header_hash

    def native_total(self) -> Amount:
        escrow = Amount(sum(s.escrowed.mantissa for s in self.swaps))
        return self.state.native_total(escrow)

    def rebase(self) -> None:
        """Record the current native total as the conserved quantity (after funding wallets)."""
        self.native_baseline = self.native_total()

    # ------------------------------------------------------------ inputs

    def submit_tx(self, tx: MainnetTx) -> None:
        self.mempool.append(tx)

    def submit_alien_tx(self, tx: AlienTx) -> None:
        self.pending_alien.append(tx)

    def submit_action(self, kind: str, **args: Any) -> None:
        self.actions.append(_Action(kind, args))

    # ------------------------------------------------------------ pipeline

    def begin_block(self) -> None:
        st = self.state
        actions, self.actions = self.actions, []
        # (1) proofs first, then everything else users queued, then assignment
        for a in actions:
            if a.kind == "burn_proof":
                claim = st.claims.get(a.args["claim_id"])
                if claim is None:
                    st.emit("burn_proof_rejected", claim_id=a.args["claim_id"], reason="unknown-claim")
                    continue
                settle_burn_proof(st, claim, a.args["tx"], a.args["proof"], self.forged_hashes, self.booster_claims)
            elif a.kind == "swap_proof":
                swap = self.swaps[a.args["swap"]]
                ok, why = submit_alien_proof(
                    swap, a.args["tx"], a.args["proof"], self.forged_hashes, st.wallets, st.registry, block=st.height
                )
                st.emit("swap_completed" if ok else "swap_proof_rejected", swap=a.args["swap"], reason=why)
        for a in actions:
            if a.kind in ("burn_proof", "swap_proof"):
                continue
            try:
                self._apply_action(a)
            except (InterpoolError, ValueError) as exc:
                st.emit("action_rejected", action=a.kind, reason=str(exc))
        assign_claims(st)
        # (2) deadlines
        timeout_burns(st)
        for i, swap in enumerate(self.swaps):
            if expire_swap(swap, st.height, st.wallets):
                st.emit("swap_failed", swap=i, refunded=swap.mike_locked, slashed=swap.alice_collateral)
        expire_flags(st)
        # (3) risk
        self.last_risk = risk_pass(st)
        # (4) buffer
        self._buffer_step()

    def _apply_action(self, a: _Action) -> None:
        st = self.state
        k = a.args
        if a.kind == "claim_burn":
            claim_burn(st, k["user"], k["amount"], k["alien_pubkey"])
        elif a.kind == "inject":
            inject_collateral(st, st.positions[k["provider_id"]], k["amount"])
        elif a.kind == "withdraw":
            withdraw_provider(st, st.positions[k["provider_id"]])
        elif a.kind == "update_key":
            update_provider_key(st, st.positions[k["provider_id"]], k["alien_pubkey"])
        elif a.kind == "join":
            join_interpool(
                st,
                k["owner"],
                k["deposit"],
                alien_pubkey=k.get("alien_pubkey", Hash256.zero()),
                provider_class=k.get("provider_class", "regular"),
                initial_ratio=k.get("initial_ratio"),
                genesis=k.get("genesis", False),
            )
        elif a.kind == "shock":
            self._shock(k["account"], Fraction(k["target_ratio"]))
        elif a.kind == "open_swap":
            self.swaps.append(k["swap"])
            st.emit("swap_locked", swap=len(self.swaps) - 1)
        else:
            raise PipelineError(f"unknown action {a.kind!r}")

    def _shock(self, account: str, target: Fraction) -> None:
        """Trade from ``account`` straight through the pool until the ratio reaches ``target``."""
        st = self.state
        i_m, n_m = st.pool.intertoken_inventory.mantissa, st.pool.native_inventory.mantissa
        if i_m <= 0 or n_m <= 0 or target <= 0:
            st.emit("shock_skipped", target=target, reason="empty-pool")
            return
        k = i_m * n_m
        if target > Fraction(n_m, i_m):
            direction, vol = BUY, isqrt(k * target.numerator // target.denominator) - n_m
        else:
            direction, vol = SELL, isqrt(k * target.denominator // target.numerator) - i_m
        if vol <= 0:
            return
        tx = MainnetTx(account, 0, ZERO, Amount(1), Exchange(direction, Amount(vol), Amount(1), Amount(2**100)))
        res = execute_swap(st.pool, tx, st.buffer, st.wallets)
        st.emit("shock", target=target, direction=direction, volume_in=Amount(vol), executed=res.executed,
                reason=res.reason, ratio=pool_ratio(st.pool))

    def _buffer_step(self) -> None:
        st = self.state
        bp = st.params.buffer
        if bp.adaptive_fee:
            st.fee_policy.update(st.pool.native_inventory)
        before = st.buffer.fee_method
        method = switch_fee_method(st.buffer, bp.thresholds)
        if method != before:
            st.emit("fee_method_switched", method=method)
        st.pool.fee_method = method
        st.pool.fee_rate = st.fee_policy.rate
        try:
            r = pool_ratio(st.pool)
        except UndefinedRatio:
            r = None
        if r is not None:
            st.ratio_history.append(r)
            vol = realized_volatility(st.ratio_history, bp.volatility_window)
            d = deploy_on_volatility(st.buffer, st.pool, vol, bp.volatility_threshold, bp.deploy_fraction)
            if d:
                st.emit("buffer_deployed", intertoken=d.intertoken, native=d.native, volatility=vol)
        if bp.provider_epoch > 0 and st.height > 0 and st.height % bp.provider_epoch == 0:
            weights: dict[str, Amount | Fraction] = {}
            for pos in st.open_positions():
                w = pos.interpool_coins.to_fraction()
                if pos.provider_class == "full":
                    w *= st.params.burn.full_fee_multiplier
                weights[pos.owner] = weights.get(pos.owner, Fraction(0)) + w
            if weights:
                paid = pay_providers(st.buffer, weights, st.wallets, bp.provider_reserve)
                if any(paid.values()):
                    st.emit("providers_paid", payments=paid)

    # ------------------------------------------------------------ forging

    def forge_targets(self) -> list[int]:
        """Alien heights this block must forge: earlier misses, then the newest final height."""
        cur = final_height(self.alien, self.alien_params)
        heights = list(self.missed)
        if cur > self.last_target and cur not in heights:
            heights.append(cur)
        return heights

    def poe_params(self, heights: list[int], booster: Booster, malicious: bool = False) -> PoeParams:
        targets = [self.alien.blocks[h].header_hash for h in heights]
        if malicious:
            targets[-1] = hash256(b"forged-by-" + booster.name.encode() + targets[-1].data)
        return PoeParams(
            tuple(targets),
            booster.key.pubkey if self.poe.forge_key else None,
            hash_bits=self.poe.hash_bits,
            bits_per_tx=self.poe.bits_per_tx * len(targets),
            min_batch=0,
            move_budget=self.poe.move_budget,
            restarts=self.poe.restarts,
            seed=self.seed * 1_000_003 + self.state.height,
            exact_limit=self.poe.exact_limit,
        )

    def build_batch(self) -> tuple[Optional[Booster], Optional[OptimizedBatch], list[int], Optional[PoeParams]]:
        """Best-of-N booster competition on the post-pipeline snapshot."""
        heights = self.forge_targets()
        if not self.poe.enabled or not heights:
            return None, None, heights, None
        from ..poe import ScoreSnapshot

        snap = ScoreSnapshot.from_pool(self.state.pool, self.state.wallets)
        h = self.state.height
        bad = [b for b in self.boosters if h in b.malicious_blocks]
        contenders = bad[:1] or [b for b in self.boosters if not b.malicious_blocks or h not in b.malicious_blocks]
        best: tuple[Optional[Booster], Optional[OptimizedBatch], Optional[PoeParams]] = (None, None, None)
        for b in contenders:
            params = self.poe_params(heights, b, malicious=b in bad)
            try:
                batch = optimize_batch(self.mempool, params, snap, workers=self.poe.workers)
            except (InfeasibleError, ValueError) as exc:
                self.state.emit("forge_infeasible", booster=b.name, reason=str(exc))
                continue
            if best[1] is None or batch.score > best[1].score:
                best = (b, batch, params)
        return best[0], best[1], heights, best[2]

    # ------------------------------------------------------------ execution

    def produce_mainnet_block(
        self,
        booster: Optional[Booster],
        batch: Optional[OptimizedBatch],
        heights: list[int],
        params: Optional[PoeParams],
        mark: int,
    ) -> BlockRecord:
        st = self.state
        status = "none"
        forged: list[Hash256] = []
        key: Optional[Hash256] = None
        truth = [self.alien.blocks[h].header_hash for h in heights]
        if batch is not None and params is not None:
            forged, key = reconstruct_targets(batch.ordered_txs, params)
            key_ok = key == booster.key.pubkey if params.forge_key else True  # type: ignore[union-attr]
            bits = params.hash_bits
            ok = key_ok and all(f.bits(0, bits) == t.bits(0, bits) for f, t in zip(forged, truth))
            for h, f in zip(heights, forged):
                self.booster_claims.append(BoosterClaim(h, booster.name, f))  # type: ignore[union-attr]
            if ok:
                status = "catch-up" if len(heights) > 1 else "forged"
                for h, t in zip(heights, truth):
                    self.forged_hashes[h] = t
                self.missed = []
                self.last_target = max(self.last_target, heights[-1])
                st.emit("forged", heights=heights, booster=booster.name)  # type: ignore[union-attr]
            else:
                status = "missed"
                self.missed = list(heights)
                self.last_target = max(self.last_target, heights[-1])
                st.emit("missed_forge", heights=heights, booster=booster.name)  # type: ignore[union-attr]
            ordered = list(batch.ordered_txs)
        else:
            if heights and not self.poe.enabled:
                # forging switched off: hashes are taken as given
                for h in heights:
                    self.forged_hashes[h] = self.alien.blocks[h].header_hash
                self.last_target = max(self.last_target, heights[-1])
                status = "trusted"
            elif heights:
                status = "unforged"
                self.missed = list(heights)
                self.last_target = max(self.last_target, heights[-1])
                st.emit("missed_forge", heights=heights, booster=None, reason="no-feasible-batch")
            ordered = sorted(dedupe_mempool(self.mempool), key=lambda t: (-t.gas_fee.mantissa, t.tx_hash.data))
        self.mempool = []

        from ..poe import ScoreSnapshot

        expected = score_ordering(ordered, ScoreSnapshot.from_pool(st.pool, st.wallets))
        miner, volume, executed, cp_ok = self._execute(ordered)
        score_ok = (miner, volume) == expected
        if batch is not None:
            score_ok = score_ok and (miner, volume) == (batch.miner_score, batch.volume_score)
        paid = ZERO
        if status in ("forged", "catch-up") and booster is not None:
            paid = pay_booster(st.buffer, volume, st.params.buffer.booster_rate, booster.account, st.wallets, st.height)
            st.emit("booster_paid", booster=booster.name, amount=paid, deferred=not paid and bool(volume))
        try:
            r = pool_ratio(st.pool)
        except UndefinedRatio:
            r = None
        nt = self.native_total()
        rec = BlockRecord(
            height=st.height,
            alien_height=self.alien.height,
            forge_status=status,
            target_heights=list(heights),
            booster=booster.name if booster else None,
            miner_score=miner,
            volume_score=volume,
            txs=len(ordered),
            executed=executed,
            booster_paid=paid,
            ratio=r,
            intertoken_inventory=st.pool.intertoken_inventory,
            native_inventory=st.pool.native_inventory,
            buffer=st.buffer.snapshot(),
            native_total=nt,
            native_ok=nt == self.native_baseline,
            supply_gap=st.supply_gap(),
            cp_ok=cp_ok,
            score_ok=score_ok,
            events=[e.to_json() for e in st.events.since(mark)],
            risk=[r.to_json() for r in self.last_risk],
            forged=list(forged),
            forged_key=key,
            true_hashes=truth,
        )
        self.blocks.append(rec)
        for obs in self.observers:
            obs(self, rec)
        return rec

    def _execute(self, ordered: list[MainnetTx]) -> tuple[Amount, Amount, int, bool]:
        st = self.state
        miner = volume = ZERO
        executed = 0
        cp_ok = True
        for tx in ordered:
            k = tx.kind
            if isinstance(k, Exchange):
                pre = st.pool.product
                res = execute_swap(st.pool, tx, st.buffer, st.wallets)
                if not res.executed:
                    continue
                q = res.quote
                new_in = q.new_native if q.inbound_coin == "native" else q.new_intertoken  # type: ignore[union-attr]
                drift = st.pool.product - pre
                cp_ok = cp_ok and 0 <= drift < new_in.mantissa
                vol = q.native_volume  # type: ignore[union-attr]
                st.emit("swap", tx=tx.tx_hash, direction=k.direction, gross_in=q.gross_in, out=q.volume_out, fee=q.fee)  # type: ignore[union-attr]
            else:
                assert isinstance(k, ProvideLiquidity)
                if st.wallets.balance(tx.sender) < k.deposit + tx.gas_fee:
                    continue
                try:
                    join_interpool(st, tx.sender, k.deposit, alien_pubkey=k.alien_pubkey, provider_class=k.provider_class)
                except (MintingDisabled, UndefinedRatio, ValueError):
                    continue
                vol = k.deposit
            st.wallets.transfer(tx.sender, self.miner, tx.gas_fee)
            miner += tx.gas_fee
            volume += vol
            executed += 1
        return miner, volume, executed, cp_ok

    # ------------------------------------------------------------ driver

    def genesis_record(self) -> BlockRecord:
        """Snapshot of the starting state in block-record form (height 0, nothing executed)."""
        from ..risk import risk_report

        st = self.state
        try:
            r = pool_ratio(st.pool)
        except UndefinedRatio:
            r = None
        reports = [risk_report(p, r).to_json() for p in st.open_positions()] if r is not None else []
        return BlockRecord(
            height=st.height,
            alien_height=self.alien.height,
            forge_status="genesis",
            target_heights=[],
            booster=None,
            miner_score=ZERO,
            volume_score=ZERO,
            txs=0,
            executed=0,
            booster_paid=ZERO,
            ratio=r,
            intertoken_inventory=st.pool.intertoken_inventory,
            native_inventory=st.pool.native_inventory,
            buffer=st.buffer.snapshot(),
            native_total=self.native_total(),
            native_ok=self.native_total() == self.native_baseline,
            supply_gap=st.supply_gap(),
            cp_ok=True,
            score_ok=True,
            events=[e.to_json() for e in st.events],
            risk=reports,
        )

    def step(self) -> BlockRecord:
        """Advance one mainnet block."""
        self.state.height += 1
        mark = len(self.state.events)
        for _ in range(self.alien_params.blocks_per_mainnet_block):
            pending, self.pending_alien = self.pending_alien, []
            _, rejected = mine_alien_block(self.alien, pending)
            for rj in rejected:
                self.state.emit("alien_tx_rejected", tx=rj.tx.tx_hash, reason=rj.reason)
        self.begin_block()
        booster, batch, heights, params = self.build_batch()
        self.last_batch = batch
        return self.produce_mainnet_block(booster, batch, heights, params, mark)

    def proof_for(self, tx_hash: Hash256) -> Optional[SpvProof]:
        """SPV proof for a mined alien tx, once its height has been forged."""
        from .alien import make_spv_proof

        loc = self.alien.locate(tx_hash)
        if loc is None or loc[0] not in self.forged_hashes:
            return None
        return make_spv_proof(self.alien.blocks[loc[0]], loc[1])

    def to_json(self) -> dict:
        st = self.state
        return to_jsonable(
            {
                "height": st.height,
                "alien": self.alien.to_json(),
                "forged_hashes": {str(h): v for h, v in sorted(self.forged_hashes.items())},
                "pool": st.pool.to_json(),
                "buffer": st.buffer.snapshot(),
                "positions": [p.to_json() for p in st.positions.values()],
                "wallets": st.wallets.to_json(),
            }
        )
