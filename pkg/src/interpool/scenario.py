"""Scenario configuration, synthetic workload, provider/user agents and run reports.

A scenario is a JSON document (amounts as decimal strings).  ``run_scenario``
builds the two chains, funds the accounts, bootstraps the pool and then
advances the mainnet block by block.  Every block record carries the
conservation checks; the report is a deterministic function of the config.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .amm import PoolState, UndefinedRatio, pool_ratio
from .buffer import BufferThresholds, FeePolicy
from .chainsim.alien import AlienChain, AlienChainParams
from .chainsim.mainnet import BlockRecord, Booster, MainnetSim, PoeConfig
from .chainsim.transactions import BUY, SELL, AlienTx, Exchange, MainnetTx
from .core import ZERO, Amount, Hash256, InterpoolError, KeyPair, KeyRegistry, canonical_json, to_jsonable
from .risk import join_interpool
from .state import BufferParams, BurnParams, InterpoolState, ProtocolParams, RiskParams

__all__ = [
    "SCHEMA_VERSION",
    "RunReport",
    "ScenarioConfig",
    "WorkloadError",
    "WorkloadSpec",
    "bundled_scenarios",
    "generate_workload",
    "load_bundled",
    "run_scenario",
]

SCHEMA_VERSION = 1
log = logging.getLogger("interpool")


class ConfigError(InterpoolError, ValueError):
    pass


class WorkloadError(InterpoolError):
    pass


def _amt(v: Any) -> Amount:
    if isinstance(v, Amount):
        return v
    if isinstance(v, float):
        raise ConfigError(f"amounts must be decimal strings, got float {v!r}")
    return Amount.of(str(v))


def _frac(v: Any) -> Fraction:
    if isinstance(v, float):
        raise ConfigError(f"ratios must be decimal strings, got float {v!r}")
    return Fraction(str(v))


# ---------------------------------------------------------------- config


@dataclass
class WorkloadSpec:
    users: int = 8
    user_native: Amount = Amount.of(10_000)
    tx_per_block: int = 0
    buy_fraction: Fraction = Fraction(1, 2)
    volume_min: Amount = Amount.of("0.1")
    volume_max: Amount = Amount.of(5)
    band: Fraction = Fraction(1, 10)
    jitter: Fraction = Fraction(1, 20)
    gas_price_max: int = 50
    gas_limit_max: int = 3
    claim_rate: Fraction = Fraction(0)
    claim_max: Amount = Amount.of(1)

    @classmethod
    def from_json(cls, obj: dict) -> WorkloadSpec:
        w = cls()
        for key in ("users", "tx_per_block", "gas_price_max", "gas_limit_max"):
            if key in obj:
                setattr(w, key, int(obj[key]))
        for key in ("user_native", "volume_min", "volume_max", "claim_max"):
            if key in obj:
                setattr(w, key, _amt(obj[key]))
        for key in ("buy_fraction", "band", "jitter", "claim_rate"):
            if key in obj:
                setattr(w, key, _frac(obj[key]))
        if w.users < 1 or w.tx_per_block < 0 or w.volume_min <= 0 or w.volume_max < w.volume_min:
            raise ConfigError("workload knobs out of range")
        if not 0 <= w.buy_fraction <= 1 or not 0 <= w.claim_rate <= 1 or not 0 < w.band < 1:
            raise ConfigError("workload fractions out of range")
        return w


@dataclass
class ProviderSpec:
    owner: str
    deposit: Amount
    provider_class: str = "regular"
    block: int = 0
    lazy: bool = False
    auto_inject: bool = False


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    blocks: int = 0
    finality_depth: int = 1
    blocks_per_mainnet_block: int = 1
    poe: PoeConfig = field(default_factory=PoeConfig)
    boosters: int = 1
    malicious: list[tuple[int, int]] = field(default_factory=list)  # (booster index, block)
    initial_ratio: Fraction = Fraction(5, 2)
    min_volume_threshold: Amount = ZERO
    providers: list[ProviderSpec] = field(default_factory=list)
    exits: list[tuple[int, str]] = field(default_factory=list)
    shocks: list[tuple[int, Fraction]] = field(default_factory=list)
    fee: FeePolicy = field(default_factory=FeePolicy)
    adaptive_fee: bool = False
    risk: RiskParams = field(default_factory=RiskParams)
    burn: BurnParams = field(default_factory=BurnParams)
    buffer: BufferParams = field(default_factory=BufferParams)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    arb_native: Amount = Amount.of(1_000_000)
    provider_native: Amount = Amount.of(1_000)
    events_in_report: bool = True
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_json(cls, obj: dict) -> ScenarioConfig:
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
        c = cls(raw=obj)
        c.name = str(obj.get("name", "scenario"))
        c.seed = int(obj.get("seed", 0))
        if not 0 <= c.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        c.blocks = int(obj.get("blocks", 0))
        if c.blocks < 0:
            raise ConfigError("blocks must be >= 0")
        chain = obj.get("chain", {})
        c.finality_depth = int(chain.get("finality_depth", 1))
        c.blocks_per_mainnet_block = int(chain.get("blocks_per_mainnet_block", 1))
        p = obj.get("poe", {})
        c.poe = PoeConfig(
            enabled=bool(p.get("enabled", True)),
            hash_bits=int(p.get("hash_bits", 256)),
            bits_per_tx=int(p.get("bits_per_tx", 1)),
            forge_key=bool(p.get("forge_key", True)),
            move_budget=int(p.get("move_budget", 300)),
            restarts=int(p.get("restarts", 0)),
            exact_limit=int(p.get("exact_limit", 50_000)),
            workers=int(p.get("workers", 0)),
        )
        c.boosters = int(p.get("boosters", 1))
        c.malicious = [(int(m["booster"]), int(m["block"])) for m in p.get("malicious", [])]
        if c.boosters < 1 or any(not 0 <= b < c.boosters for b, _ in c.malicious):
            raise ConfigError("malicious booster index out of range")
        pool = obj.get("pool", {})
        c.initial_ratio = _frac(pool.get("initial_ratio", "2.5"))
        c.min_volume_threshold = _amt(pool.get("min_volume_threshold", "0"))
        for ps in pool.get("providers", []):
            c.providers.append(
                ProviderSpec(
                    owner=str(ps["owner"]),
                    deposit=_amt(ps["deposit"]),
                    provider_class=str(ps.get("class", "regular")),
                    block=int(ps.get("block", 0)),
                    lazy=bool(ps.get("lazy", False)),
                    auto_inject=bool(ps.get("auto_inject", False)),
                )
            )
        if not any(ps.block == 0 for ps in c.providers) and c.blocks:
            raise ConfigError("at least one provider must join at block 0 to bootstrap the pool")
        c.exits = [(int(e["block"]), str(e["owner"])) for e in obj.get("exits", [])]
        c.shocks = [(int(s["block"]), _frac(s["target_ratio"])) for s in obj.get("shocks", [])]
        f = obj.get("fee", {})
        c.fee = FeePolicy(
            fee_min=_frac(f.get("fee_min", "0.0005")),
            fee_max=_frac(f.get("fee_max", "0.03")),
            target_liquidity=_amt(f.get("target_liquidity", "1000")),
            rate=_frac(f.get("rate", "0.003")),
        )
        c.adaptive_fee = bool(f.get("adaptive", False))
        r = obj.get("risk", {})
        c.risk = RiskParams(injection_margin=_frac(r.get("injection_margin", "1")), grace_blocks=int(r.get("grace_blocks", 3)))
        b = obj.get("burn", {})
        c.burn = BurnParams(
            transfer_window=int(b.get("transfer_window", 3)),
            full_transfer_window=int(b.get("full_transfer_window", 1)),
            finality_latency=int(b.get("finality_latency", c.finality_depth + 2)),
            cycle_length=int(b.get("cycle_length", 16)),
            never_liquidity_limit=int(b.get("never_liquidity_limit", 64)),
            p_max=_frac(b.get("p_max", "0.05")),
            decay_window=int(b["decay_window"]) if "decay_window" in b else None,
            key_change_penalty=_frac(b.get("key_change_penalty", "0.05")),
            claimant_share=_frac(b.get("claimant_share", "1")),
            full_fee_multiplier=_frac(b.get("full_fee_multiplier", "1")),
        )
        bu = obj.get("buffer", {})
        c.buffer = BufferParams(
            booster_rate=_frac(bu.get("booster_rate", "0.001")),
            provider_epoch=int(bu.get("provider_epoch", 16)),
            provider_reserve=_amt(bu.get("provider_reserve", "0")),
            thresholds=BufferThresholds(_amt(bu.get("intertoken_threshold", "1")), _amt(bu.get("native_threshold", "1"))),
            volatility_window=int(bu.get("volatility_window", 16)),
            volatility_threshold=float(str(bu.get("volatility_threshold", "0.05"))),
            deploy_fraction=_frac(bu.get("deploy_fraction", "0.1")),
            adaptive_fee=c.adaptive_fee,
        )
        c.workload = WorkloadSpec.from_json(obj.get("workload", {}))
        c.arb_native = _amt(obj.get("arb_native", "1000000"))
        c.provider_native = _amt(obj.get("provider_native", "1000"))
        c.events_in_report = bool(obj.get("report", {}).get("events", True))
        if c.finality_depth < 0 or c.blocks_per_mainnet_block < 1:
            raise ConfigError("chain parameters out of range")
        if c.risk.grace_blocks < 0 or c.burn.transfer_window < 0 or c.burn.cycle_length < 1:
            raise ConfigError("risk or burn knobs out of range")
        return c

    @classmethod
    def load(cls, path: str | os.PathLike) -> ScenarioConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def bundled_scenarios() -> list[str]:
    root = resources.files("interpool") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> ScenarioConfig:
    if not name.endswith(".json"):
        name += ".json"
    text = (resources.files("interpool") / "scenarios" / name).read_text(encoding="utf-8")
    return ScenarioConfig.from_json(json.loads(text))


# ---------------------------------------------------------------- workload


def _tx_class(h: Hash256, diversity_bits: int) -> int:
    """Leading ``diversity_bits`` bits, then the trailing bits repeated the same way."""
    v = h.as_int()
    lead = v >> (256 - diversity_bits)
    tail = v & ((1 << diversity_bits) - 1)
    return (lead << diversity_bits) | tail


def _grind_targets(diversity_bits: int) -> list[int]:
    """Classes to spread transactions over.

    Leading bits take every pattern; trailing bits are all-zero or all-one,
    which is what a forged key bit looks like when it is repeated in catch-up
    blocks.  Each single-bit class (first bit, last bit) gets the same share.
    """
    d = diversity_bits
    tails = [0, (1 << d) - 1] if d > 1 else [0, 1]
    return [(lead << d) | t for lead in range(1 << d) for t in tails]


def generate_workload(
    spec: WorkloadSpec,
    seed: int | random.Random,
    *,
    count: Optional[int] = None,
    ratio: Fraction = Fraction(5, 2),
    users: Optional[list[str]] = None,
    nonces: Optional[dict[str, int]] = None,
    diversity_bits: int = 2,
    min_count: int = 0,
    max_tries: int = 4096,
) -> list[MainnetTx]:
    """Random exchange txs whose hash bits are spread evenly over the forging classes.

    Nonces are varied until each tx lands in the next class of a round-robin,
    so a batch of ``m`` txs has ``m / classes`` members in every class.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    m = spec.tx_per_block if count is None else count
    if m <= 0:
        return []
    if m < min_count:
        raise WorkloadError(f"{m} txs cannot fill a forging prefix of {min_count}")
    targets = _grind_targets(diversity_bits)
    if min_count and m < len(targets):
        raise WorkloadError(f"{m} txs cannot cover {len(targets)} bit classes")
    users = users or [f"u{i:02d}" for i in range(spec.users)]
    nonces = nonces if nonces is not None else {}
    out = []
    span = spec.volume_max.mantissa - spec.volume_min.mantissa
    for j in range(m):
        sender = users[rng.randrange(len(users))]
        buy = rng.random() < float(spec.buy_fraction)
        native_vol = spec.volume_min.mantissa + (rng.randrange(span + 1) if span else 0)
        native_vol = max(native_vol // 10**6 * 10**6, 10**6)
        centre = ratio * (1 + Fraction(rng.randrange(-1000, 1001), 1000) * spec.jitter)
        lo = Amount(int(centre * (1 - spec.band) * 10**12))
        hi = Amount(int(centre * (1 + spec.band) * 10**12))
        vol = Amount(native_vol) if buy else Amount(int(Fraction(native_vol) / ratio))
        if vol <= 0:
            vol = Amount(1)
        price = Amount.of(rng.randrange(1, spec.gas_price_max + 1)) / 1000
        limit = Amount.of(rng.randrange(1, spec.gas_limit_max + 1))
        kind = Exchange(BUY if buy else SELL, vol, lo, hi)
        want = targets[j % len(targets)] if min_count else None
        n0 = nonces.get(sender, 0)
        for t in range(max_tries):
            tx = MainnetTx(sender, n0 + t, price, limit, kind)
            if want is None or _tx_class(tx.tx_hash, diversity_bits) == want:
                break
        else:
            raise WorkloadError(f"could not grind a nonce for class {want} in {max_tries} tries")
        nonces[sender] = tx.nonce + 1
        out.append(tx)
    return out


# ---------------------------------------------------------------- agents


class _Agents:
    """Honest (or lazy) providers and redeeming users reacting to each block's events."""

    def __init__(self, cfg: ScenarioConfig, sim: MainnetSim, rng: random.Random, keys: dict[str, KeyPair]):
        self.cfg = cfg
        self.sim = sim
        self.rng = rng
        self.keys = keys
        self.alien_nonce: dict[Hash256, int] = {}
        self.waiting: list[tuple[int, str, AlienTx]] = []
        self.lazy = {p.owner for p in cfg.providers if p.lazy}
        self.injectors = {p.owner for p in cfg.providers if p.auto_inject}

    def __call__(self, sim: MainnetSim, rec: BlockRecord) -> None:
        st = sim.state
        for ev in rec.events:
            kind = ev["kind"]
            if kind == "burn_assigned":
                pos = st.positions[ev["provider_id"]]
                if pos.owner in self.lazy:
                    continue
                kp = self.keys[pos.owner]
                claim = st.claims[ev["claim_id"]]
                n = self.alien_nonce.get(kp.pubkey, 0)
                self.alien_nonce[kp.pubkey] = n + 1
                tx = AlienTx.signed(kp, claim.claimant_alien_pubkey, claim.amount, n)
                sim.submit_alien_tx(tx)
                self.waiting.append((claim.claim_id, pos.provider_id, tx))
            elif kind == "injection_requested":
                pos = st.positions[ev["provider_id"]]
                amount = Amount(ev["amount"])
                if pos.owner in self.injectors and st.wallets.balance(pos.owner) >= amount:
                    sim.submit_action("inject", provider_id=pos.provider_id, amount=amount)
        still = []
        for cid, pid, tx in self.waiting:
            claim = st.claims[cid]
            # a reopened claim belongs to its new provider's transfer
            if claim.state != "assigned" or claim.assigned_provider != pid:
                continue
            proof = sim.proof_for(tx.tx_hash)
            if proof is None:
                still.append((cid, pid, tx))
            else:
                sim.submit_action("burn_proof", claim_id=cid, tx=tx, proof=proof)
        self.waiting = still


# ---------------------------------------------------------------- run


@dataclass
class RunReport:
    name: str
    seed: int
    blocks: list[BlockRecord]
    final: dict

    @property
    def ok(self) -> bool:
        return bool(self.final.get("all_checks_pass"))

    def block_lines(self) -> list[str]:
        return [canonical_json(b.to_json()) for b in self.blocks]

    def jsonl(self) -> str:
        return "".join(line + "\n" for line in self.block_lines())

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["height", "ratio", "intertoken_inventory", "native_inventory", "native_stack",
                    "intertoken_stack", "burn_debt", "fee_method", "forge_status", "txs", "executed",
                    "miner_score", "volume_score", "checks_ok"])
        for b in self.blocks:
            ratio = "" if b.ratio is None else f"{b.ratio.numerator * 10**12 // b.ratio.denominator / 10**12:.12f}"
            w.writerow([
                b.height, ratio, b.intertoken_inventory, b.native_inventory,
                Amount(b.buffer["native_stack"]), Amount(b.buffer["intertoken_stack"]), Amount(b.buffer["burn_debt"]),
                b.buffer["fee_method"], b.forge_status, b.txs, b.executed, b.miner_score, b.volume_score,
                int(b.checks_ok),
            ])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(to_jsonable({"name": self.name, "seed": self.seed, **self.final}), sort_keys=True, indent=2) + "\n"

    def write(self, out_dir: str | os.PathLike) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "blocks.jsonl").write_text(self.jsonl(), encoding="utf-8")
        (out / "summary.csv").write_text(self.csv(), encoding="utf-8")
        (out / "final.json").write_text(self.summary_json(), encoding="utf-8")
        return out

    def events(self, kind: Optional[str] = None) -> list[dict]:
        return [e for b in self.blocks for e in b.events if kind is None or e["kind"] == kind]


def build_simulation(cfg: ScenarioConfig) -> tuple[MainnetSim, _Agents, random.Random]:
    registry = KeyRegistry()
    params = ProtocolParams(risk=cfg.risk, burn=cfg.burn, buffer=cfg.buffer)
    fee = FeePolicy(cfg.fee.fee_min, cfg.fee.fee_max, cfg.fee.target_liquidity, cfg.fee.rate)
    state = InterpoolState(pool=PoolState(min_volume_threshold=cfg.min_volume_threshold), fee_policy=fee,
                           registry=registry, params=params)
    alien = AlienChain(registry)
    alien_params = AlienChainParams(cfg.finality_depth, cfg.blocks_per_mainnet_block)
    boosters = []
    for i in range(cfg.boosters):
        bad = frozenset(blk for b, blk in cfg.malicious if b == i)
        boosters.append(Booster(f"b{i}", registry.new_key("booster", cfg.seed, i), bad))
    sim = MainnetSim(state, alien, alien_params, cfg.poe, boosters, seed=cfg.seed)
    rng = random.Random(cfg.seed)
    keys: dict[str, KeyPair] = {}
    for ps in cfg.providers:
        if ps.owner not in keys:
            keys[ps.owner] = registry.new_key("alien", cfg.seed, ps.owner)
            alien.fund(keys[ps.owner].pubkey, Amount.of(1_000_000))
            state.wallets.credit(ps.owner, cfg.provider_native)
    for i in range(cfg.workload.users):
        state.wallets.credit(f"u{i:02d}", cfg.workload.user_native)
    state.wallets.credit("arb", cfg.arb_native)
    for ps in cfg.providers:
        if ps.block == 0:
            join_interpool(state, ps.owner, ps.deposit, alien_pubkey=keys[ps.owner].pubkey,
                           provider_class=ps.provider_class, initial_ratio=cfg.initial_ratio, genesis=True)
    sim.rebase()
    agents = _Agents(cfg, sim, rng, keys)
    sim.observers.append(agents)
    return sim, agents, rng


def run_scenario(cfg: ScenarioConfig, *, workers: Optional[int] = None) -> RunReport:
    if workers is not None:
        cfg.poe.workers = workers
    sim, agents, rng = build_simulation(cfg)
    st = sim.state
    users = [f"u{i:02d}" for i in range(cfg.workload.users)]
    user_keys = {u: st.registry.new_key("alien-user", cfg.seed, u) for u in users}
    nonces: dict[str, int] = {}
    joins = {}
    for ps in cfg.providers:
        if ps.block > 0:
            joins.setdefault(ps.block, []).append(ps)
    exits: dict[int, list[str]] = {}
    for blk, owner in cfg.exits:
        exits.setdefault(blk, []).append(owner)
    shocks = dict(cfg.shocks)
    records = [sim.genesis_record()]
    diversity = max(1, cfg.poe.bits_per_tx) * 2
    prefix = cfg.poe.hash_bits // cfg.poe.bits_per_tx if cfg.poe.enabled else 0
    for h in range(1, cfg.blocks + 1):
        # everything queued now is applied in step 1 of block h
        for ps in joins.get(h, []):
            sim.submit_action("join", owner=ps.owner, deposit=ps.deposit, alien_pubkey=agents.keys[ps.owner].pubkey,
                              provider_class=ps.provider_class)
        for owner in exits.get(h, []):
            for pos in st.positions.values():
                if pos.owner == owner and pos.is_open:
                    sim.submit_action("withdraw", provider_id=pos.provider_id)
        if h in shocks:
            sim.submit_action("shock", account="arb", target_ratio=shocks[h])
        if cfg.workload.claim_rate and rng.random() < float(cfg.workload.claim_rate):
            holders = [u for u in users if st.wallets.balance(u, "intertoken") > 0]
            if holders:
                u = holders[rng.randrange(len(holders))]
                bal = st.wallets.balance(u, "intertoken")
                amt = min(bal, Amount(rng.randrange(1, cfg.workload.claim_max.mantissa + 1)))
                sim.submit_action("claim_burn", user=u, amount=amt, alien_pubkey=user_keys[u].pubkey)
        try:
            ratio = pool_ratio(st.pool)
        except UndefinedRatio:
            ratio = cfg.initial_ratio
        for tx in generate_workload(cfg.workload, rng, ratio=ratio, users=users, nonces=nonces,
                                    diversity_bits=diversity, min_count=prefix):
            sim.submit_tx(tx)
        rec = sim.step()
        records.append(rec)
        if not rec.checks_ok:
            log.warning("block %d failed a conservation check", h)
    if not cfg.events_in_report:
        for r in records:
            r.events = []
    final = _final_checks(sim, records)
    return RunReport(cfg.name, cfg.seed, records, final)


def _final_checks(sim: MainnetSim, records: list[BlockRecord]) -> dict:
    native = all(r.native_ok for r in records)
    supply = all(not r.supply_gap for r in records)
    cp = all(r.cp_ok for r in records)
    score = all(r.score_ok for r in records)
    forged = [r for r in records if r.forge_status in ("forged", "catch-up", "missed", "unforged")]
    events = [e for r in records for e in r.events]
    return {
        "blocks": len(records) - 1,
        "native_conservation": native,
        "supply_identity": supply,
        "constant_product": cp,
        "score_recomputed": score,
        "all_checks_pass": native and supply and cp and score,
        "forged_blocks": sum(r.forge_status == "forged" for r in forged),
        "catch_up_blocks": sum(r.forge_status == "catch-up" for r in forged),
        "missed_forges": sum(r.forge_status in ("missed", "unforged") for r in forged),
        "forgery_alarms": sum(e["kind"] == "forgery_alarm" for e in events),
        "liquidations": sum(e["kind"] == "liquidated" for e in events),
        "burns_proven": sum(e["kind"] == "burn_proven" for e in events),
        "burns_slashed": sum(e["kind"] == "burn_slashed" for e in events),
        "final_ratio": records[-1].ratio,
        "final_native_total": records[-1].native_total,
        "pool": sim.state.pool.to_json(),
        "buffer": sim.state.buffer.snapshot(),
    }
