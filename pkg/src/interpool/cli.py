"""Command-line entry point: ``interpool <command>``.

Every command exits 0 when its checks pass and 1 otherwise.  Argument or
input errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .amm import PoolState
from .chainsim.alien import AlienChain, AlienChainParams, SpvProof, final_height, make_spv_proof, mine_alien_block
from .chainsim.transactions import AlienTx, MainnetTx
from .core import Amount, Hash256, InterpoolError, KeyRegistry, to_jsonable
from .listrack import SwapTerms, account_of, check_spv, expire_swap, open_swap, sign_terms, submit_alien_proof
from .poe import EntropyParams, InfeasibleError, PoeParams, count_orderings, entropy, optimize_batch, reconstruct_targets
from .scenario import ScenarioConfig, bundled_scenarios, load_bundled, run_scenario

log = logging.getLogger("interpool")


def _setup_logging() -> None:
    level = os.environ.get("INTERPOOL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def _print(obj) -> None:
    print(json.dumps(to_jsonable(obj), sort_keys=True, indent=2))


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    if args.config:
        cfg = ScenarioConfig.load(args.config)
    else:
        cfg = load_bundled(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.blocks is not None:
        cfg.blocks = args.blocks
    t0 = time.perf_counter()
    report = run_scenario(cfg, workers=args.workers)
    elapsed = time.perf_counter() - t0
    if log.isEnabledFor(logging.INFO):
        for e in report.events():
            if e["kind"] != "swap" or log.isEnabledFor(logging.DEBUG):
                log.info("block %s %s %s", e["height"], e["kind"],
                         {k: v for k, v in e.items() if k not in ("height", "kind")})
    if args.out:
        out = report.write(args.out)
        print(f"wrote {out / 'blocks.jsonl'}, {out / 'summary.csv'}, {out / 'final.json'}")
    summary = {k: v for k, v in report.final.items() if k not in ("pool", "buffer")}
    summary["elapsed_s"] = round(elapsed, 3)
    _print({"scenario": report.name, "seed": report.seed, **summary})
    if not report.ok:
        bad = [b.height for b in report.blocks if not b.checks_ok]
        print(f"conservation checks failed at blocks {bad}", file=sys.stderr)
    return 0 if report.ok else 1


# ---------------------------------------------------------------- entropy


def cmd_entropy(args) -> int:
    p = EntropyParams(args.n, args.locked_digits, args.hash_bits)
    out = {"n": p.n, "locked_digits": p.locked_digits, "hash_bits": p.hash_bits, "entropy_bits": entropy(p)}
    if args.exact:
        out["orderings"] = str(count_orderings(p))
    _print(out)
    return 0


# ---------------------------------------------------------------- optimize


def _load_batch(path: str) -> tuple[list[MainnetTx], PoolState, dict]:
    """Batch file: {"pool": {...}, "txs": [MainnetTx json, ...], optional PoE knobs}."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    txs = [MainnetTx.from_json(t) for t in obj["txs"]]
    p = obj.get("pool", {})
    pool = PoolState(
        intertoken_inventory=Amount.of(p.get("intertoken", "1000")),
        native_inventory=Amount.of(p.get("native", "2500")),
        fee_rate=Fraction(str(p.get("fee_rate", "0.003"))),
        fee_method=p.get("fee_method", "intertoken"),
        min_volume_threshold=Amount.of(p.get("min_volume_threshold", "0")),
    )
    return txs, pool, obj


def cmd_optimize(args) -> int:
    txs, pool, obj = _load_batch(args.batch)
    key = Hash256.from_hex(args.booster_key) if args.booster_key else None
    params = PoeParams(
        tuple(Hash256.from_hex(t) for t in args.target),
        key,
        hash_bits=args.hash_bits if args.hash_bits is not None else int(obj.get("hash_bits", 256)),
        bits_per_tx=args.bits_per_tx if args.bits_per_tx is not None else int(obj.get("bits_per_tx", 1)),
        move_budget=args.move_budget,
        restarts=args.restarts,
        seed=args.seed,
    )
    try:
        batch = optimize_batch(txs, params, pool, workers=args.workers)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    targets, k = reconstruct_targets(batch.ordered_txs, params)
    bits = params.hash_bits
    ok = all(t.bits(0, bits) == want.bits(0, bits) for t, want in zip(targets, params.target_hashes))
    ok = ok and (key is None or (k is not None and k.bits(0, bits) == key.bits(0, bits)))
    out = batch.to_json()
    out["reconstructed"] = [t.hex() for t in targets]
    out["reconstructed_key"] = k.hex() if k else None
    out["constraints_ok"] = ok
    _print(out)
    return 0 if ok else 1


# ---------------------------------------------------------------- verify-proof


def cmd_verify_proof(args) -> int:
    proof = SpvProof.from_json(json.loads(Path(args.proof).read_text(encoding="utf-8")))
    why = check_spv(proof, Hash256.from_hex(args.forged))
    _print({"valid": why is None, "reason": why or "", "tx_hash": proof.tx.tx_hash.hex(),
            "block_height": proof.block_height})
    return 0 if why is None else 1


# ---------------------------------------------------------------- swap-demo


def swap_demo(happy: bool = True, *, seed: int = 0) -> dict:
    """Run the vanilla swap once on a fresh alien chain; returns balances before and after.

    Alien headers are treated as forged the moment they are final, so the
    walkthrough isolates the swap state machine from the ordering puzzle.
    """
    from .core import Wallets

    reg = KeyRegistry()
    mike_m, alice_m = reg.new_key("mike-mainnet", seed), reg.new_key("alice-mainnet", seed)
    mike_a, alice_a = reg.new_key("mike-alien", seed), reg.new_key("alice-alien", seed)
    wallets = Wallets()
    wallets.credit(account_of(mike_m.pubkey), Amount.of(100))
    wallets.credit(account_of(alice_m.pubkey), Amount.of(50))
    chain = AlienChain(reg)
    chain.fund(alice_a.pubkey, Amount.of(10))
    chain_params = AlienChainParams(finality_depth=1)
    mine_alien_block(chain, [])
    terms = SwapTerms(mike_m.pubkey, alice_m.pubkey, mike_a.pubkey, alice_a.pubkey,
                      Amount.of(25), Amount.of(4), deadline_block=4)
    before = {"mike": wallets.balance(account_of(mike_m.pubkey)), "alice": wallets.balance(account_of(alice_m.pubkey))}
    swap = open_swap(terms, sign_terms(mike_m.secret, terms), sign_terms(alice_m.secret, terms),
                     Amount.of(10), wallets, reg, block=0)
    locked = {"mike": wallets.balance(account_of(mike_m.pubkey)), "alice": wallets.balance(account_of(alice_m.pubkey)),
              "escrow": swap.escrowed}
    forged: dict[int, Hash256] = {}
    tx = AlienTx.signed(alice_a, mike_a.pubkey, Amount.of(4), 0)
    pending = [tx] if happy else []
    for block in range(1, 8):
        mine_alien_block(chain, pending)
        pending = []
        for h in range(final_height(chain, chain_params) + 1):
            forged.setdefault(h, chain.blocks[h].header_hash)
        if happy and swap.state == "locked":
            loc = chain.locate(tx.tx_hash)
            if loc is not None and loc[0] in forged:
                submit_alien_proof(swap, tx, make_spv_proof(chain.blocks[loc[0]], loc[1]), forged, wallets, reg,
                                   block=block)
        expire_swap(swap, block, wallets)
        if swap.state != "locked":
            break
    after = {"mike": wallets.balance(account_of(mike_m.pubkey)), "alice": wallets.balance(account_of(alice_m.pubkey))}
    return {
        "state": swap.state,
        "before": before,
        "locked": locked,
        "after": after,
        "alien": {"mike": chain.balance(mike_a.pubkey), "alice": chain.balance(alice_a.pubkey)},
        "events": [e.to_json() for e in swap.events],
    }


def cmd_swap_demo(args) -> int:
    happy = swap_demo(True, seed=args.seed)
    timeout = swap_demo(False, seed=args.seed)
    _print({"happy_path": happy, "timeout": timeout})
    return 0 if happy["state"] == "completed" and timeout["state"] == "failed" else 1


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="interpool", description="Two-chain interpool protocol simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write its report")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="scenario JSON file")
    src.add_argument("--scenario", choices=[n.removesuffix(".json") for n in bundled_scenarios()],
                     help="bundled scenario name")
    s.add_argument("--seed", type=int)
    s.add_argument("--blocks", type=int, help="override the block count")
    s.add_argument("--out", help="directory for blocks.jsonl, summary.csv and final.json")
    s.add_argument("--workers", type=int, help="optimizer worker processes (reports do not depend on it)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("entropy", help="ordering count and entropy of a balanced batch")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--locked-digits", type=int, default=0)
    e.add_argument("--hash-bits", type=int, default=0)
    e.add_argument("--exact", action="store_true", help="also print the exact ordering count")
    e.set_defaults(func=cmd_entropy)

    o = sub.add_parser("optimize", help="order a batch so its prefix forges the target hash(es)")
    o.add_argument("--batch", required=True, help="JSON with pool and txs")
    o.add_argument("--target", required=True, action="append", help="target hash (hex); repeat for catch-up")
    o.add_argument("--booster-key", help="booster public key to forge into the last bits (hex)")
    o.add_argument("--hash-bits", type=int)
    o.add_argument("--bits-per-tx", type=int)
    o.add_argument("--move-budget", type=int, default=2000)
    o.add_argument("--restarts", type=int, default=2)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--workers", type=int, default=0)
    o.set_defaults(func=cmd_optimize)

    v = sub.add_parser("verify-proof", help="check an SPV proof against a forged header hash")
    v.add_argument("--proof", required=True)
    v.add_argument("--forged", required=True)
    v.set_defaults(func=cmd_verify_proof)

    d = sub.add_parser("swap-demo", help="vanilla swap: happy path and timeout")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_swap_demo)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, InterpoolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
