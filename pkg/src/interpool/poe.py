"""Bit-constrained transaction ordering (the booster) and ordering-count analytics.

The first ``P`` transactions of a block (the forging prefix) are ordered so
that the leading ``b`` bits of their hashes spell the alien finality hash and
the trailing ``b`` bits spell the booster's public key.  Inside that
constraint the booster maximizes (gas collected, native volume executed),
compared lexicographically.

Bit layout with ``T`` target hashes (``T = 2`` after a missed forge): the
target bits are interleaved into one stream where position ``p`` holds bit
``p // T`` of target ``p % T``; transaction ``i`` of the prefix carries stream
positions ``i*b .. i*b+b-1`` in hash bits ``0 .. b-1``.  The key stream repeats
every key bit ``T`` times and occupies hash bits ``256-b .. 255``.
"""

from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .amm import PoolState
from .chainsim.transactions import BUY, Exchange, MainnetTx, ProvideLiquidity, dedupe_mempool
from .core import SCALE, Amount, Hash256, InterpoolError, Wallets

__all__ = [
    "EntropyParams",
    "InfeasibleError",
    "OptimizedBatch",
    "PoeParams",
    "ScoreSnapshot",
    "brute_force_optimize",
    "count_feasible",
    "count_orderings",
    "entropy",
    "is_feasible",
    "optimize_batch",
    "prefix_length",
    "random_baseline",
    "random_feasible_ordering",
    "reconstruct_forged",
    "reconstruct_targets",
    "score_ordering",
    "slot_classes",
    "tx_class",
]


class InfeasibleError(InterpoolError):
    def __init__(self, slot: int, required: str, message: str = ""):
        self.slot = slot
        self.required = required
        super().__init__(message or f"no transaction left for forging slot {slot} (needs bits {required})")


class ParameterError(InterpoolError, ValueError):
    pass


# ---------------------------------------------------------------- parameters and slots


@dataclass(frozen=True)
class PoeParams:
    target_hashes: tuple[Hash256, ...]
    booster_pubkey: Optional[Hash256] = None
    hash_bits: int = 256
    bits_per_tx: int = 1
    min_batch: int = 256
    move_budget: int = 2000
    restarts: int = 2
    seed: int = 0
    exact_limit: int = 50_000

    def __post_init__(self):
        object.__setattr__(self, "target_hashes", tuple(self.target_hashes))
        if not self.target_hashes:
            raise ParameterError("need at least one target hash")
        if not 0 <= self.hash_bits <= 256:
            raise ParameterError("hash_bits must lie in [0, 256]")
        if not 1 <= self.bits_per_tx <= 128:
            raise ParameterError("bits_per_tx must lie in [1, 128]")
        if (self.hash_bits * len(self.target_hashes)) % self.bits_per_tx:
            raise ParameterError("bits_per_tx must divide hash_bits * number of targets")

    @property
    def forge_key(self) -> bool:
        return self.booster_pubkey is not None

    @property
    def prefix_length(self) -> int:
        return self.hash_bits * len(self.target_hashes) // self.bits_per_tx


def prefix_length(params: PoeParams) -> int:
    return params.prefix_length


def _pattern(h: Hash256, start: int, count: int) -> int:
    v = h.as_int()
    return (v >> (256 - start - count)) & ((1 << count) - 1)


def tx_class(h: Hash256, params: PoeParams) -> int:
    """Locked-bit pattern of a hash: leading bits, then trailing bits when the key is forged."""
    b = params.bits_per_tx
    c = _pattern(h, 0, b)
    if params.forge_key:
        c = (c << b) | _pattern(h, 256 - b, b)
    return c


def slot_classes(params: PoeParams) -> list[int]:
    """Required class of every forging-prefix slot, in slot order."""
    b, T = params.bits_per_tx, len(params.target_hashes)
    out = []
    for i in range(params.prefix_length):
        first = last = 0
        for j in range(b):
            p = i * b + j
            first = (first << 1) | params.target_hashes[p % T].bit(p // T)
            if params.forge_key:
                last = (last << 1) | params.booster_pubkey.bit(p // T)  # type: ignore[union-attr]
        out.append((first << b) | last if params.forge_key else first)
    return out


def _class_str(c: int, params: PoeParams) -> str:
    width = params.bits_per_tx * (2 if params.forge_key else 1)
    s = format(c, f"0{width}b")
    if params.forge_key:
        return f"{s[:params.bits_per_tx]}..{s[params.bits_per_tx:]}"
    return s


def _check_feasible(classes: Sequence[int], slots: Sequence[int], params: PoeParams) -> None:
    have: dict[int, int] = {}
    for c in classes:
        have[c] = have.get(c, 0) + 1
    for i, need in enumerate(slots):
        if have.get(need, 0) == 0:
            raise InfeasibleError(i, _class_str(need, params))
        have[need] -= 1


def is_feasible(ordered: Sequence[MainnetTx], params: PoeParams) -> bool:
    slots = slot_classes(params)
    if len(ordered) < len(slots):
        return False
    return all(tx_class(t.tx_hash, params) == s for t, s in zip(ordered, slots))


def count_feasible(mempool: Sequence[MainnetTx], params: PoeParams) -> int:
    """Number of orderings of the whole mempool that satisfy the prefix constraint."""
    slots = slot_classes(params)
    need: dict[int, int] = {}
    for s in slots:
        need[s] = need.get(s, 0) + 1
    have: dict[int, int] = {}
    for t in mempool:
        c = tx_class(t.tx_hash, params)
        have[c] = have.get(c, 0) + 1
    total = math.factorial(len(mempool) - len(slots)) if len(mempool) >= len(slots) else 0
    for c, k in need.items():
        total *= math.perm(have.get(c, 0), k)
    return total


# ---------------------------------------------------------------- reconstruction


def reconstruct_targets(ordered: Sequence[MainnetTx], params: PoeParams) -> tuple[list[Hash256], Optional[Hash256]]:
    """Read every target hash (zero-padded past ``hash_bits``) and the key back out of an ordering."""
    P, b, T = params.prefix_length, params.bits_per_tx, len(params.target_hashes)
    if len(ordered) < P:
        raise ValueError(f"ordering has {len(ordered)} txs, forging prefix needs {P}")
    tbits = [[0] * 256 for _ in range(T)]
    kbits = [0] * 256
    for i in range(P):
        h = ordered[i].tx_hash
        for j in range(b):
            p = i * b + j
            tbits[p % T][p // T] = h.bit(j)
            if p % T == 0:
                kbits[p // T] = h.bit(256 - b + j)
    targets = [Hash256.from_bits(bits) for bits in tbits]
    key = Hash256.from_bits(kbits) if params.forge_key else None
    return targets, key


def reconstruct_forged(ordered: Sequence[MainnetTx], params: PoeParams) -> tuple[Hash256, Optional[Hash256]]:
    """(oldest forged alien hash, booster key); see :func:`reconstruct_targets` for all targets."""
    targets, key = reconstruct_targets(ordered, params)
    return targets[0], key


def truncated(h: Hash256, bits: int) -> Hash256:
    """``h`` with everything past the first ``bits`` bits zeroed."""
    if bits >= 256:
        return h
    mask = ((1 << bits) - 1) << (256 - bits) if bits else 0
    return Hash256((h.as_int() & mask).to_bytes(32, "big"))


# ---------------------------------------------------------------- scoring


@dataclass(frozen=True)
class ScoreSnapshot:
    """Integer view of the pool (and optionally sender balances) used while scoring."""

    intertoken: int
    native: int
    fee_num: int
    fee_den: int
    fee_on_intertoken: bool
    min_volume: int = 0
    balances: Optional[dict[tuple[str, str], int]] = None

    @classmethod
    def from_pool(cls, pool: PoolState, wallets: Wallets | None = None) -> ScoreSnapshot:
        bal = None
        if wallets is not None:
            bal = {(a, "native"): v.mantissa for a, v in wallets.native.items()}
            bal.update({(a, "intertoken"): v.mantissa for a, v in wallets.intertoken.items()})
        fr = Fraction(pool.fee_rate)
        return cls(
            pool.intertoken_inventory.mantissa,
            pool.native_inventory.mantissa,
            fr.numerator,
            fr.denominator,
            pool.fee_method == "intertoken",
            pool.min_volume_threshold.mantissa,
            bal,
        )


def _as_snapshot(snap: PoolState | ScoreSnapshot) -> ScoreSnapshot:
    return snap if isinstance(snap, ScoreSnapshot) else ScoreSnapshot.from_pool(snap)


# compiled tx: (is_exchange, buy, volume_or_deposit, lo, hi, gas_fee, sender)
_Compiled = tuple


def _compile(tx: MainnetTx) -> _Compiled:
    k = tx.kind
    gas = tx.gas_fee.mantissa
    if isinstance(k, Exchange):
        return (True, k.direction == BUY, k.volume_in.mantissa, k.ratio_min.mantissa, k.ratio_max.mantissa, gas, tx.sender)
    assert isinstance(k, ProvideLiquidity)
    return (False, False, k.deposit.mantissa, 0, 0, gas, tx.sender)


def _step(ct: _Compiled, i: int, n: int, s: ScoreSnapshot, bal: Optional[dict]):
    """Apply one compiled tx; returns (executed, new_i, new_n, gas, volume)."""
    is_ex, buy, vol, lo, hi, gas, sender = ct
    if i <= 0 or n <= 0:
        return False, i, n, 0, 0
    if is_ex:
        if not (lo * i <= n * SCALE <= hi * i):
            return False, i, n, 0, 0
        if buy:
            inv_in, inv_out = n, i
        else:
            inv_in, inv_out = i, n
        new_in = inv_in + vol
        new_out = -(-(inv_in * inv_out) // new_in)
        curve_out = inv_out - new_out
        if curve_out <= 0:
            return False, i, n, 0, 0
        fn, fd = s.fee_num, s.fee_den
        if fn == 0:
            fee, gross, out = 0, vol, curve_out
        elif s.fee_on_intertoken != buy:
            gross = -(-vol * fd // (fd - fn))
            fee, out = gross - vol, curve_out
        else:
            gross, fee = vol, curve_out * fn // fd
            out = curve_out - fee
        if bal is not None:
            cin, cout = ("native", "intertoken") if buy else ("intertoken", "native")
            need_in = gross + (gas if buy else 0)
            if bal.get((sender, cin), 0) < need_in:
                return False, i, n, 0, 0
            if not buy and bal.get((sender, "native"), 0) < gas:
                return False, i, n, 0, 0
            bal[(sender, cin)] = bal.get((sender, cin), 0) - gross
            bal[(sender, cout)] = bal.get((sender, cout), 0) + out
            bal[(sender, "native")] = bal[(sender, "native")] - gas
        if buy:
            return True, new_out, new_in, gas, vol
        # the native leg is the full curve output whichever side pays the fee
        return True, new_in, new_out, gas, curve_out
    # provide-liquidity: half joins the pool at the current ratio
    if n < s.min_volume:
        return False, i, n, 0, 0
    twin = vol // 2
    minted = twin * i // n
    if minted <= 0:
        return False, i, n, 0, 0
    if bal is not None:
        if bal.get((sender, "native"), 0) < vol + gas:
            return False, i, n, 0, 0
        bal[(sender, "native")] -= vol + gas
    return True, i + minted, n + twin, gas, vol


def _simulate(compiled: Sequence[_Compiled], order: Sequence[int], s: ScoreSnapshot) -> tuple[int, int]:
    i, n = s.intertoken, s.native
    bal = dict(s.balances) if s.balances is not None else None
    miner = volume = 0
    for idx in order:
        ok, i, n, g, v = _step(compiled[idx], i, n, s, bal)
        if ok:
            miner += g
            volume += v
    return miner, volume


def execution_mask(ordered: Sequence[MainnetTx], snapshot: PoolState | ScoreSnapshot) -> list[bool]:
    """Which transactions of ``ordered`` would execute."""
    s = _as_snapshot(snapshot)
    i, n = s.intertoken, s.native
    bal = dict(s.balances) if s.balances is not None else None
    out = []
    for t in ordered:
        ok, i, n, _, _ = _step(_compile(t), i, n, s, bal)
        out.append(ok)
    return out


def score_ordering(ordered: Sequence[MainnetTx], snapshot: PoolState | ScoreSnapshot) -> tuple[Amount, Amount]:
    """(gas collected, native volume) from running ``ordered`` against a copy of the pool."""
    s = _as_snapshot(snapshot)
    compiled = [_compile(t) for t in ordered]
    m, v = _simulate(compiled, range(len(compiled)), s)
    return Amount(m), Amount(v)


# ---------------------------------------------------------------- batch result


@dataclass(frozen=True)
class OptimizedBatch:
    ordered_txs: tuple[MainnetTx, ...]
    forged_hash_bits: str
    booster_key_bits: str
    miner_score: Amount
    volume_score: Amount
    method: str = "heuristic"
    params: Optional[PoeParams] = field(default=None, compare=False, repr=False)

    @property
    def score(self) -> tuple[int, int]:
        return self.miner_score.mantissa, self.volume_score.mantissa

    def to_json(self) -> dict:
        return {
            "ordered_txs": [t.tx_hash.hex() for t in self.ordered_txs],
            "forged_hash_bits": self.forged_hash_bits,
            "booster_key_bits": self.booster_key_bits,
            "miner_score": self.miner_score.mantissa,
            "volume_score": self.volume_score.mantissa,
            "method": self.method,
        }


def _make_batch(txs: Sequence[MainnetTx], order: Sequence[int], score, params: PoeParams, method: str) -> OptimizedBatch:
    ordered = tuple(txs[i] for i in order)
    b, P = params.bits_per_tx, params.prefix_length
    first = "".join(t.tx_hash.bits(0, b) for t in ordered[:P])
    last = "".join(t.tx_hash.bits(256 - b, b) for t in ordered[:P]) if params.forge_key else ""
    return OptimizedBatch(ordered, first, last, Amount(score[0]), Amount(score[1]), method, params)


# ---------------------------------------------------------------- exact search


def _dfs_exact(compiled, classes, slots, s: ScoreSnapshot) -> tuple[tuple[int, int], list[int]]:
    """Best feasible ordering; ties go to the smallest index sequence."""
    n_tx = len(compiled)
    P = len(slots)
    used = [False] * n_tx
    order: list[int] = []
    best: list = [(-1, -1), []]

    def rec(pos: int, i: int, n: int, bal, miner: int, vol: int) -> None:
        if pos == n_tx:
            if (miner, vol) > best[0]:
                best[0] = (miner, vol)
                best[1] = list(order)
            return
        need = slots[pos] if pos < P else None
        for idx in range(n_tx):
            if used[idx] or (need is not None and classes[idx] != need):
                continue
            b2 = dict(bal) if bal is not None else None
            ok, i2, n2, g, v = _step(compiled[idx], i, n, s, b2)
            used[idx] = True
            order.append(idx)
            if ok:
                rec(pos + 1, i2, n2, b2, miner + g, vol + v)
            else:
                rec(pos + 1, i, n, bal, miner, vol)
            order.pop()
            used[idx] = False

    rec(0, s.intertoken, s.native, dict(s.balances) if s.balances is not None else None, 0, 0)
    return best[0], best[1]


# ---------------------------------------------------------------- heuristic search


def _greedy(compiled, classes, slots, s: ScoreSnapshot, gas_rank: list[int]) -> list[int]:
    """Fill each slot with the highest-gas tx that executes now (or the cheapest if none does)."""
    n_tx = len(compiled)
    remaining = set(range(n_tx))
    by_class: dict[int, list[int]] = {}
    for idx in gas_rank:
        by_class.setdefault(classes[idx], []).append(idx)
    i, n = s.intertoken, s.native
    bal = dict(s.balances) if s.balances is not None else None
    order: list[int] = []

    def pick(cands: list[int]) -> int:
        nonlocal i, n, bal
        for idx in cands:
            b2 = dict(bal) if bal is not None else None
            ok, i2, n2, _, _ = _step(compiled[idx], i, n, s, b2)
            if ok:
                i, n, bal = i2, n2, b2
                return idx
        return cands[-1]

    for need in slots:
        cands = [x for x in by_class.get(need, []) if x in remaining]
        idx = pick(cands)
        remaining.discard(idx)
        order.append(idx)
    rest = [x for x in gas_rank if x in remaining]
    while rest:
        chosen = None
        for idx in rest:
            b2 = dict(bal) if bal is not None else None
            ok, i2, n2, _, _ = _step(compiled[idx], i, n, s, b2)
            if ok:
                i, n, bal = i2, n2, b2
                chosen = idx
                break
        if chosen is None:
            order.extend(rest)
            break
        rest.remove(chosen)
        order.append(chosen)
    return order


def _class_gas_order(classes, slots, gas_rank: list[int]) -> list[int]:
    """Prefix slots filled in plain gas order within each class; suffix by gas."""
    pools: dict[int, list[int]] = {}
    for idx in gas_rank:
        pools.setdefault(classes[idx], []).append(idx)
    pos = {c: 0 for c in pools}
    order = []
    for need in slots:
        order.append(pools[need][pos[need]])
        pos[need] += 1
    taken = set(order)
    order.extend(x for x in gas_rank if x not in taken)
    return order


def _random_order(classes, slots, rng: random.Random, n_tx: int) -> list[int]:
    pools: dict[int, list[int]] = {}
    for idx in range(n_tx):
        pools.setdefault(classes[idx], []).append(idx)
    for lst in pools.values():
        rng.shuffle(lst)
    pos = {c: 0 for c in pools}
    order = []
    for need in slots:
        order.append(pools[need][pos[need]])
        pos[need] += 1
    taken = set(order)
    rest = [x for x in range(n_tx) if x not in taken]
    rng.shuffle(rest)
    return order + rest


class _Evaluator:
    """Prefix checkpoints so a move only re-simulates from the first changed position."""

    def __init__(self, compiled, s: ScoreSnapshot):
        self.c = compiled
        self.s = s
        self.fast = s.balances is None

    def full(self, order: list[int]):
        s, c = self.s, self.c
        n_tx = len(order)
        ci = [0] * (n_tx + 1)
        cn = [0] * (n_tx + 1)
        cm = [0] * (n_tx + 1)
        cv = [0] * (n_tx + 1)
        i, n, m, v = s.intertoken, s.native, 0, 0
        bal = dict(s.balances) if s.balances is not None else None
        for k, idx in enumerate(order):
            ci[k], cn[k], cm[k], cv[k] = i, n, m, v
            ok, i, n, g, vv = _step(c[idx], i, n, s, bal)
            if ok:
                m += g
                v += vv
        ci[n_tx], cn[n_tx], cm[n_tx], cv[n_tx] = i, n, m, v
        return (ci, cn, cm, cv), (m, v)

    def from_pos(self, order: list[int], chk, start: int) -> tuple[int, int]:
        if not self.fast:
            return _simulate(self.c, order, self.s)
        ci, cn, cm, cv = chk
        i, n, m, v = ci[start], cn[start], cm[start], cv[start]
        s, c = self.s, self.c
        for k in range(start, len(order)):
            ok, i, n, g, vv = _step(c[order[k]], i, n, s, None)
            if ok:
                m += g
                v += vv
        return m, v


def _local_search(compiled, classes, P: int, order: list[int], s: ScoreSnapshot, budget: int, seed: int):
    ev = _Evaluator(compiled, s)
    chk, best = ev.full(order)
    n_tx = len(order)
    if n_tx < 2 or budget <= 0:
        return best, order
    rng = random.Random(seed)
    suffix = n_tx - P
    for _ in range(budget):
        kind = rng.random()
        cand = order[:]
        if kind < 0.35 and P >= 2:
            a = rng.randrange(P)
            same = [k for k in range(P) if k != a and classes[order[k]] == classes[order[a]]]
            if not same:
                continue
            b = rng.choice(same)
            cand[a], cand[b] = cand[b], cand[a]
            start = min(a, b)
        elif kind < 0.6 and P >= 1 and suffix >= 1:
            a = rng.randrange(P)
            same = [k for k in range(P, n_tx) if classes[order[k]] == classes[order[a]]]
            if not same:
                continue
            b = rng.choice(same)
            cand[a], cand[b] = cand[b], cand[a]
            start = a
        elif suffix >= 2:
            a = rng.randrange(P, n_tx)
            b = rng.randrange(P, n_tx)
            if a == b:
                continue
            if kind < 0.8:
                cand[a], cand[b] = cand[b], cand[a]
            else:
                cand.insert(b, cand.pop(a))
            start = min(a, b)
        else:
            continue
        sc = ev.from_pos(cand, chk, start)
        if sc > best:
            best, order = sc, cand
            chk, _ = ev.full(order)
    return best, order


def _run_restart(args):
    compiled, classes, slots, s, gas_rank, budget, seed, r = args
    P = len(slots)
    if r == 0:
        start = _greedy(compiled, classes, slots, s, gas_rank)
    elif r == 1:
        start = _class_gas_order(classes, slots, gas_rank)
    else:
        start = _random_order(classes, slots, random.Random(seed * 1_000_003 + r), len(compiled))
    score, order = _local_search(compiled, classes, P, start, s, budget, seed * 7919 + r)
    return score, order


def optimize_batch(
    mempool: Sequence[MainnetTx],
    params: PoeParams,
    pool_snapshot: PoolState | ScoreSnapshot,
    *,
    workers: int = 0,
) -> OptimizedBatch:
    """Order ``mempool`` to forge the targets while maximizing (gas, volume).

    Small instances are solved exactly; larger ones start from greedy, plain
    gas-order and seeded random orderings and hill-climb with feasibility
    preserving moves.  The result does not depend on ``workers``.
    """
    txs = dedupe_mempool(list(mempool))
    s = _as_snapshot(pool_snapshot)
    slots = slot_classes(params)
    if len(txs) < len(slots):
        raise ValueError(f"mempool has {len(txs)} txs, forging prefix needs {len(slots)}")
    classes = [tx_class(t.tx_hash, params) for t in txs]
    _check_feasible(classes, slots, params)
    compiled = [_compile(t) for t in txs]
    if count_feasible(txs, params) <= params.exact_limit:
        score, order = _dfs_exact(compiled, classes, slots, s)
        batch = _make_batch(txs, order, score, params, "exact")
    else:
        gas_rank = sorted(range(len(txs)), key=lambda k: (-compiled[k][5], k))
        runs = max(1, params.restarts + 2)
        jobs = [(compiled, classes, slots, s, gas_rank, params.move_budget, params.seed, r) for r in range(runs)]
        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_run_restart, jobs))
        else:
            results = [_run_restart(j) for j in jobs]
        score, order = max(results, key=lambda so: (so[0], [-x for x in so[1]]))
        batch = _make_batch(txs, order, score, params, "heuristic")
    return batch


def random_feasible_ordering(mempool: Sequence[MainnetTx], params: PoeParams, rng: random.Random) -> list[MainnetTx]:
    """Uniformly random ordering among those satisfying the prefix constraint."""
    txs = list(mempool)
    slots = slot_classes(params)
    classes = [tx_class(t.tx_hash, params) for t in txs]
    _check_feasible(classes, slots, params)
    return [txs[i] for i in _random_order(classes, slots, rng, len(txs))]


def random_baseline(
    mempool: Sequence[MainnetTx],
    params: PoeParams,
    snapshot: PoolState | ScoreSnapshot,
    count: int,
    rng: random.Random,
) -> tuple[Amount, Amount]:
    """Best (miner, volume) over ``count`` uniformly random feasible orderings."""
    txs = list(mempool)
    slots = slot_classes(params)
    classes = [tx_class(t.tx_hash, params) for t in txs]
    _check_feasible(classes, slots, params)
    compiled = [_compile(t) for t in txs]
    s = _as_snapshot(snapshot)
    best = (-1, -1)
    for _ in range(count):
        best = max(best, _simulate(compiled, _random_order(classes, slots, rng, len(txs)), s))
    return Amount(best[0]), Amount(best[1])


def brute_force_optimize(
    mempool: Sequence[MainnetTx], params: PoeParams, pool_snapshot: PoolState | ScoreSnapshot
) -> OptimizedBatch:
    """Try every permutation; reference answer for small mempools."""
    txs = dedupe_mempool(list(mempool))
    if len(txs) > 10:
        raise ValueError("brute force is capped at 10 transactions")
    s = _as_snapshot(pool_snapshot)
    slots = slot_classes(params)
    if len(txs) < len(slots):
        raise ValueError(f"mempool has {len(txs)} txs, forging prefix needs {len(slots)}")
    classes = [tx_class(t.tx_hash, params) for t in txs]
    _check_feasible(classes, slots, params)
    compiled = [_compile(t) for t in txs]
    best, best_perm = None, None
    for perm in itertools.permutations(range(len(txs))):
        if any(classes[perm[k]] != slots[k] for k in range(len(slots))):
            continue
        sc = _simulate(compiled, perm, s)
        if best is None or sc > best:
            best, best_perm = sc, perm
    return _make_batch(txs, best_perm, best, params, "brute-force")  # type: ignore[arg-type]


# ---------------------------------------------------------------- counting


@dataclass(frozen=True)
class EntropyParams:
    n: int
    locked_digits: int
    hash_bits: int

    @property
    def k(self) -> int:
        return 1 << self.locked_digits

    def __post_init__(self):
        if self.n < 0 or self.locked_digits < 0 or self.hash_bits < 0:
            raise ParameterError("parameters must be non-negative")
        k = 1 << self.locked_digits
        if self.n % k:
            raise ParameterError(f"k = {k} must divide n = {self.n}")
        if self.hash_bits > self.n:
            raise ParameterError("hash_bits cannot exceed n")
        if self.hash_bits % k:
            raise ParameterError(f"k = {k} must divide hash_bits = {self.hash_bits}")


def count_orderings(p: EntropyParams) -> int:
    """Orderings of a balanced batch (n/k per class) matching a balanced ``hash_bits`` prefix."""
    k, n, h = p.k, p.n, p.hash_bits
    per_class = math.factorial(n // k) // math.factorial((n - h) // k)
    return per_class**k * math.factorial(n - h)


def entropy(p: EntropyParams) -> float:
    """log2 of :func:`count_orderings`, via log-gamma."""
    k, n, h = p.k, p.n, p.hash_bits
    nat = k * (math.lgamma(n / k + 1) - math.lgamma((n - h) / k + 1)) + math.lgamma(n - h + 1)
    return nat / math.log(2)
