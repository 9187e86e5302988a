from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from interpool.amm import (
    InsufficientLiquidity,
    PoolState,
    UndefinedRatio,
    execute_swap,
    pool_ratio,
    position_at_ratio,
    quote_swap,
    swap_mantissas,
)
from interpool.buffer import LiquidityBuffer
from interpool.chainsim.transactions import BUY, SELL, Exchange, MainnetTx
from interpool.core import Amount, Wallets


def pool(i, n, fee="0", method="intertoken"):
    return PoolState(Amount.of(i), Amount.of(n), fee_rate=Fraction(fee), fee_method=method)


def tx(direction, vol, lo, hi, sender="u", nonce=0):
    return MainnetTx(sender, nonce, Amount(0), Amount.of(1), Exchange(direction, Amount.of(vol), Amount.of(lo), Amount.of(hi)))


@pytest.mark.parametrize("i,n,r", [(2, 5, Fraction(5, 2)), (1, 10, 10), (7, 7, 1)])
def test_pool_ratio(i, n, r):
    assert pool_ratio(pool(i, n)) == r


def test_ratio_undefined_on_empty_side():
    with pytest.raises(UndefinedRatio):
        pool_ratio(pool(0, 5))


def test_buying_one_intertoken_costs_five():
    p = pool(2, 5)
    q = quote_swap(p, BUY, Amount.of(5))
    assert q.volume_out == Amount.of(1)
    assert (q.new_intertoken, q.new_native) == (Amount.of(1), Amount.of(10))
    assert q.fee == 0


def test_inbound_fee_is_grossed_up():
    # 1% on a 100-intertoken sell: user pays 101.01..., 1.01... stays outside the curve
    p = pool(10_000, 10_000, fee="0.01", method="intertoken")
    q = quote_swap(p, SELL, Amount.of(100))
    assert q.gross_in.display() == "101.01"
    assert q.fee.display() == "1.01"
    assert q.gross_in - q.fee == Amount.of(100)
    assert q.new_intertoken == Amount.of(10_100)


def test_outbound_fee_taken_from_output():
    p = pool(100, 250, fee="0.01", method="intertoken")
    q = quote_swap(p, BUY, Amount.of(25))
    curve_out = Amount.of(100) - q.new_intertoken
    assert q.fee == Amount(curve_out.mantissa // 100)
    assert q.volume_out == curve_out - q.fee


def test_quote_preconditions():
    with pytest.raises(ValueError):
        quote_swap(pool(2, 5), BUY, Amount(0))
    with pytest.raises(InsufficientLiquidity):
        quote_swap(PoolState(Amount(1), Amount(1)), BUY, Amount(1))


@pytest.mark.parametrize("lo,hi,ok", [(2, 3, True), (3, 4, False), ("2.5", "2.5", True)])
def test_execute_respects_ratio_bounds(lo, hi, ok):
    p = pool(200, 500)
    res = execute_swap(p, tx(BUY, 1, lo, hi))
    assert res.executed is ok
    if not ok:
        assert res.reason == "ratio-out-of-range"
        assert (p.intertoken_inventory, p.native_inventory) == (Amount.of(200), Amount.of(500))


def test_order_decides_which_txs_run():
    # a big sell drops the ratio into the buy's window; the other way round only the sell runs
    sell = tx(SELL, 50, 0, 100, "s")
    buy = tx(BUY, 10, 1, "2", "b")
    p1 = pool(100, 250)
    assert execute_swap(p1, sell).executed and execute_swap(p1, buy).executed
    p2 = pool(100, 250)
    assert not execute_swap(p2, buy).executed and execute_swap(p2, sell).executed


def test_wallet_legs_and_fee_sink():
    p = pool(100, 250, fee="0.003", method="native")
    w = Wallets()
    w.credit("u", Amount.of(100))
    buf = LiquidityBuffer(wallets=w)
    res = execute_swap(p, tx(BUY, 10, 1, 5), buf, w)
    q = res.quote
    assert res.executed and q.fee_coin == "native"
    assert w.balance("u") == Amount.of(100) - q.gross_in
    assert w.balance("u", "intertoken") == q.volume_out
    assert buf.native_stack == q.fee
    poor = tx(BUY, 1000, 1, 5, "poor")
    assert execute_swap(p, poor, buf, w).reason == "insufficient-balance"


@given(
    st.integers(10**9, 10**18),
    st.integers(10**9, 10**18),
    st.booleans(),
    st.integers(1, 10**17),
    st.sampled_from([(0, 1), (3, 1000), (1, 100), (3, 100)]),
    st.booleans(),
)
def test_constant_product_within_one_ulp(i, n, buy, vol, fee, on_i):
    res = swap_mantissas(i, n, buy, vol, fee[0], fee[1], on_i)
    assume(res is not None)
    out, f, gross, ni, nn = res
    before, after = i * n, ni * nn
    new_in = nn if buy else ni
    # product never shrinks, and grows by less than one unit of the inbound side
    assert 0 <= after - before < new_in
    assert out >= 0 and f >= 0
    if f and on_i != buy:
        assert gross - f == vol  # inbound fee sits on top of the curve volume
    else:
        assert gross == vol
        curve_out = (i - ni) if buy else (n - nn)
        assert out + f == curve_out


@pytest.mark.parametrize(
    "ratio,cells",
    [(Fraction(5, 2), ("2.00", "5.00")), (5, ("1.41", "7.07")), (10, ("1.00", "10.00"))],
)
def test_position_at_ratio_examples(ratio, cells):
    i, n = position_at_ratio(Amount.of(10), ratio)
    assert (i.display(), n.display()) == cells


@given(st.integers(1, 10**6), st.fractions(min_value=Fraction(1, 100), max_value=100))
def test_position_product_and_ratio(coins, r):
    c = Amount.of(coins)
    i, n = position_at_ratio(c, r)
    assert abs(Fraction(i.mantissa * n.mantissa, 10**24) - coins) < Fraction(i.mantissa + n.mantissa + 1, 10**12)
