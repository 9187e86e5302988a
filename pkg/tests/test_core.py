import math
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from interpool.core import (
    Amount,
    AmountOverflow,
    Decoder,
    Encoder,
    Hash256,
    InsufficientFunds,
    KeyPair,
    KeyRegistry,
    Wallets,
    amount_sqrt,
    canonical_json,
    first_bit,
    hash256,
    last_bit,
    sign,
)

I128 = 2**127
mantissas = st.integers(min_value=-(10**24), max_value=10**24)


def test_empty_digest_and_first_bit():
    h = hash256(b"")
    assert h.hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert first_bit(h) == 1
    # 0x55 = 0101_0101, bit 255 is the least significant bit of the last byte
    assert last_bit(h) == 1
    assert h.bits(0, 8) == "11100011"


def test_bit_indexing_is_msb_first():
    h = Hash256(bytes([0b10000000] + [0] * 30 + [0b00000001]))
    assert h.bit(0) == 1 and h.bit(1) == 0
    assert h.bit(255) == 1 and h.bit(254) == 0
    assert Hash256.from_bits(h.bits()) == h


@given(st.binary(max_size=64), st.binary(max_size=64))
def test_hash_equality_tracks_input_equality(x, y):
    assert (hash256(x) == hash256(y)) == (x == y)


def test_amount_parsing_and_display():
    assert Amount.of("1.5").mantissa == 1_500_000_000_000
    assert Amount.of(2).mantissa == 2 * 10**12
    assert Amount.of(Decimal("0.000000000001")) == Amount.ulp()
    assert Amount.of(Fraction(1, 3)).mantissa == 333_333_333_333
    assert Amount.of("7.0710678").display() == "7.07"
    assert str(Amount.of("-5")) == "-5"


def test_amount_rejects_sub_ulp_strings():
    with pytest.raises(ValueError):
        Amount.of("0.0000000000001")


def test_amount_overflow_is_an_error():
    big = Amount(I128 - 1)
    with pytest.raises(AmountOverflow):
        big + Amount(1)
    with pytest.raises(AmountOverflow):
        Amount(I128)
    assert (Amount(-I128) + Amount(1)).mantissa == -I128 + 1


@given(mantissas, mantissas)
def test_add_sub_exact(a, b):
    assert (Amount(a) + Amount(b)).mantissa == a + b
    assert (Amount(a) - Amount(b)).mantissa == a - b


@given(mantissas, st.integers(min_value=1, max_value=10**24))
def test_mul_div_truncate_toward_zero(a, b):
    prod = Amount(a) * Amount(b)
    exact = Fraction(a * b, 10**12)
    assert abs(Fraction(prod.mantissa) - exact) < 1
    assert abs(prod.mantissa) <= abs(exact)
    q = Amount(a) / Amount(b)
    exact_q = Fraction(a * 10**12, b)
    assert abs(Fraction(q.mantissa) - exact_q) < 1
    assert abs(q.mantissa) <= abs(exact_q)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        Amount.of(1) / Amount(0)


@pytest.mark.parametrize(
    "value,expected",
    [("10", "3.162277660168"), ("0", "0"), ("1", "1"), ("2", "1.414213562373"), ("100", "10")],
)
def test_sqrt_examples(value, expected):
    assert amount_sqrt(Amount.of(value)) == Amount.of(expected)


@given(st.integers(min_value=0, max_value=10**30))
def test_sqrt_is_floor_at_scale(m):
    r = amount_sqrt(Amount(m)).mantissa
    # largest r with r^2 <= m * 10^12  (both sides at scale 10^24)
    assert r * r <= m * 10**12 < (r + 1) * (r + 1)
    assert r == math.isqrt(m * 10**12)


def test_sqrt_rejects_negative():
    with pytest.raises(ValueError):
        amount_sqrt(Amount(-1))


def test_signatures(registry):
    kp = registry.new_key("alice")
    assert kp.pubkey == hash256(kp.secret)
    msg = b"pay 5"
    sig = sign(kp.secret, msg)
    assert registry.verify(kp.pubkey, msg, sig)
    assert not registry.verify(kp.pubkey, b"pay 6", sig)
    other = registry.new_key("bob")
    assert not registry.verify(other.pubkey, msg, sig)
    # unknown key: plain False, no exception
    assert not KeyRegistry().verify(kp.pubkey, msg, sig)


def test_register_checks_pubkey():
    kp = KeyPair.derive("x")
    with pytest.raises(ValueError):
        KeyRegistry([KeyPair(hash256(b"other"), kp.secret)])


@given(st.integers(0, 2**64 - 1), st.integers(-(2**127), 2**127 - 1), st.text(max_size=20), st.binary(max_size=40))
def test_encoder_roundtrip(u, i, s, blob):
    h = hash256(blob)
    data = Encoder().u64(u).i128(i).text(s).blob(blob).hash(h).amount(Amount(i)).bytes()
    d = Decoder(data)
    assert (d.u64(), d.i128(), d.text(), d.blob(), d.hash(), d.amount()) == (u, i, s, blob, h, Amount(i))
    d.done()


def test_decoder_rejects_trailing_bytes():
    d = Decoder(Encoder().u64(1).bytes() + b"\x00")
    d.u64()
    with pytest.raises(ValueError):
        d.done()


def test_wallets_never_go_negative():
    w = Wallets()
    w.credit("a", Amount.of(3))
    with pytest.raises(InsufficientFunds):
        w.debit("a", Amount.of(4))
    w.transfer("a", "b", Amount.of(1))
    assert w.balance("a") == Amount.of(2) and w.balance("b") == Amount.of(1)
    assert w.total() == Amount.of(3)


def test_canonical_json_is_stable():
    a = canonical_json({"b": Amount.of(1), "a": [hash256(b""), Fraction(5, 2)]})
    b = canonical_json({"a": [hash256(b""), Fraction(5, 2)], "b": Amount.of(1)})
    assert a == b
    assert "e3b0c442" in a and " " not in a
