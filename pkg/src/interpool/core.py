"""Shared value types: fixed-point amounts, 256-bit hashes, keys and signatures,
canonical serialization, wallets and the event log."""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Any, Iterable, Iterator, Protocol

SCALE = 10**12
DECIMALS = 12
_I128_MAX = 2**127 - 1
_I128_MIN = -(2**127)


class InterpoolError(Exception):
    """Base class for all library errors."""


class AmountOverflow(InterpoolError, OverflowError):
    pass


class InsufficientFunds(InterpoolError):
    pass


def _check(m: int) -> int:
    if m > _I128_MAX or m < _I128_MIN:
        raise AmountOverflow(f"mantissa {m} outside signed 128-bit range")
    return m


def _div_trunc(a: int, b: int) -> int:
    """Integer division rounding toward zero."""
    if b == 0:
        raise ZeroDivisionError("amount division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


class Amount:
    """Signed fixed-point quantity with 12 fractional decimal digits.

    The unit (native coin, intertoken, gas) is a naming convention only; see the
    ``Native``/``Intertoken``/``Gas`` aliases.  Addition and subtraction are exact,
    multiplication and division truncate toward zero, and any result outside the
    signed 128-bit mantissa range raises :class:`AmountOverflow`.
    """

    __slots__ = ("_m",)

    def __init__(self, mantissa: int = 0):
        if not isinstance(mantissa, int):
            raise TypeError("Amount takes an integer mantissa; use Amount.of() for values")
        object.__setattr__(self, "_m", _check(mantissa))

    def __setattr__(self, name, value):
        raise AttributeError("Amount is immutable")

    @property
    def mantissa(self) -> int:
        return self._m

    @classmethod
    def of(cls, value: int | str | Decimal | Fraction | Amount) -> Amount:
        """Build from a value; strings and decimals must fit 12 fractional digits."""
        if isinstance(value, Amount):
            return value
        if isinstance(value, bool):
            raise TypeError("bool is not an amount")
        if isinstance(value, int):
            return cls(value * SCALE)
        if isinstance(value, Fraction):
            return cls(_div_trunc(value.numerator * SCALE, value.denominator))
        if isinstance(value, float):
            raise TypeError("floats are not accepted; pass a decimal string")
        d = Decimal(value)
        scaled = d.scaleb(DECIMALS)
        if scaled != scaled.to_integral_value():
            raise ValueError(f"{value!r} has more than {DECIMALS} fractional digits")
        return cls(int(scaled))

    @classmethod
    def ulp(cls) -> Amount:
        return cls(1)

    def to_decimal(self) -> Decimal:
        with localcontext() as ctx:
            ctx.prec = 60
            return Decimal(self._m).scaleb(-DECIMALS)

    def to_fraction(self) -> Fraction:
        return Fraction(self._m, SCALE)

    def display(self, places: int = 2) -> str:
        """Round half-even for reports."""
        q = Decimal(1).scaleb(-places)
        with localcontext() as ctx:
            ctx.prec = 60
            return str(self.to_decimal().quantize(q, rounding=ROUND_HALF_EVEN))

    def __str__(self) -> str:
        d = self.to_decimal().quantize(Decimal(1).scaleb(-DECIMALS), rounding=ROUND_DOWN)
        s = format(d, "f")
        if "." in s:
            s = s.rstrip("0").rstrip(".")
        return s

    def __repr__(self) -> str:
        return f"Amount('{self}')"

    # arithmetic
    def __add__(self, other: Amount) -> Amount:
        if not isinstance(other, Amount):
            return NotImplemented
        return Amount(self._m + other._m)

    def __sub__(self, other: Amount) -> Amount:
        if not isinstance(other, Amount):
            return NotImplemented
        return Amount(self._m - other._m)

    def __neg__(self) -> Amount:
        return Amount(-self._m)

    def __abs__(self) -> Amount:
        return Amount(abs(self._m))

    def __mul__(self, other: Amount | int | Fraction) -> Amount:
        if isinstance(other, Amount):
            return Amount(_div_trunc(self._m * other._m, SCALE))
        if isinstance(other, bool):
            return NotImplemented
        if isinstance(other, int):
            return Amount(self._m * other)
        if isinstance(other, Fraction):
            return Amount(_div_trunc(self._m * other.numerator, other.denominator))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: Amount | int | Fraction) -> Amount:
        if isinstance(other, Amount):
            return Amount(_div_trunc(self._m * SCALE, other._m))
        if isinstance(other, bool):
            return NotImplemented
        if isinstance(other, int):
            return Amount(_div_trunc(self._m, other))
        if isinstance(other, Fraction):
            return Amount(_div_trunc(self._m * other.denominator, other.numerator))
        return NotImplemented

    # comparisons
    def _cmp_key(self, other):
        if isinstance(other, Amount):
            return other._m
        if isinstance(other, int) and not isinstance(other, bool):
            return other * SCALE
        return None

    def __eq__(self, other) -> bool:
        k = self._cmp_key(other)
        return NotImplemented if k is None else self._m == k

    def __lt__(self, other) -> bool:
        k = self._cmp_key(other)
        return NotImplemented if k is None else self._m < k

    def __le__(self, other) -> bool:
        k = self._cmp_key(other)
        return NotImplemented if k is None else self._m <= k

    def __gt__(self, other) -> bool:
        k = self._cmp_key(other)
        return NotImplemented if k is None else self._m > k

    def __ge__(self, other) -> bool:
        k = self._cmp_key(other)
        return NotImplemented if k is None else self._m >= k

    def __hash__(self) -> int:
        return hash(("Amount", self._m))

    def __bool__(self) -> bool:
        return self._m != 0

    def __reduce__(self):
        return (Amount, (self._m,))


# Unit aliases; purely documentary.
Native = Amount
Intertoken = Amount
Gas = Amount

ZERO = Amount(0)


def amount_sqrt(a: Amount) -> Amount:
    """Largest representable r with r*r <= a."""
    if a.mantissa < 0:
        raise ValueError("square root of a negative amount")
    return Amount(math.isqrt(a.mantissa * SCALE))


def fraction_sqrt(x: Fraction) -> Amount:
    """Floor-to-scale square root of an exact non-negative rational."""
    if x < 0:
        raise ValueError("square root of a negative value")
    return Amount(math.isqrt(x.numerator * SCALE * SCALE // x.denominator))


def min_amount(a: Amount, b: Amount) -> Amount:
    return a if a <= b else b


def max_amount(a: Amount, b: Amount) -> Amount:
    return a if a >= b else b


# ---------------------------------------------------------------- hashes


@dataclass(frozen=True, order=True)
class Hash256:
    """32 bytes; bit ``b`` is bit ``7 - b % 8`` of byte ``b // 8`` (MSB first)."""

    data: bytes

    def __post_init__(self):
        if not isinstance(self.data, (bytes, bytearray)) or len(self.data) != 32:
            raise ValueError("Hash256 requires exactly 32 bytes")
        object.__setattr__(self, "data", bytes(self.data))

    @classmethod
    def from_hex(cls, text: str) -> Hash256:
        text = text.lower()
        if text.startswith("0x"):
            text = text[2:]
        return cls(bytes.fromhex(text))

    @classmethod
    def zero(cls) -> Hash256:
        return cls(bytes(32))

    @classmethod
    def from_bits(cls, bits: str | Iterable[int]) -> Hash256:
        """Inverse of :meth:`bits`; accepts a '0'/'1' string or an int sequence."""
        seq = [int(b) for b in bits]
        if len(seq) != 256 or any(b not in (0, 1) for b in seq):
            raise ValueError("need exactly 256 bits")
        return cls(int("".join(map(str, seq)), 2).to_bytes(32, "big"))

    def hex(self) -> str:
        return self.data.hex()

    def bit(self, index: int) -> int:
        if not 0 <= index < 256:
            raise IndexError("bit index out of range")
        return (self.data[index >> 3] >> (7 - (index & 7))) & 1

    def bits(self, start: int = 0, count: int = 256) -> str:
        return "".join(str(self.bit(i)) for i in range(start, start + count))

    def as_int(self) -> int:
        return int.from_bytes(self.data, "big")

    def __str__(self) -> str:
        return self.hex()

    def __repr__(self) -> str:
        return f"Hash256({self.hex()[:16]}…)"


def first_bit(h: Hash256) -> int:
    return h.bit(0)


def last_bit(h: Hash256) -> int:
    return h.bit(255)


def hash256(data: bytes) -> Hash256:
    return Hash256(hashlib.sha256(data).digest())


# ---------------------------------------------------------------- keys


@dataclass(frozen=True)
class KeyPair:
    pubkey: Hash256
    secret: bytes

    @classmethod
    def from_secret(cls, secret: bytes) -> KeyPair:
        if len(secret) != 32:
            raise ValueError("secret must be 32 bytes")
        return cls(hash256(secret), bytes(secret))

    @classmethod
    def derive(cls, *parts: object) -> KeyPair:
        """Deterministic key for simulations, seeded from arbitrary labels."""
        label = "/".join(str(p) for p in parts).encode()
        return cls.from_secret(hashlib.sha256(b"interpool-key:" + label).digest())


def sign(secret: bytes, message: bytes) -> Hash256:
    return hash256(secret + message)


class SignatureScheme(Protocol):
    def sign(self, secret: bytes, message: bytes) -> Hash256: ...

    def verify(self, pubkey: Hash256, message: bytes, sig: Hash256) -> bool: ...


class KeyRegistry:
    """Keyed-hash signature scheme backed by a pubkey -> secret registry.

    Stands in for real public-key cryptography: verification looks up the
    secret registered for ``pubkey``.  Unknown keys simply fail to verify.
    """

    def __init__(self, keys: Iterable[KeyPair] = ()):
        self._secrets: dict[Hash256, bytes] = {}
        for kp in keys:
            self.register(kp)

    def register(self, kp: KeyPair) -> KeyPair:
        if hash256(kp.secret) != kp.pubkey:
            raise ValueError("pubkey does not match secret")
        self._secrets[kp.pubkey] = kp.secret
        return kp

    def new_key(self, *label: object) -> KeyPair:
        return self.register(KeyPair.derive(*label))

    def __contains__(self, pubkey: Hash256) -> bool:
        return pubkey in self._secrets

    def sign(self, secret: bytes, message: bytes) -> Hash256:
        return sign(secret, message)

    def verify(self, pubkey: Hash256, message: bytes, sig: Hash256) -> bool:
        secret = self._secrets.get(pubkey)
        if secret is None:
            return False
        return sign(secret, message) == sig


def verify(pubkey: Hash256, message: bytes, sig: Hash256, registry: KeyRegistry) -> bool:
    return registry.verify(pubkey, message, sig)


# ---------------------------------------------------------------- serialization


class Encoder:
    """Canonical byte encoding: big-endian integers, length-prefixed bytes."""

    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, v: int) -> Encoder:
        self._parts.append(struct.pack(">B", v))
        return self

    def u64(self, v: int) -> Encoder:
        self._parts.append(struct.pack(">Q", v))
        return self

    def i128(self, v: int) -> Encoder:
        self._parts.append(_check(v).to_bytes(16, "big", signed=True))
        return self

    def amount(self, a: Amount) -> Encoder:
        return self.i128(a.mantissa)

    def hash(self, h: Hash256) -> Encoder:
        self._parts.append(h.data)
        return self

    def blob(self, b: bytes) -> Encoder:
        self._parts.append(struct.pack(">I", len(b)) + b)
        return self

    def text(self, s: str) -> Encoder:
        return self.blob(s.encode("utf-8"))

    def bytes(self) -> bytes:
        return b"".join(self._parts)


class Decoder:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise ValueError("truncated encoding")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def i128(self) -> int:
        return int.from_bytes(self._take(16), "big", signed=True)

    def amount(self) -> Amount:
        return Amount(self.i128())

    def hash(self) -> Hash256:
        return Hash256(self._take(32))

    def blob(self) -> bytes:
        (n,) = struct.unpack(">I", self._take(4))
        return self._take(n)

    def text(self) -> str:
        return self.blob().decode("utf-8")

    def done(self) -> None:
        if self._pos != len(self._data):
            raise ValueError("trailing bytes after encoding")


# ---------------------------------------------------------------- wallets and events


class Wallets:
    """Per-account balances of native coin and intertoken."""

    def __init__(self):
        self.native: dict[str, Amount] = {}
        self.intertoken: dict[str, Amount] = {}

    def _book(self, coin: str) -> dict[str, Amount]:
        if coin == "native":
            return self.native
        if coin == "intertoken":
            return self.intertoken
        raise ValueError(f"unknown coin {coin!r}")

    def balance(self, account: str, coin: str = "native") -> Amount:
        return self._book(coin).get(account, ZERO)

    def credit(self, account: str, amount: Amount, coin: str = "native") -> None:
        if amount < 0:
            raise ValueError("negative credit")
        book = self._book(coin)
        book[account] = book.get(account, ZERO) + amount

    def debit(self, account: str, amount: Amount, coin: str = "native") -> None:
        if amount < 0:
            raise ValueError("negative debit")
        book = self._book(coin)
        have = book.get(account, ZERO)
        if have < amount:
            raise InsufficientFunds(f"{account} holds {have} {coin}, needs {amount}")
        book[account] = have - amount

    def transfer(self, src: str, dst: str, amount: Amount, coin: str = "native") -> None:
        self.debit(src, amount, coin)
        self.credit(dst, amount, coin)

    def total(self, coin: str = "native") -> Amount:
        return Amount(sum(a.mantissa for a in self._book(coin).values()))

    def copy(self) -> Wallets:
        w = Wallets()
        w.native = dict(self.native)
        w.intertoken = dict(self.intertoken)
        return w

    def to_json(self) -> dict:
        return {
            "native": {k: v.mantissa for k, v in sorted(self.native.items())},
            "intertoken": {k: v.mantissa for k, v in sorted(self.intertoken.items())},
        }


@dataclass(frozen=True)
class Event:
    height: int
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"height": self.height, "kind": self.kind, **to_jsonable(self.payload)}


class EventLog:
    def __init__(self):
        self.events: list[Event] = []

    def emit(self, height: int, kind: str, **payload: Any) -> Event:
        ev = Event(height, kind, payload)
        self.events.append(ev)
        return ev

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def since(self, index: int) -> list[Event]:
        return self.events[index:]

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)


def to_jsonable(obj: Any) -> Any:
    """Amounts become scaled integers, hashes lowercase hex, fractions "p/q"."""
    if isinstance(obj, Amount):
        return obj.mantissa
    if isinstance(obj, Hash256):
        return obj.hex()
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, bytes):
        return obj.hex()
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
