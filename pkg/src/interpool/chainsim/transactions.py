"""Transaction types for the alien chain and the mainnet, with canonical encodings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Union

from ..core import (
    Amount,
    Decoder,
    Encoder,
    Hash256,
    KeyPair,
    KeyRegistry,
    hash256,
    sign,
)

BUY = "buy-intertoken"
SELL = "sell-intertoken"
Direction = Literal["buy-intertoken", "sell-intertoken"]


@dataclass(frozen=True)
class AlienTx:
    from_pubkey: Hash256
    to_pubkey: Hash256
    amount: Amount
    nonce: int
    signature: Hash256 = Hash256(bytes(32))

    def signing_payload(self) -> bytes:
        return (
            Encoder()
            .hash(self.from_pubkey)
            .hash(self.to_pubkey)
            .amount(self.amount)
            .u64(self.nonce)
            .bytes()
        )

    def serialize(self) -> bytes:
        return self.signing_payload() + self.signature.data

    @classmethod
    def deserialize(cls, data: bytes) -> AlienTx:
        d = Decoder(data)
        tx = cls(d.hash(), d.hash(), d.amount(), d.u64(), d.hash())
        d.done()
        return tx

    @property
    def tx_hash(self) -> Hash256:
        return hash256(self.serialize())

    @classmethod
    def signed(cls, sender: KeyPair, to: Hash256, amount: Amount, nonce: int) -> AlienTx:
        unsigned = cls(sender.pubkey, to, amount, nonce)
        return cls(sender.pubkey, to, amount, nonce, sign(sender.secret, unsigned.signing_payload()))

    def verify_signature(self, registry: KeyRegistry) -> bool:
        return registry.verify(self.from_pubkey, self.signing_payload(), self.signature)


@dataclass(frozen=True)
class Exchange:
    direction: Direction
    volume_in: Amount
    ratio_min: Amount
    ratio_max: Amount

    def __post_init__(self):
        if self.direction not in (BUY, SELL):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.volume_in <= 0:
            raise ValueError("volume_in must be positive")
        if self.ratio_min > self.ratio_max:
            raise ValueError("ratio_min exceeds ratio_max")


@dataclass(frozen=True)
class ProvideLiquidity:
    deposit: Amount
    alien_pubkey: Hash256 = Hash256(bytes(32))
    provider_class: Literal["full", "regular"] = "regular"

    def __post_init__(self):
        if self.deposit <= 0:
            raise ValueError("deposit must be positive")
        if self.provider_class not in ("full", "regular"):
            raise ValueError(f"unknown provider class {self.provider_class!r}")


TxKind = Union[Exchange, ProvideLiquidity]

_KIND_EXCHANGE = 1
_KIND_PROVIDE = 2
_DIRS = {BUY: 0, SELL: 1}
_CLASSES = {"regular": 0, "full": 1}


@dataclass(frozen=True)
class MainnetTx:
    sender: str
    nonce: int
    gas_price: Amount
    gas_limit: Amount
    kind: TxKind
    tx_hash: Hash256 = field(init=False, compare=False)

    def __post_init__(self):
        if self.gas_limit <= 0:
            raise ValueError("gas_limit must be positive")
        if self.gas_price < 0:
            raise ValueError("gas_price must be non-negative")
        object.__setattr__(self, "tx_hash", hash256(self.serialize()))

    def serialize(self) -> bytes:
        enc = Encoder().text(self.sender).u64(self.nonce).amount(self.gas_price).amount(self.gas_limit)
        k = self.kind
        if isinstance(k, Exchange):
            enc.u8(_KIND_EXCHANGE).u8(_DIRS[k.direction]).amount(k.volume_in)
            enc.amount(k.ratio_min).amount(k.ratio_max)
        else:
            enc.u8(_KIND_PROVIDE).amount(k.deposit).hash(k.alien_pubkey).u8(_CLASSES[k.provider_class])
        return enc.bytes()

    @classmethod
    def deserialize(cls, data: bytes) -> MainnetTx:
        d = Decoder(data)
        sender, nonce, price, limit = d.text(), d.u64(), d.amount(), d.amount()
        tag = d.u8()
        if tag == _KIND_EXCHANGE:
            direction = BUY if d.u8() == 0 else SELL
            kind: TxKind = Exchange(direction, d.amount(), d.amount(), d.amount())
        elif tag == _KIND_PROVIDE:
            dep, pk, cl = d.amount(), d.hash(), d.u8()
            kind = ProvideLiquidity(dep, pk, "full" if cl else "regular")
        else:
            raise ValueError(f"unknown tx kind tag {tag}")
        d.done()
        return cls(sender, nonce, price, limit, kind)

    @property
    def gas_fee(self) -> Amount:
        return self.gas_limit * self.gas_price

    def to_json(self) -> dict:
        out = {
            "sender": self.sender,
            "nonce": self.nonce,
            "gas_price": str(self.gas_price),
            "gas_limit": str(self.gas_limit),
            "tx_hash": self.tx_hash.hex(),
        }
        k = self.kind
        if isinstance(k, Exchange):
            out["kind"] = {
                "type": "exchange",
                "direction": k.direction,
                "volume_in": str(k.volume_in),
                "ratio_min": str(k.ratio_min),
                "ratio_max": str(k.ratio_max),
            }
        else:
            out["kind"] = {
                "type": "provide-liquidity",
                "deposit": str(k.deposit),
                "alien_pubkey": k.alien_pubkey.hex(),
                "provider_class": k.provider_class,
            }
        return out

    @classmethod
    def from_json(cls, obj: dict) -> MainnetTx:
        k = obj["kind"]
        if k["type"] == "exchange":
            kind: TxKind = Exchange(
                k["direction"], Amount.of(k["volume_in"]), Amount.of(k["ratio_min"]), Amount.of(k["ratio_max"])
            )
        else:
            kind = ProvideLiquidity(
                Amount.of(k["deposit"]),
                Hash256.from_hex(k.get("alien_pubkey", "00" * 32)),
                k.get("provider_class", "regular"),
            )
        tx = cls(obj["sender"], int(obj["nonce"]), Amount.of(obj["gas_price"]), Amount.of(obj["gas_limit"]), kind)
        if "tx_hash" in obj and obj["tx_hash"] != tx.tx_hash.hex():
            raise ValueError(f"tx_hash mismatch for {obj['sender']}/{obj['nonce']}")
        return tx


def dedupe_mempool(txs: list[MainnetTx]) -> list[MainnetTx]:
    """Keep one tx per (sender, nonce): highest gas price, then lowest hash.

    Survivors keep their original relative order.
    """
    best: dict[tuple[str, int], MainnetTx] = {}
    for tx in txs:
        key = (tx.sender, tx.nonce)
        cur = best.get(key)
        if cur is None or (tx.gas_price, -tx.tx_hash.as_int()) > (cur.gas_price, -cur.tx_hash.as_int()):
            best[key] = tx
    keep = {id(t) for t in best.values()}
    return [t for t in txs if id(t) in keep]
