"""Wrapped alien-coin pool simulator: fixed-point ledger, two-chain model,
bit-constrained block ordering, constant-product pool, provider risk,
burn claims, swap verification and a scenario runner."""

from .core import SCALE, ZERO, Amount, Hash256, KeyPair, KeyRegistry, Wallets, hash256

__version__ = "0.1.0"

__all__ = ["SCALE", "ZERO", "Amount", "Hash256", "KeyPair", "KeyRegistry", "Wallets", "hash256", "__version__"]
