import sys

import pytest
from hypothesis import settings

from interpool.chainsim.alien import AlienChain, mine_alien_block
from interpool.chainsim.transactions import AlienTx
from interpool.core import Amount, KeyRegistry

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def registry():
    return KeyRegistry()


@pytest.fixture
def busy_chain(registry):
    """Alien chain with blocks of 1, 2, 3, 4, 5 and 7 transactions."""
    keys = [registry.new_key("busy", i) for i in range(8)]
    chain = AlienChain(registry)
    for k in keys:
        chain.fund(k.pubkey, Amount.of(1000))
    nonce = {k.pubkey: 0 for k in keys}
    for size in (1, 2, 3, 4, 5, 7):
        txs = []
        for j in range(size):
            src, dst = keys[j], keys[(j + 1) % len(keys)]
            txs.append(AlienTx.signed(src, dst.pubkey, Amount.of(j + 1), nonce[src.pubkey]))
            nonce[src.pubkey] += 1
        mine_alien_block(chain, txs)
    return chain


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(results):
            terminalreporter.write_line(results[cid])
