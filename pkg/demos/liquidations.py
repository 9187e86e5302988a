"""Repeated price shocks force liquidations; each one leaves the pool ratio where the market put it."""

from fractions import Fraction

from interpool.core import Amount
from interpool.scenario import load_bundled, run_scenario


def main() -> None:
    rep = run_scenario(load_bundled("liquidation_heavy"))
    for ev in rep.events("liquidated"):
        (bi, bn), (ai, an) = ev["pool_before"], ev["pool_after"]
        before, after = Fraction(bn, bi), Fraction(an, ai)
        print(f"block {ev['height']:>2} {ev['provider_id']} ({ev['reason']}): removed "
              f"{Amount(ev['removed_intertoken'])} / {Amount(ev['removed_native'])}, ratio {float(before):.6f} -> "
              f"{float(after):.6f}, refund {Amount(ev['refund'])}")
    print("liquidations:", rep.final["liquidations"], " all checks pass:", rep.ok)


if __name__ == "__main__":
    main()
