"""One provider, two price shocks: print the position report after each block."""

from interpool.core import Amount
from interpool.scenario import load_bundled, run_scenario


def cell(m: int) -> str:
    return Amount(m).display()


def main() -> None:
    rep = run_scenario(load_bundled("risk_example"))
    labels = ["join at 1:2.5", "shock to 1:5", "shock to 1:10"]
    for label, block in zip(labels, rep.blocks):
        r = block.risk[0]
        print(f"block {block.height}: {label}")
        print(f"  position           {cell(r['current_intertoken'])} intertoken / {cell(r['current_native'])} native")
        print(f"  risky intertoken   {cell(r['risky_intertoken'])}  ({cell(r['risky_native_value'])} native)")
        print(f"  collateral left    {cell(r['collateral_remaining'])}  of {cell(r['collateral'])}")
        print(f"  exit balance       {cell(r['balance'])}   action: {r['action']}")
    for ev in rep.events("liquidated"):
        print(f"liquidated {ev['provider_id']}: refund {cell(ev['refund'])}, "
              f"{cell(ev['to_buffer'])} native backs the burned market intertokens")
    print("all conservation checks pass:", rep.ok)


if __name__ == "__main__":
    main()
