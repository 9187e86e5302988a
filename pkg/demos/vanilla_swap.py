"""Two-party swap settled by an SPV proof, then the same swap left to time out."""

from interpool.cli import swap_demo


def show(title: str, run: dict) -> None:
    print(title, "->", run["state"])
    for stage in ("before", "locked", "after"):
        print(f"  {stage:7s}", {k: str(v) for k, v in run[stage].items()})
    print("  alien  ", {k: str(v) for k, v in run["alien"].items()})
    for ev in run["events"]:
        print("   ", ev)


if __name__ == "__main__":
    show("happy path", swap_demo(True))
    show("timeout", swap_demo(False))
