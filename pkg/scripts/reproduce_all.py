"""Run the three preset batteries and write their CSV tables under out/<preset>/."""

import argparse
import sys

from amsobolev.cli import main
from amsobolev.experiments import PRESETS


def run(out, seed):
    worst = 0
    for preset in sorted(PRESETS):
        args = ["--preset", preset, "--out", f"{out}/{preset}"]
        if seed is not None:
            args += ["--seed", str(seed)]
        worst = max(worst, main(args))
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    a = p.parse_args()
    sys.exit(run(a.out, a.seed))
