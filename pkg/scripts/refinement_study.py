"""Resolution study: energies of x*chi as the quadrature is refined.

Prints a CSV with one row per (measure, resolution).  On the fat Cantor set
the Cantor depth is the resolution, and E_AM approaches 1/4 from above as
the stage mass 1/2 + 2^(-n-1) decreases.
"""

import argparse
import csv
import sys

from amsobolev import catalog
from amsobolev.energy import energy_am, energy_lip
from amsobolev.measure import Cantor, Measure
from amsobolev.relax import relax_sequence


def fat_cantor(depth):
    return Measure(1, ((1.0, Cantor("fat", dim=1, depth=depth)),), f"cantor_fat_{depth}")


def rows(max_depth):
    for depth in range(2, max_depth + 1):
        mu = fat_cantor(depth)
        f = catalog.coordinate_field(mu, 0)
        upper = relax_sequence(f, mu, "plateau").e_ch_upper
        yield {"measure": "cantor_fat", "resolution": depth, "e_am": energy_am(f, mu).value,
               "e_lip": energy_lip(f, mu).value, "e_ch_upper": upper}
    ms = catalog.catalog_measures()
    for name in ("segment", "arc", "box"):
        mu = ms[name]
        f = catalog.coordinate_field(mu, 0)
        base = mu.resolve(None)
        for scale in (0.25, 0.5, 1.0, 2.0):
            res = mu.refine(base, scale)
            yield {"measure": name, "resolution": "x".join(map(str, res)),
                   "e_am": energy_am(f, mu, res).value, "e_lip": energy_lip(f, mu, resolution=res).value,
                   "e_ch_upper": ""}


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-depth", type=int, default=14)
    a = p.parse_args()
    w = csv.DictWriter(sys.stdout, ["measure", "resolution", "e_am", "e_lip", "e_ch_upper"], lineterminator="\n")
    w.writeheader()
    for r in rows(a.max_depth):
        w.writerow(r)
