"""IDS of the free chain on Z against 1 - arccos(E/2)/pi."""

import argparse
import time

import numpy as np

from delone_ids import EnergyGrid, adjacency, make_periodic
from delone_ids.ids import exact_free_ids, ids_curve
from delone_ids.spectral import van_hove_boxes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--L0", type=int, default=256)
    ap.add_argument("--count", type=int, default=4)
    ap.add_argument("--m", type=int, default=121)
    args = ap.parse_args()
    grid = EnergyGrid.uniform(-3, 3, args.m)
    t0 = time.perf_counter()
    curve = ids_curve(adjacency(1.0), make_periodic(d=1), van_hove_boxes(1, args.L0, args.count), grid)
    dt = time.perf_counter() - t0
    exact = exact_free_ids(grid.energies)
    print("L       sites  sup_err    sup_successive")
    for i, (q, col) in enumerate(zip(curve.boxes, curve.columns)):
        err = float(np.max(np.abs(col.per_volume - exact)))
        diag = curve.diagnostics[i - 1] if i else float("nan")
        print(f"{q.hi[0]:<7g} {col.dimension:<6d} {err:.3e}  {diag:.3e}")
    print(f"{dt:.2f}s")


if __name__ == "__main__":
    main()
