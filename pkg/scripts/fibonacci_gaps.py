"""Gaps of the Fibonacci onsite model read off the IDS plateaus."""

import argparse

from delone_ids import EnergyGrid, make_fibonacci
from delone_ids.ids import gap_report, ids_curve
from delone_ids.kernels import fibonacci_onsite_model
from delone_ids.spectral import van_hove_boxes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lam", type=float, default=1.0, help="potential on b tiles")
    ap.add_argument("--L", type=int, default=2048)
    ap.add_argument("--min-width", type=float, default=0.05)
    args = ap.parse_args()
    k = fibonacci_onsite_model(lam_b=args.lam)
    grid = EnergyGrid.uniform(-3, 3 + args.lam, 701)
    curve = ids_curve(k, make_fibonacci(), van_hove_boxes(1, args.L // 8, 4), grid)
    print("lo       hi       width    N")
    for gap in gap_report(curve, args.min_width):
        print(f"{gap.lo:<8.3f} {gap.hi:<8.3f} {gap.width:<8.3f} {gap.value:.6f}")


if __name__ == "__main__":
    main()
