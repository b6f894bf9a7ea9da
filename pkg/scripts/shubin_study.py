"""Boundary discrepancy tr(phi(A)|Q) - tr(phi(A|Q)) per volume, with its bound."""

import argparse

from delone_ids import make_fibonacci, make_periodic
from delone_ids.ids import shubin_report
from delone_ids.kernels import adjacency, fibonacci_onsite_model
from delone_ids.spectral import Polynomial, van_hove_boxes


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", choices=["z", "fibonacci"], default="fibonacci")
    ap.add_argument("--degrees", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--count", type=int, default=8)
    args = ap.parse_args()
    if args.model == "z":
        k, g = adjacency(1.0), make_periodic(d=1)
    else:
        k, g = fibonacci_onsite_model(), make_fibonacci()
    boxes = van_hove_boxes(1, 32, args.count)
    for n in args.degrees:
        rep = shubin_report(k, g, boxes, Polynomial.monomial(n))
        print(f"phi = x^{n}: slope {rep.slope}, within bound on every box: {rep.all_ok}")
        for r in rep.rows:
            print(f"  L={r.halfwidth:<6g} diff*|Q|={r.diff * 2 * r.halfwidth:8.3f}  diff={r.diff:.3e}  bound={r.bound:.3e}")


if __name__ == "__main__":
    main()
