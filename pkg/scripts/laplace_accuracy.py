"""Closed-form vs exact LCR for iid unit branches over a threshold sweep.

Prints the relative error of the Laplace closed form for each N and the
smallest normalized threshold from which it stays within a given bound.
"""

import argparse

import numpy as np

from nrayleigh.analytic import QuadratureConfig, lcr_approx, lcr_exact
from nrayleigh.model import ProductParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="*", default=[2, 3, 4])
    ap.add_argument("--lo", type=float, default=0.05)
    ap.add_argument("--hi", type=float, default=2.5)
    ap.add_argument("--num", type=int, default=50)
    ap.add_argument("--bound", type=float, default=0.10)
    ap.add_argument("--rel-tol", type=float, default=1e-7)
    args = ap.parse_args()

    cfg = QuadratureConfig(rel_tol=args.rel_tol)
    rhos = np.linspace(args.lo, args.hi, args.num)
    print("rho     " + "".join(f"   N={n:<6d}" for n in args.n))
    errs = {n: np.array([lcr_approx(ProductParams.iid(n), r) / lcr_exact(ProductParams.iid(n), r, cfg) - 1
                         for r in rhos]) for n in args.n}
    for j, r in enumerate(rhos):
        print(f"{r:6.3f}  " + "".join(f"  {errs[n][j]:+8.2%}" for n in args.n))
    for n in args.n:
        bad = rhos[np.abs(errs[n]) > args.bound]
        print(f"N={n}: |error| <= {args.bound:.0%} for rho > {bad.max():.3f}" if bad.size
              else f"N={n}: |error| <= {args.bound:.0%} everywhere")


if __name__ == "__main__":
    main()
