"""Residual against mesh width for the PDE chain and the output LDE.

Prints, per soliton and check, the sup residual at successive halvings of the
grid spacing together with the observed reduction factor.
"""

import argparse

from canvessel import suites
from canvessel.acceptance import PDE_CHAIN, SOLITONS
from canvessel.scattering import backlund_residual, probe_lambdas


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, nargs="+", default=[21, 41, 81, 161], help="grid sizes per axis")
    ap.add_argument("--steps", type=float, nargs="+", default=[1e-2, 5e-3, 2.5e-3], help="Baecklund FD steps")
    args = ap.parse_args(argv)
    for name in SOLITONS:
        rows = {}
        for n in args.points:
            for r in suites.pde_suite(suites.builtin_case(name, n=n)):
                rows.setdefault(r.check, []).append(r.sup_residual)
        case = suites.builtin_case(name)
        lams = probe_lambdas(case.family, 12)
        rows["backlund(h)"] = [
            max(backlund_residual(case.family, lam, case.xs, u0, h=h) for lam in lams for u0 in ((1, 0), (0, 1)))
            for h in args.steps
        ]
        print(f"{name}:")
        for check in ("canonical_pde",) + PDE_CHAIN + ("backlund(h)",):
            vals = rows[check]
            ratios = [a / b if b else float("inf") for a, b in zip(vals, vals[1:])]
            cells = "  ".join(f"{v:.2e}" for v in vals)
            print(f"  {check:16s} {cells}   ratios " + " ".join(f"{r:.1f}" for r in ratios))


if __name__ == "__main__":
    main()
