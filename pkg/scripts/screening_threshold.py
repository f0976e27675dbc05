"""Static P-V loop width of a single grain versus trap screening.

Solves the equilibrium S-curve V_G(P) of one slice (Poisson at fixed P plus
the Landau field relation) and reports the width of its hysteretic part.
A negative-slope segment of V_G(P) is what makes the sweep hysteretic.
"""

import argparse

import numpy as np
from scipy.optimize import brentq

from fefetsim.ferro import LandauCoefficients, ferro_field
from fefetsim.stack import Stack1D, build_mesh, solve_poisson
from fefetsim.traps import TrapDistribution


def scurve(stack, coeffs, traps, ps):
    def gate_voltage(p):
        return brentq(lambda vg: solve_poisson(stack, p, vg, traps).e_ferro - ferro_field(p, coeffs),
                      -15.0, 15.0, xtol=1e-6)
    return np.array([gate_voltage(p) for p in ps])


def loop_width(v):
    """Gap between the two turning points of the S-curve; 0 if monotone."""
    fold = np.flatnonzero(np.diff(v) < 0)
    if fold.size == 0:
        return 0.0
    return float(v[fold[0]] - v[fold[-1] + 1])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=float, nargs="+", default=[0.6, 1.0, 1.4])
    ap.add_argument("--dos-scale", type=float, nargs="+", default=[0.0, 1.0, 3.0])
    args = ap.parse_args()
    stack = build_mesh(Stack1D())
    ps = np.linspace(-0.19, 0.19, 77)
    print("k     dos_scale  loop_width_V")
    for k in args.k:
        c = LandauCoefficients().scaled(k)
        for s in args.dos_scale:
            traps = None if s == 0 else TrapDistribution(8e26 * s, 4e26 * s)
            print(f"{k:4.2f}  {s:9.2f}  {loop_width(scurve(stack, c, traps, ps)):12.3f}")


if __name__ == "__main__":
    main()
