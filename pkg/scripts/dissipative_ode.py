"""Damped oscillator q'' + h q' + m^2 q = 0 against the first integral of the damped current.

The one-dimensional reduction of the damped current is
exp(h t) (q q' + (2/h) (q'^2/2 + m^2 q^2/2)), which must stay constant.
Both normalizations of the damping vector are printed; in one dimension they coincide.
"""

from __future__ import annotations

import argparse

import numpy as np
from scipy.integrate import solve_ivp

from fieldlab.currents import dissipative_current
from fieldlab.dsl import parse_lagrangian
from fieldlab.jet import FieldBlock, Jet
from fieldlab.lattice import LatticeGrid


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--tmax", type=float, default=10.0)
    ap.add_argument("--samples", type=int, default=1001)
    args = ap.parse_args()
    h, m = args.h, args.m
    sol = solve_ivp(lambda t, y: [y[1], -h * y[1] - m * m * y[0]], (0.0, args.tmax), [1.0, 0.3],
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    g = LatticeGrid((args.samples,), (args.tmax / (args.samples - 1),), (0.0,))
    t = g.times()
    q, qdot = sol.sol(t)
    closed = np.exp(h * t) * (q * qdot + (2 / h) * (0.5 * qdot**2 + 0.5 * m * m * q**2))
    print(f"closed form: max relative variation {np.ptp(closed) / abs(closed[0]):.3e}")
    spec = parse_lagrangian("exp(h0*x0)*(0.5*d(phi,mu)*d(phi,^mu) - 0.5*m^2*phi^2)", {"h0": h, "m": m}, dim=1)
    block = FieldBlock(g, {"phi": q})

    def exact(name, derivs):
        return {(): q, (0,): qdot}.get(tuple(derivs))

    for norm in ("trace", "literal"):
        j0 = dissipative_current(spec, block, norm, jet=Jet(block, exact)).values[0]
        print(f"{norm:8s}: max relative variation {np.ptp(j0) / abs(j0[0]):.3e}")


if __name__ == "__main__":
    main()
