"""Energy drift and div T convergence for a Klein-Gordon plane wave in 1+1D."""

from __future__ import annotations

import argparse
import math

from fieldlab.currents import energy_momentum, verify_current
from fieldlab.dynamics import EvolutionConfig, PlaneWave, evolve, measure_order
from fieldlab.presets import load_theory


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", default="64,128,256")
    ap.add_argument("--duration", type=float, default=2000 * math.pi / 256)
    ap.add_argument("--mass", type=float, default=1.0)
    args = ap.parse_args()
    spec = load_theory("klein-gordon").with_params(m=args.mass)
    hs, errs = [], []
    print(f"{'N':>6} {'steps':>6} {'drift':>12} {'div T L2':>12}")
    for n in (int(x) for x in args.resolutions.split(",")):
        h = 2 * math.pi / n
        steps = int(round(args.duration / (h / 2)))
        block = evolve(spec, EvolutionConfig(h / 2, steps, PlaneWave(1.0, (1.0,), args.mass), (n,), (2 * math.pi,)))
        T = energy_momentum(spec, block)
        drift = verify_current(T.column(0)).drift
        err = max(verify_current(c).residual_l2 for c in T.columns())
        hs.append(h)
        errs.append(err)
        print(f"{n:>6} {steps:>6} {drift:>12.3e} {err:>12.3e}")
    print(f"measured order {measure_order('T', hs, errs).order:.4f}")


if __name__ == "__main__":
    main()
