"""How the packet width moves the measured orders of J and H on coarse 3+1D tori.

With few sites per axis the central stencils are not yet asymptotic (k h near 1),
so the fitted order depends on how well resolved the data are.
"""

from __future__ import annotations

import argparse

from fieldlab.currents import scaling_currents, verify_current
from fieldlab.dynamics import EvolutionConfig, GaussianPacket, evolve, measure_order
from fieldlab.presets import load_theory


def orders(width: float, ns: list[int]) -> dict[str, float]:
    spec = load_theory("phi4-massless-4d")
    table: dict[str, list[float]] = {}
    for n in ns:
        cfg = EvolutionConfig(1 / (8 * n), 8 * n, GaussianPacket(width=width, amplitude=0.3, background=1.0),
                              (n, n, n), (1.0, 1.0, 1.0), t0=-0.5, spatial_origin=(-0.5, -0.5, -0.5))
        J, H = scaling_currents(spec, evolve(spec, cfg))
        table.setdefault("J", []).append(verify_current(J).residual_l2)
        for nu, col in enumerate(H.columns()):
            table.setdefault(f"H{nu}", []).append(verify_current(col).residual_l2)
    return {k: measure_order(k, [1 / n for n in ns], v).order for k, v in table.items()}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="0.15,0.25,0.35,0.5")
    ap.add_argument("--resolutions", default="6,8,12")
    args = ap.parse_args()
    ns = [int(x) for x in args.resolutions.split(",")]
    for w in (float(x) for x in args.widths.split(",")):
        o = orders(w, ns)
        print(f"width {w:.2f}: " + "  ".join(f"{k} {v:.3f}" for k, v in o.items()))


if __name__ == "__main__":
    main()
