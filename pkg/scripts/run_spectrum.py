#!/usr/bin/env python3
"""Sweep the transition spectrum, locate both sweet spots, and tabulate
the dispersive shift against photon number at each.

The full-resolution run (100 flux points at 150x15) takes a few minutes;
--quick drops to a coarse grid and a reduced basis for a fast look.
"""

import argparse
import time

import numpy as np

from fluxsim.circuit import (FluxBias, HilbertTruncation,
                             build_coupled_hamiltonian, CircuitParams,
                             diagonalize_and_label)
from fluxsim.spectro import (dispersive_curve, find_sweet_spots,
                             transition_frequencies, transition_sweep)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--quick", action="store_true",
                    help="coarse grid and reduced truncation")
    args = ap.parse_args()

    params = CircuitParams()
    trunc = HilbertTruncation.default_normal()
    steps = args.steps
    if args.quick:
        trunc = trunc.scaled(0.5)
        steps = min(steps, 41)

    t0 = time.time()
    fluxes = np.linspace(29.0, 31.0, steps)
    sweep = transition_sweep(params, fluxes, trunc, workers=args.workers)
    curve = transition_frequencies(sweep, strict=False)
    print(f"sweep of {steps} points: {time.time() - t0:.1f} s")
    for i in curve.minima_indices():
        print(f"  f_ge minimum near phi_ext = {fluxes[i]:.4f} "
              f"({curve.f_ge[i]:.4f} GHz)")

    spots = find_sweet_spots(params, trunc=trunc, curve=curve,
                             workers=args.workers)
    for spot in spots:
        print(f"sweet spot: phi_ext = {spot.phi_ext:.6f}  "
              f"f_ge = {spot.f_ge_ghz:.6f} GHz  "
              f"chi(0) = {spot.chi0_mhz:+.4f} MHz")

    for spot in spots:
        model = build_coupled_hamiltonian(
            params, FluxBias.from_external(spot.phi_ext), trunc)
        spectrum = diagonalize_and_label(model)
        chis = dispersive_curve(spectrum)
        show = [n for n in (0, 10, 50, 100, 114) if n < chis.chi_mhz.size]
        print(f"phi_ext = {spot.phi_ext:.4f}:")
        for n in show:
            print(f"  chi({n:3d}) = {chis.chi_mhz[n]:+.4f} MHz")


if __name__ == "__main__":
    main()
