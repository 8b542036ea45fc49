#!/usr/bin/env python3
"""Thermal shock: no cracks below the critical quench, a crack array above.

A slab sits stress-free until its bottom face is suddenly quenched by dT.
The advancing cold front imposes an erfc-profile contraction, and the model
has a sharp threshold: below

    dT_c = sqrt(3 Gc / (8 E ell beta^2))

the slab just bends elastically, while for dT well above dT_c a periodic
array of crack bands nucleates at the shocked face — the hallmark pattern of
quenched ceramics.  The bands appear by symmetry breaking, so the mesh is
deliberately jittered; on a perfectly structured grid the uniform damage
layer is an exact solver fixed point and no pattern ever forms.

This script runs the same slab at 0.9 * dT_c (nothing happens) and at
4 * dT_c (three-plus bands appear) and prints the dissipated-energy history
and final band count.

Runs in about fifteen seconds.
"""

from phasefrac.cases import (crack_band_count, run_quasistatic,
                             setup_thermal_shock)
from phasefrac.model import Material
from phasefrac.solver import SolverConfig


def main() -> None:
    material = Material(E=1.0, nu=0.3, Gc=1.0, ell=1.0, beta=1.0)

    for factor in (0.9, 4.0):
        setup = setup_thermal_shock(material, L=10.0, H=4.0, h=0.25,
                                    dT_factor=factor)
        print(f"--- quench at {factor:g} x dT_c "
              f"(dT = {setup.params['delta_T']:.3f}, "
              f"dT_c = {setup.params['critical_shock']:.3f}) ---")
        records = run_quasistatic(setup,
                                  SolverConfig(method="am", omega=1.6),
                                  snapshot_stride=1)
        final = records[-1]

        shown = list(records[::8])
        if shown[-1] is not final:
            shown.append(final)
        print(f"{'front depth tau':>16} {'dissipated':>11} {'max alpha':>10}")
        for r in shown:
            print(f"{r.load:>16.3f} {r.energy.dissipated:>11.4f} "
                  f"{float(r.alpha.max()):>10.4f}")

        bands = crack_band_count(setup.mesh, final.alpha, threshold=0.9,
                                 boundary_tag="bottom")
        print(f"final: max alpha = {float(final.alpha.max()):.4f}, "
              f"crack bands touching the shocked face = {bands}\n")


if __name__ == "__main__":
    main()
