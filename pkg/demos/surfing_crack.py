#!/usr/bin/env python3
"""Steady crack propagation dissipates Gc per unit crack advance.

The "surfing" problem drags a crack across a strip: the closed-form mode-I
crack-tip displacement field, translated rightward at speed v, is imposed on
the entire outer boundary.  With the stress intensity factor set to its
critical value K_I = sqrt(Gc E), the crack has no choice but to follow the
moving tip — and Griffith's criterion predicts that doing so costs exactly
Gc per unit length, i.e. dissipated energy growing linearly in time with
slope Gc * v.

This script runs a coarse strip with an over-relaxed alternate-minimization
solver and prints the dissipated energy and its running slope per step.  The
early steps are transient (the pre-seeded notch relaxes into the moving
field); after that the slope settles near Gc * v.

Runs in about ten seconds.
"""

import numpy as np

from phasefrac.cases import run_quasistatic, setup_surfing
from phasefrac.model import Material
from phasefrac.solver import SolverConfig


def main() -> None:
    material = Material(E=1.0, nu=0.3, Gc=1.0, ell=0.1)
    setup = setup_surfing(material, h=0.05, n_steps=12, t_end=1.0)
    v = setup.params["v"]
    print(f"surfing strip: K_I = {setup.params['K_I']:.3f} (critical), "
          f"v = {v:g}, mesh h = 0.05")
    print(f"Griffith prediction: d(dissipated)/dt = Gc*v = {material.Gc * v:g}\n")

    records = run_quasistatic(setup, SolverConfig(method="am", omega=1.6),
                              snapshot_stride=0)

    print(f"{'step':>4} {'t':>6} {'tip x':>6} {'dissipated':>11} "
          f"{'slope':>7} {'AM iters':>8}")
    prev = None
    for r in records:
        slope = ""
        if prev is not None and r.load > prev.load:
            slope = f"{(r.energy.dissipated - prev.energy.dissipated) / (r.load - prev.load):7.3f}"
        tip = setup.params["L_c"] + v * r.load
        print(f"{r.step:>4} {r.load:>6.3f} {tip:>6.3f} "
              f"{r.energy.dissipated:>11.5f} {slope:>7} "
              f"{r.report.am_iterations:>8}")
        prev = r

    ts = np.array([r.load for r in records])
    diss = np.array([r.energy.dissipated for r in records])
    late = ts >= 0.4
    A = np.column_stack([ts[late], np.ones(int(late.sum()))])
    slope = np.linalg.lstsq(A, diss[late], rcond=None)[0][0]
    print(f"\nleast-squares slope over t >= 0.4: {slope:.3f} (target "
          f"{material.Gc * v:g}; the excess is the O(h/ell) surface-energy "
          f"overestimate at h = ell/2 — at h = ell/5 it drops below 7%)")


if __name__ == "__main__":
    main()
