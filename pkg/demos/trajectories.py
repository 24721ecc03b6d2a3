"""Integrate the four preset initial conditions with and without a mean flow.

A reduced truncation keeps this to a few seconds; the full experiment is
`kolmoflow stabilize`.

Run: python demos/trajectories.py
"""

from kolmoflow.dynamics import FlowParams
from kolmoflow.experiments import PRESETS, initial_field
from kolmoflow.spectral import TorusSpec, l2_norm
from kolmoflow.stationary import shear_branch
from kolmoflow.taylor import integrate

torus = TorusSpec(0.75, 7)
for Omega in (0.0, 100.0):
    p = FlowParams(1.0, 0.0, 100.0, Omega, torus, forcing_mode=2)
    print(f"Omega={Omega:g}: shear state norm {l2_norm(shear_branch(p)):.5f}")
    for ic in PRESETS:
        tr = integrate(p, initial_field(torus, ic), 5.0, sample_every=1.0)
        norms = "  ".join(f"{n:8.4f}" for n in tr.norms)
        print(f"  IC {ic:>3}: t=0..5  {norms}   ({tr.steps} steps)")
