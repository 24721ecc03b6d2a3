"""A strong mean flow pushes the pitchfork to larger forcing.

Run: python demos/mean_flow_stabilizes.py
"""

import numpy as np

from kolmoflow.bifurcation import growth_rate, quadratic_fit, sweep_omega
from kolmoflow.dynamics import FlowParams
from kolmoflow.spectral import TorusSpec

base = FlowParams(epsilon=1.0, alpha=0.0, lam=1.0, Omega=0.0, torus=TorusSpec(0.7, 5), forcing_mode=1)

print("growth rate of the shear state at lambda=50 as Omega grows:")
for Om in (0.0, 2.0, 4.0, 6.0):
    print(f"  Omega={Om:4.1f}  max Re mu = {growth_rate(base.replace(Omega=Om), 50.0):+.4f}")

sweep = sweep_omega(base, np.arange(0.0, 21.0, 2.0))
fit = quadratic_fit([(r.Omega, r.lambda0) for r in sweep])
print("\ncritical forcing lambda_0(Omega):")
for r in sweep:
    print(f"  Omega={r.Omega:4.1f}  lambda_0={r.lambda0:9.3f}  ||omega||={r.norm_at_crit:7.3f}")
print(f"\nleast squares: lambda_0 = {fit.c2:.4f} Omega^2 + {fit.c1:.4f} Omega + {fit.c0:.4f} (rms {fit.rms_residual:.3f})")
