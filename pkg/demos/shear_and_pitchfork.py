"""Shear states, their loss of stability, and the branch born at the pitchfork.

Run: python demos/shear_and_pitchfork.py
"""

from kolmoflow.bifurcation import critical_lambda, find_bracket, reynolds
from kolmoflow.dynamics import FlowParams
from kolmoflow.spectral import TorusSpec, l2_norm
from kolmoflow.stationary import branch_switch_guess, newton_solve, rightmost_eigenvalue, shear_branch

torus = TorusSpec(beta=0.7, N=5)
base = FlowParams(epsilon=1.0, alpha=0.0, lam=1.0, Omega=0.0, torus=torus, forcing_mode=1)

# The shear state is closed form; its rightmost eigenvalue decides stability.
for lam in (5.0, 20.0):
    p = base.replace(lam=lam)
    rep = rightmost_eigenvalue(p, shear_branch(p), vectors=True)
    weights = rep.sector_weights(torus)
    print(f"lambda={lam:5.1f}  Re={reynolds(p):7.2f}  rightmost={rep.rightmost.real:+.4f}  "
          f"|k1|=1 share of the leading mode={weights.get(1, 0.0):.3f}")

# Bisection on the eigenvalue sign locates the pitchfork.
res = critical_lambda(base, find_bracket(base, 10.0))
print(f"critical forcing at Omega=0: {res.lambda0:.4f} (bracket {res.bracket[0]:.4f}..{res.bracket[1]:.4f})")

# Past the pitchfork, Newton seeded along the unstable eigenvector finds the new branch.
p = base.replace(lam=20.0)
sol = newton_solve(p, branch_switch_guess(p, amplitude=2.0))
print(f"nontrivial state at lambda=20: |a(1,0)|={abs(sol.solution[(1, 0)]):.4f}, "
      f"iterations={sol.iterations}, residuals={[f'{r:.1e}' for r in sol.residual_norms]}")
print(f"its norm {l2_norm(sol.solution):.4f} vs shear norm {l2_norm(shear_branch(p)):.4f}")
