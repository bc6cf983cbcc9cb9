"""
Small-particle minimizers
=========================

Minimize the rescaled energy for a ladder of particle sizes and fit
log-log slopes of the gradient and of the deviation from the long axis.
"""

from llgorbit.demag import build_kernel
from llgorbit.energy import SimParams
from llgorbit.grid import ShapeSpec, build_grid
from llgorbit.minimize import minimize, regularity_report

g = build_grid(ShapeSpec("ellipsoid", (2.0, 1.0, 1.0)), 12)
k = build_kernel(g)

runs = []
for eta in (0.05, 0.1, 0.2, 0.4):
    r = minimize(SimParams(eta), g, k)
    print(f"eta={eta:<5} iterations={r.iterations:4d} residual={r.el_residual_norm:.2e} energy={r.energy:.6e}")
    runs.append(r)

rep = regularity_report(runs, g)
for row in rep.rows():
    print({key: f"{val:.3e}" for key, val in row.items()})
# a uniform state is critical for a true ellipsoid, so every quantity here
# is driven by the staircase boundary and scales like eta^2
print("slopes:", {key: round(val, 3) for key, val in rep.slopes.items()})
