"""
Spectrum of the linearized flow
===============================

Assemble the linearization at a minimizer in a tangent frame and look at
the eigenvalues closest to the imaginary axis.
"""

import numpy as np

from llgorbit.demag import build_kernel, demag_tensor
from llgorbit.energy import SimParams
from llgorbit.grid import ShapeSpec, build_grid
from llgorbit.linop import mean_mode_block, spectrum
from llgorbit.minimize import minimize

eta = 0.1
g = build_grid(ShapeSpec("ellipsoid", (2.0, 1.0, 1.0)), 8)
k = build_kernel(g)
m = minimize(SimParams(eta), g, k).m

for alpha in (0.0, 1.0):
    rep = spectrum(m, SimParams(eta, alpha=alpha), k)
    low = rep.eigenvalues[np.argsort(np.abs(rep.eigenvalues.real))][:4]
    print(f"alpha={alpha}: dim={rep.dimension} min|Re|={rep.min_abs_real:.3e} clear={rep.clear}")
    print("  lowest:", np.round(low, 6))

# the slowest pair is the uniform precession mode, predicted by a 2x2 block
block = mean_mode_block(demag_tensor(k), eta, 1.0)
print("2x2 block eigenvalues:", np.round(np.linalg.eigvals(block), 6))

# for a sphere that mode is free, and the spectrum touches zero
gs = build_grid(ShapeSpec("ellipsoid"), 8)
ks = build_kernel(gs)
rep = spectrum(minimize(SimParams(eta), gs, ks).m, SimParams(eta, alpha=1.0), ks)
print(f"sphere: min|mu|={rep.min_abs:.2e}")
