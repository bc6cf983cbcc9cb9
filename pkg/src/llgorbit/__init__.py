"""Time-periodic LLG dynamics of small soft ferromagnetic particles.

Energy minimizers, stray fields and demagnetizing tensors, projected RK4
integration, spectral analysis of the linearized flow and Newton shooting
for periodic orbits under weak periodic forcing.
"""

__version__ = "0.1.0"

from .demag import build_kernel, demag_tensor, shape_condition, stray_energy, stray_field
from .energy import ExternalFieldSpec, SimParams, effective_field, el_residual, energy, tangent_project
from .grid import ShapeSpec, build_grid, inner_l2, laplacian_neumann, mean_fluct_split
from .linop import TangentFrame, apply_linearization, assemble_matrix, spectrum
from .llg import evolve, external_field, llg_rhs
from .minimize import minimize, regularity_report
from .periodic import continuation, monodromy, poincare_map, shoot

__all__ = [
    "ShapeSpec", "build_grid", "inner_l2", "laplacian_neumann", "mean_fluct_split",
    "build_kernel", "demag_tensor", "shape_condition", "stray_energy", "stray_field",
    "ExternalFieldSpec", "SimParams", "effective_field", "el_residual", "energy", "tangent_project",
    "minimize", "regularity_report",
    "evolve", "external_field", "llg_rhs",
    "TangentFrame", "apply_linearization", "assemble_matrix", "spectrum",
    "continuation", "monodromy", "poincare_map", "shoot",
]
