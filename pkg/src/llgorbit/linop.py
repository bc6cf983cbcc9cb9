"""Linearization of the LLG flow at a stationary state and its spectrum.

``apply_linearization`` is the exact Jacobian of :func:`llg.llg_rhs` at
``lambda = 0``.  Restricted to the tangent bundle via a per-cell orthonormal
frame it becomes a real ``2N x 2N`` matrix whose eigenvalues are the
spectral objects checked here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .demag import DemagKernel, DemagTensor, stray_field
from .energy import SimParams
from .grid import Grid, check_field, check_unit, exchange_norm_sq, inner_l2, laplacian_neumann, norm_l2

__all__ = [
    "DENSE_CAP",
    "TangentError",
    "TangentFrame",
    "SpectrumReport",
    "CoercivityProbe",
    "apply_linearization",
    "tangent_check",
    "assemble_matrix",
    "spectrum",
    "mean_mode_block",
    "test_function_w",
    "coercivity_probe",
    "random_tangent",
]

DENSE_CAP = 4096
CLEARANCE_TOL = 1e-8


class TangentError(ValueError):
    """Input field is not tangent to the base magnetization."""


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)[:, None]


class TangentFrame:
    """Orthonormal pair (e_theta, e_phi) spanning {v : v . m = 0} per cell.

    e_theta is Gram-Schmidt of the coordinate axis least aligned with m
    (ties go to the lowest axis index); e_phi = m x e_theta.
    """

    def __init__(self, m: np.ndarray):
        check_unit(m)
        self.m = np.array(m, dtype=float)
        axis = np.argmin(np.abs(self.m), axis=1)
        a = np.zeros_like(self.m)
        a[np.arange(len(a)), axis] = 1.0
        t = a - _dot(self.m, a) * self.m
        self.e_theta = t / np.linalg.norm(t, axis=1, keepdims=True)
        self.e_phi = np.cross(self.m, self.e_theta)

    @property
    def dim(self) -> int:
        return 2 * len(self.m)

    def to_field(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c).reshape(-1, 2)
        return c[:, :1] * self.e_theta + c[:, 1:] * self.e_phi

    def coords(self, v: np.ndarray) -> np.ndarray:
        """Frame coordinates (interleaved per cell) of the tangential part."""
        out = np.empty((len(v), 2))
        out[:, 0] = np.einsum("ij,ij->i", v, self.e_theta)
        out[:, 1] = np.einsum("ij,ij->i", v, self.e_phi)
        return out.ravel()

    def basis(self, j: int) -> np.ndarray:
        c = np.zeros(self.dim)
        c[j] = 1.0
        return self.to_field(c)


def apply_linearization(u, m, p: SimParams, k: DemagKernel) -> np.ndarray:
    """L u at base point m (lambda = 0), all ten terms.

    On the grid ``|grad m|^2 = -m . Lap m`` and ``2 grad u : grad m`` is its
    derivative ``-(u . Lap m + m . Lap u)``.
    """
    g = k.grid
    u = check_field(u, g)
    m = check_field(m, g)
    a, eta2 = p.alpha, p.eta**2
    lap_u = laplacian_neumann(u, g)
    lap_m = laplacian_neumann(m, g)
    Hu = stray_field(u, k)
    Hm = stray_field(m, k)
    out = lap_u
    out = out + a * np.cross(m, lap_u)
    out = out - (_dot(u, lap_m) + _dot(m, lap_u)) * m
    out = out - _dot(m, lap_m) * u
    out = out + a * np.cross(u, lap_m)
    out = out + a * eta2 * np.cross(m, Hu)
    out = out + a * eta2 * np.cross(u, Hm)
    out = out - eta2 * np.cross(m, np.cross(m, Hu))
    out = out - eta2 * np.cross(m, np.cross(u, Hm))
    out = out - eta2 * np.cross(u, np.cross(m, Hm))
    return out


def _require_tangent(u, m, tol=1e-10):
    dev = np.max(np.abs(np.einsum("ij,ij->i", u, m))) if len(u) else 0.0
    if dev > tol:
        raise TangentError(f"field is not tangent: max |u.m| = {dev:.3e}")


def h2_norm(u, g: Grid) -> float:
    lap = laplacian_neumann(u, g)
    return float(np.sqrt(norm_l2(u, g) ** 2 + exchange_norm_sq(u, g) + norm_l2(lap, g) ** 2))


def tangent_check(u, m, p: SimParams, k: DemagKernel) -> float:
    """||(L u) . m||_{L2} for a tangent u."""
    g = k.grid
    u = check_field(u, g)
    _require_tangent(u, m)
    normal = np.einsum("ij,ij->i", apply_linearization(u, m, p, k), m)
    return float(np.sqrt(np.sum(normal**2) * g.cell_volume))


def assemble_matrix(m, p: SimParams, k: DemagKernel, frame: TangentFrame | None = None) -> np.ndarray:
    """Frame-projected linearization as a dense 2N x 2N matrix."""
    frame = frame or TangentFrame(m)
    n = frame.dim
    if n > DENSE_CAP:
        raise ValueError(
            f"dense assembly of size {n} exceeds the cap {DENSE_CAP}; "
            "use the matrix-free operator with an iterative eigensolver"
        )
    A = np.empty((n, n))
    for j in range(n):
        A[:, j] = frame.coords(apply_linearization(frame.basis(j), m, p, k))
    return A


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    min_abs_real: float
    min_abs_real_nonzero_im: float
    min_abs: float
    dimension: int
    eta: float
    alpha: float
    tol: float = CLEARANCE_TOL

    @property
    def clear(self) -> bool:
        """No eigenvalue within ``tol`` of the imaginary axis."""
        return self.min_abs_real > self.tol

    def conjugation_defect(self) -> float:
        ev = self.eigenvalues
        mirror = np.sort_complex(np.conj(ev))
        return float(np.max(np.abs(np.sort_complex(ev) - mirror))) if len(ev) else 0.0

    def closest(self, z: complex) -> complex:
        return complex(self.eigenvalues[np.argmin(np.abs(self.eigenvalues - z))])


def spectrum(m, p: SimParams, k: DemagKernel, A: np.ndarray | None = None) -> SpectrumReport:
    if A is None:
        A = assemble_matrix(m, p, k)
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigensolver failed (matrix condition {np.linalg.cond(A):.3e})"
        ) from exc
    ev = ev[np.lexsort((ev.imag, ev.real))]
    re = np.abs(ev.real)
    off_axis = np.abs(ev.imag) >= 1e-6
    return SpectrumReport(
        eigenvalues=ev,
        min_abs_real=float(re.min()),
        min_abs_real_nonzero_im=float(re[off_axis].min()) if off_axis.any() else np.inf,
        min_abs=float(np.abs(ev).min()),
        dimension=len(ev),
        eta=p.eta,
        alpha=p.alpha,
    )


def mean_mode_block(d: DemagTensor, eta: float, alpha: float) -> np.ndarray:
    """Action of L on constant transverse fields at a uniform long-axis state
    of an ellipsoid, in the (e2, e3) basis."""
    l1, l2, l3 = d.eigvals
    e2 = eta**2
    return np.array([[e2 * (l1 - l2), alpha * e2 * (l3 - l1)], [alpha * e2 * (l1 - l2), e2 * (l1 - l3)]])


def test_function_w(u: np.ndarray) -> np.ndarray:
    """w[u] = (0, -u3, u2)."""
    u = np.asarray(u)
    w = np.zeros_like(u)
    w[:, 1] = -u[:, 2]
    w[:, 2] = u[:, 1]
    return w


class CoercivityProbe(NamedTuple):
    q1: float
    q2: float
    grad_sq: float
    mean: np.ndarray


def coercivity_probe(u, m, p: SimParams, k: DemagKernel) -> CoercivityProbe:
    """(-L u, u) and (-L u, alpha w[u]) with the gradient/mean diagnostics."""
    g = k.grid
    u = check_field(u, g)
    _require_tangent(u, m)
    Lu = apply_linearization(u, m, p, k)
    q1 = -inner_l2(Lu, u, g)
    q2 = -p.alpha * inner_l2(Lu, test_function_w(u), g)
    mean = u.sum(axis=0) * g.cell_volume / g.volume
    return CoercivityProbe(q1, q2, exchange_norm_sq(u, g), mean)


def random_tangent(m: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(m.shape)
    return v - _dot(m, v) * m
