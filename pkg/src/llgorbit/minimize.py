"""Regular minimizers of the rescaled energy and their eta-scaling."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .demag import DemagKernel, demag_tensor, stray_field
from .energy import SimParams, tangent_project
from .grid import (
    Grid,
    check_field,
    check_unit,
    exchange_norm_sq,
    gradient_sq_density,
    inner_l2,
    laplacian_neumann,
    normalize,
)

__all__ = [
    "MinimizerResult",
    "ScalingReport",
    "minimize",
    "regularity_report",
    "long_axis",
]

log = logging.getLogger(__name__)


@dataclass
class MinimizerResult:
    m: np.ndarray
    energy: float
    el_residual_norm: float
    iterations: int
    eta: float
    aligned_sign: int
    converged: bool
    axis: np.ndarray
    energy_history: list = field(default_factory=list, repr=False)


def long_axis(k: DemagKernel) -> np.ndarray:
    """Eigenvector of the smallest demagnetizing factor."""
    return demag_tensor(k).eigvecs[:, 0].copy()


def _state(m, p, g, k):
    H = stray_field(m, k)
    lap = laplacian_neumann(m, g)
    e = exchange_norm_sq(m, g) - p.eta**2 * inner_l2(H, m, g)
    r = tangent_project(lap + p.eta**2 * H, m)
    return e, r


def minimize(
    p: SimParams,
    g: Grid,
    k: DemagKernel,
    init: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 50000,
    energy_slack: float = 1e-12,
) -> MinimizerResult:
    """Projected steepest descent on the sphere with Barzilai-Borwein steps.

    Steps that would raise the energy by more than ``energy_slack`` are
    halved until they don't, so the energy sequence is monotone.  The
    external field is ignored (autonomous energy).
    """
    if p.eta > 0.5:
        raise ValueError(f"minimize is meant for small particles, got eta = {p.eta}")
    axis = long_axis(k)
    m = g.constant(axis) if init is None else normalize(check_field(init, g).copy())
    check_unit(m)
    V = g.cell_volume

    e, r = _state(m, p, g, k)
    res = np.sqrt(np.sum(r * r) * V)
    history = [e]
    # first step from the stiffest possible scale of the Laplacian
    tau = 0.5 / (4 * sum(1 / hh**2 for hh in g.h))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        step = tau
        for _ in range(60):
            m_new = normalize(m + step * r)
            e_new, r_new = _state(m_new, p, g, k)
            if e_new <= e + energy_slack:
                break
            step *= 0.5
        else:
            log.warning("line search failed at iteration %d", it)
            break
        s = m_new - m
        y = r - r_new  # gradient difference (gradient = -2 r)
        sy = float(np.sum(s * y))
        ss = float(np.sum(s * s))
        yy = float(np.sum(y * y))
        # alternate the two BB formulas; fall back to the previous step
        if sy > 0:
            tau = ss / sy if it % 2 else sy / yy
        else:
            tau = step
        m, e, r = m_new, e_new, r_new
        res = np.sqrt(np.sum(r * r) * V)
        history.append(e)

    sign = 1
    if np.mean(m, axis=0) @ axis < 0:
        m = -m
        sign = -1
    converged = bool(res <= tol)
    if not converged:
        warnings.warn(
            f"minimize: no convergence after {it} iterations (residual {res:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return MinimizerResult(m, e, float(res), it, p.eta, sign, converged, axis, history)


@dataclass
class ScalingReport:
    etas: np.ndarray
    grad_l2: np.ndarray
    grad_linf: np.ndarray
    dev_linf: np.ndarray
    slopes: dict
    prefactors: dict

    def rows(self):
        for i, eta in enumerate(self.etas):
            yield {
                "eta": eta,
                "grad_l2": self.grad_l2[i],
                "grad_linf": self.grad_linf[i],
                "dev_linf": self.dev_linf[i],
            }


def regularity_report(runs: list[MinimizerResult], g: Grid) -> ScalingReport:
    """Log-log least-squares slopes of minimizer norms against eta."""
    etas = np.array([r.eta for r in runs])
    if len(np.unique(etas)) < 3:
        raise ValueError("scaling report needs at least three distinct eta values")
    gl2 = np.array([np.sqrt(exchange_norm_sq(r.m, g)) for r in runs])
    glinf = np.array([np.sqrt(gradient_sq_density(r.m, g).max()) for r in runs])
    dev = np.array([np.linalg.norm(r.m - r.axis, axis=1).max() for r in runs])
    slopes, pref = {}, {}
    x = np.log(etas)
    for name, y in (("grad_l2", gl2), ("grad_linf", glinf), ("dev_linf", dev)):
        slope, icpt = np.polyfit(x, np.log(y), 1)
        slopes[name] = float(slope)
        pref[name] = float(np.exp(icpt))
    return ScalingReport(etas, gl2, glinf, dev, slopes, pref)
