"""Explicit integration of the rescaled Landau-Lifshitz-Gilbert equation.

The integrated form is the cross-product-free one,

    m_t = Lap m + a m x Lap m + |grad m|^2 m + a eta^2 m x Hh - eta^2 m x (m x Hh),

with ``Hh = H[m] + lambda h(t)``.  On the grid ``|grad m|^2`` is taken as
``-m . Lap m``, which makes the right-hand side tangent for unit fields and
identical to the damped/precessing LLG form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demag import DemagKernel, stray_field
from .energy import ExternalFieldSpec, SimParams, energy, external_field
from .grid import Grid, check_field, check_unit, laplacian_neumann

__all__ = [
    "IntegrationError",
    "StepSizeError",
    "Trajectory",
    "llg_rhs",
    "external_field",
    "ExternalFieldSpec",
    "rk4_stability_radius",
    "max_stable_dt",
    "default_dt",
    "evolve",
    "flow",
    "norm_drift",
]

MODES = ("full", "precession")


class IntegrationError(RuntimeError):
    def __init__(self, msg, last_good_time):
        super().__init__(f"{msg} (last good time {last_good_time:.6g})")
        self.last_good_time = last_good_time


class StepSizeError(ValueError):
    pass


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)[:, None]


def llg_rhs(m, t: float, p: SimParams, k: DemagKernel, mode: str = "full") -> np.ndarray:
    """Right-hand side of the LLG flow.

    ``mode="precession"`` keeps only ``a m x H_eff`` (energy-conserving
    diagnostic); ``"full"`` is the physical equation.
    """
    g = k.grid
    m = check_field(m, g)
    lap = laplacian_neumann(m, g)
    hh = stray_field(m, k) + p.applied(t)
    eta2 = p.eta**2
    if mode == "precession":
        return p.alpha * np.cross(m, lap + eta2 * hh)
    if mode != "full":
        raise ValueError(f"unknown mode {mode!r}")
    # literal cross products keep the map differentiable off the sphere
    out = lap - _dot(m, lap) * m - eta2 * np.cross(m, np.cross(m, hh))
    if p.alpha:
        out += p.alpha * np.cross(m, lap + eta2 * hh)
    return out


def rk4_stability_radius(theta: float) -> float:
    """Largest r with |R(r e^{i theta})| <= 1 along the ray from 0 (RK4)."""

    def amp(r):
        z = r * complex(math.cos(theta), math.sin(theta))
        return abs(1 + z + z * z / 2 + z**3 / 6 + z**4 / 24)

    lo, hi = 0.0, 1.0
    while amp(hi) <= 1.0 and hi < 10:
        lo, hi = hi, hi + 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if amp(mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def max_stable_dt(g: Grid, alpha: float, mode: str = "full") -> float:
    """RK4 stability limit for the linear part Lap + a m x Lap."""
    rho = 4.0 * sum(1.0 / hh**2 for hh in g.h)
    if mode == "precession":
        if alpha == 0:
            return math.inf
        return rk4_stability_radius(math.pi / 2) / (rho * abs(alpha))
    theta = math.pi - math.atan(abs(alpha))
    return rk4_stability_radius(theta) / (rho * math.hypot(1.0, alpha))


def default_dt(g: Grid, alpha: float) -> float:
    return min(0.2 * g.h_min() ** 2, 0.8 * max_stable_dt(g, alpha))


def _step(m, t, dt, p, k, mode):
    k1 = llg_rhs(m, t, p, k, mode)
    k2 = llg_rhs(m + 0.5 * dt * k1, t + 0.5 * dt, p, k, mode)
    k3 = llg_rhs(m + 0.5 * dt * k2, t + 0.5 * dt, p, k, mode)
    k4 = llg_rhs(m + dt * k3, t + dt, p, k, mode)
    return m + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _steps_for(t0, t1, dt):
    span = t1 - t0
    if span < 0:
        raise ValueError("t1 must not precede t0")
    if span == 0:
        return 0, dt
    n = max(1, math.ceil(span / dt * (1 - 1e-12)))
    return n, span / n


def flow(m0, t0: float, t1: float, p: SimParams, k: DemagKernel, dt: float, mode="full"):
    """Time-t1 state from m0 at t0; returns ``(m, max raw drift)``."""
    nsteps, dt = _steps_for(t0, t1, dt)
    if dt > max_stable_dt(k.grid, p.alpha, mode) * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3e} exceeds the stability bound")
    m = np.array(m0, dtype=float)
    raw = 0.0
    for j in range(nsteps):
        t = t0 + j * dt
        m_new = _step(m, t, dt, p, k, mode)
        nrm = np.linalg.norm(m_new, axis=1)
        if not np.all(np.isfinite(nrm)):
            raise IntegrationError("non-finite field", t)
        raw = max(raw, float(np.max(np.abs(nrm - 1.0))))
        m = m_new / nrm[:, None]
    return m, raw


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    energy_series: np.ndarray
    raw_drift_series: np.ndarray
    post_drift_series: np.ndarray
    mean_m: np.ndarray = field(repr=False, default=None)

    def rows(self):
        for i, t in enumerate(self.times):
            yield (t, self.energy_series[i], *self.mean_m[i],
                   self.raw_drift_series[i], self.post_drift_series[i])


def evolve(
    m0,
    t0: float,
    t1: float,
    p: SimParams,
    k: DemagKernel,
    dt: float | None = None,
    sample_every: int = 1,
    keep_snapshots: bool = False,
    mode: str = "full",
    callback=None,
) -> Trajectory:
    """Projected RK4 integration from ``t0`` to ``t1``.

    Every ``sample_every`` steps the energy, mean magnetization and the raw
    (pre-renormalization) and post drifts are recorded.  ``dt`` is shrunk
    so that it divides ``t1 - t0`` exactly.
    """
    g = k.grid
    m = check_field(m0, g).copy()
    check_unit(m)
    if dt is None:
        dt = default_dt(g, p.alpha)
    bound = max_stable_dt(g, p.alpha, mode)
    if dt > bound * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3e} exceeds the RK4 stability bound {bound:.3e}")
    nsteps, dt = _steps_for(t0, t1, dt)

    def post(m):
        return float(np.max(np.abs(np.linalg.norm(m, axis=1) - 1.0)))

    times, snaps, ens, raws, posts, means = [t0], [], [], [0.0], [post(m)], [m.mean(axis=0)]
    ens.append(energy(m, p, t0, k))
    if keep_snapshots:
        snaps.append(m.copy())
    raw_since = 0.0
    for j in range(nsteps):
        t = t0 + j * dt
        m_new = _step(m, t, dt, p, k, mode)
        nrm = np.linalg.norm(m_new, axis=1)
        if not np.all(np.isfinite(nrm)):
            raise IntegrationError("non-finite field during integration", t)
        raw_since = max(raw_since, float(np.max(np.abs(nrm - 1.0))))
        m = m_new / nrm[:, None]
        tn = t0 + (j + 1) * dt
        if (j + 1) % sample_every == 0 or j + 1 == nsteps:
            times.append(tn)
            ens.append(energy(m, p, tn, k))
            raws.append(raw_since)
            posts.append(post(m))
            means.append(m.mean(axis=0))
            raw_since = 0.0
            if keep_snapshots:
                snaps.append(m.copy())
            if callback is not None:
                callback(tn, m.copy())
    return Trajectory(
        np.array(times), snaps, np.array(ens), np.array(raws), np.array(posts), np.array(means)
    )


def norm_drift(traj: Trajectory) -> tuple[float, float]:
    """(max raw drift before renormalization, max drift after it)."""
    if len(traj.times) <= 1:
        return 0.0, 0.0
    return float(traj.raw_drift_series.max()), float(traj.post_drift_series.max())
