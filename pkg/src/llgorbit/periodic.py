"""Periodic orbits of the forced LLG flow by shooting on the Poincare map.

The period map ``u -> m(T, u, lambda)`` is integrated with a step that
divides ``T`` exactly.  Fixed points on the sphere-valued fields are found
by Newton's method in tangent-frame coordinates around the seed, with
finite-difference Jacobian-vector products and GMRES, and every iterate is
renormalized back onto the sphere.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigs, gmres

from .demag import DemagKernel, demag_tensor, shape_condition
from .energy import SimParams, energy
from .grid import check_field, check_unit, normalize, norm_l2
from .linop import DENSE_CAP, SpectrumReport, TangentFrame, spectrum
from .llg import default_dt, flow, llg_rhs

__all__ = [
    "ShapeConditionError",
    "ShootingError",
    "ShootOptions",
    "PeriodicOrbit",
    "Branch",
    "period_dt",
    "poincare_map",
    "monodromy",
    "monodromy_eigs",
    "shoot",
    "continuation",
    "orbit_diagnostics",
]

log = logging.getLogger(__name__)


class ShapeConditionError(ValueError):
    """The smallest demagnetizing factor is not simple; shooting is refused."""

    def __init__(self, margin: float, gap_tol: float, eigvals):
        super().__init__(
            f"shape condition violated: lambda2 - lambda1 = {margin:.3e} <= {gap_tol:.1e} "
            f"(demag eigenvalues {np.array2string(np.asarray(eigvals), precision=5)})"
        )
        self.margin = margin
        self.eigvals = np.asarray(eigvals)


class ShootingError(RuntimeError):
    """Newton shooting did not converge; carries the best iterate."""

    def __init__(self, msg, best=None, lam=None):
        super().__init__(msg)
        self.best = best
        self.lam = lam


@dataclass
class ShootOptions:
    tol: float = 1e-8
    max_iter: int = 20
    stagnation: int = 5
    fd_eps: float = 1e-6
    krylov_rtol: float = 1e-4
    krylov_maxiter: int = 60
    dt: float | None = None
    gap_tol: float = 1e-3
    # spectral clearance of the linearization; computed on demand if None
    clearance: SpectrumReport | None = None
    waive_clearance: bool = False
    diagnostics: bool = True


@dataclass
class PeriodicOrbit:
    initial: np.ndarray = field(repr=False)
    lam: float
    period: float
    residual: float
    newton_iters: int
    motion: float = float("nan")
    energy_min: float = float("nan")
    energy_max: float = float("nan")
    residual_history: list = field(default_factory=list)


def period_dt(p: SimParams, k: DemagKernel, dt: float | None = None) -> tuple[int, float]:
    """Step count and step size dividing the period exactly."""
    dt = dt or default_dt(k.grid, p.alpha)
    n = max(1, math.ceil(p.period / dt * (1 - 1e-12)))
    return n, p.period / n


def poincare_map(u, lam: float, p: SimParams, k: DemagKernel, dt: float | None = None,
                 period: float | None = None) -> np.ndarray:
    """m(T, u, lambda): integrate one period starting at t = 0."""
    u = check_field(u, k.grid)
    check_unit(u)
    T = p.period if period is None else period
    if T == 0:
        return u.copy()
    q = p.with_(lam=lam, period=T)
    n, step = period_dt(q, k, dt)
    m, _ = flow(u, 0.0, T, q, k, step)
    return m


def _retract(base, frame, xi):
    return normalize(base + frame.to_field(xi))


def monodromy(m, p: SimParams, k: DemagKernel, frame: TangentFrame | None = None,
              eps: float = 1e-6, dt: float | None = None) -> np.ndarray:
    """Dense FD differential of the period map at m (lambda = 0)."""
    frame = frame or TangentFrame(m)
    n = frame.dim
    if n > DENSE_CAP:
        raise ValueError(f"dense monodromy of size {n} exceeds the cap {DENSE_CAP}")
    base = poincare_map(m, 0.0, p, k, dt)
    M = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = eps
        M[:, j] = frame.coords(poincare_map(_retract(m, frame, e), 0.0, p, k, dt) - base) / eps
    return M


def monodromy_eigs(m, p: SimParams, k: DemagKernel, n_eigs: int = 6, eps: float = 1e-6,
                   dt: float | None = None, frame: TangentFrame | None = None) -> np.ndarray:
    """Largest-modulus monodromy eigenvalues by matrix-free Arnoldi."""
    frame = frame or TangentFrame(m)
    base = poincare_map(m, 0.0, p, k, dt)

    def matvec(v):
        v = np.asarray(v, dtype=float).ravel()
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.zeros_like(v)
        h = eps / nv
        return frame.coords(poincare_map(_retract(m, frame, h * v), 0.0, p, k, dt) - base) / h

    op = LinearOperator((frame.dim, frame.dim), matvec=matvec, dtype=float)
    v0 = np.ones(frame.dim) / math.sqrt(frame.dim)
    return eigs(op, k=n_eigs, which="LM", v0=v0, tol=1e-10, return_eigenvectors=False)


def _check_shape(k: DemagKernel, gap_tol: float):
    d = demag_tensor(k)
    verdict = shape_condition(d, gap_tol)
    if not verdict.satisfied:
        raise ShapeConditionError(verdict.margin, gap_tol, d.eigvals)
    return d


def orbit_diagnostics(u, lam: float, p: SimParams, k: DemagKernel, dt: float | None = None):
    """Motion proxy max_t ||m_t||_{L2} and energy range over one period."""
    q = p.with_(lam=lam)
    n, step = period_dt(q, k, dt)
    g = k.grid
    m = u.copy()
    motion = 0.0
    energies = []
    for j in range(n + 1):
        t = j * step
        motion = max(motion, norm_l2(llg_rhs(m, t, q, k), g))
        energies.append(energy(m, q, t, k))
        if j < n:
            m, _ = flow(m, t, t + step, q, k, step)
    return motion, min(energies), max(energies)


def shoot(lam: float, init, p: SimParams, k: DemagKernel, opts: ShootOptions | None = None) -> PeriodicOrbit:
    """Damped Newton-Krylov solve of m(T, u, lambda) = u near ``init``."""
    opts = opts or ShootOptions()
    g = k.grid
    init = check_field(init, g)
    check_unit(init)
    if abs(p.field_spec.period - p.period) > 1e-12 * p.period:
        raise ValueError("the applied field period must equal the shooting period")
    _check_shape(k, opts.gap_tol)
    if not opts.waive_clearance:
        rep = opts.clearance or spectrum(init, p.with_(lam=0.0), k)
        if not rep.clear:
            raise ShootingError(
                f"spectral clearance fails: min |Re mu| = {rep.min_abs_real:.3e}", lam=lam
            )

    frame = TangentFrame(init)
    V = g.cell_volume

    def F(xi):
        u = _retract(init, frame, xi)
        d = poincare_map(u, lam, p, k, opts.dt) - u
        return frame.coords(d), math.sqrt(float(np.sum(d * d)) * V)

    xi = np.zeros(frame.dim)
    Fx, res = F(xi)
    history = [res]
    best = (res, xi.copy())
    since_best = 0
    it = 0
    while res > opts.tol:
        if it >= opts.max_iter:
            raise ShootingError(
                f"no convergence in {it} Newton iterations (residual {res:.3e})",
                best=_retract(init, frame, best[1]), lam=lam,
            )
        it += 1

        def jv(v, xi=xi, Fx=Fx):
            v = np.asarray(v, dtype=float).ravel()
            nv = np.linalg.norm(v)
            if nv == 0:
                return np.zeros_like(v)
            h = opts.fd_eps * max(1.0, np.linalg.norm(xi)) / nv
            return (F(xi + h * v)[0] - Fx) / h

        J = LinearOperator((frame.dim, frame.dim), matvec=jv, dtype=float)
        delta, info = gmres(J, -Fx, rtol=opts.krylov_rtol, atol=0.0, restart=opts.krylov_maxiter,
                            maxiter=1)
        if not np.all(np.isfinite(delta)):
            raise ShootingError("Krylov solve produced non-finite step", lam=lam)
        step = 1.0
        for _ in range(6):
            try:
                F_new, res_new = F(xi + step * delta)
            except (ArithmeticError, RuntimeError):
                res_new = math.inf
            if res_new < res:
                break
            step *= 0.5
        if res_new < res:
            xi = xi + step * delta
            Fx, res = F_new, res_new
        history.append(res)
        log.info("newton %d: residual %.3e (step %.3g, gmres info %d)", it, res, step, info)
        if res < best[0] * (1 - 1e-3):
            best = (res, xi.copy())
            since_best = 0
        else:
            since_best += 1
            if since_best >= opts.stagnation:
                raise ShootingError(
                    f"Newton stagnated at residual {best[0]:.3e}",
                    best=_retract(init, frame, best[1]), lam=lam,
                )

    u = _retract(init, frame, xi)
    orbit = PeriodicOrbit(u, lam, p.period, res, it, residual_history=history)
    if opts.diagnostics:
        orbit.motion, orbit.energy_min, orbit.energy_max = orbit_diagnostics(u, lam, p, k, opts.dt)
    return orbit


@dataclass
class Branch:
    orbits: list
    failed_lambda: float | None = None
    failure: str | None = None


def continuation(lambdas, p: SimParams, k: DemagKernel, m_eta, opts: ShootOptions | None = None) -> Branch:
    """Natural-parameter continuation from the stationary state at lambda = 0."""
    lambdas = [float(x) for x in lambdas]
    if not lambdas or lambdas[0] != 0.0:
        raise ValueError("continuation must start at lambda = 0")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be increasing")
    opts = opts or ShootOptions()
    if opts.clearance is None and not opts.waive_clearance:
        _check_shape(k, opts.gap_tol)
        opts = ShootOptions(**{**opts.__dict__, "clearance": spectrum(m_eta, p.with_(lam=0.0), k)})
    orbits = []
    seed = m_eta
    for i, lam in enumerate(lambdas):
        try:
            orbit = shoot(lam, seed, p, k, opts)
        except (ShootingError, ArithmeticError, RuntimeError) as exc:
            if i == 0:
                raise
            log.warning("branch lost at lambda = %g: %s", lam, exc)
            return Branch(orbits, lam, str(exc))
        orbits.append(orbit)
        seed = orbit.initial
    return Branch(orbits)
