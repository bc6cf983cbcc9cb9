"""Rescaled micromagnetic energy, effective field and criticality residual."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .demag import DemagKernel, stray_field
from .grid import check_field, check_unit, exchange_norm_sq, inner_l2, laplacian_neumann, norm_l2

__all__ = [
    "ConfigError",
    "ExternalFieldSpec",
    "SimParams",
    "EnergyParts",
    "external_field",
    "energy",
    "energy_parts",
    "effective_field",
    "tangent_project",
    "el_residual",
]


class ConfigError(ValueError):
    pass


# phase quantum for exact periodicity of h(t): t and t + T land on the same phase
_PHASE_BITS = 2.0**36


@dataclass(frozen=True)
class ExternalFieldSpec:
    """Spatially uniform, time-periodic applied field direction(s).

    ``uniform_oscillating``: ``amplitude * cos(2 pi t / T) * u``.
    ``uniform_rotating``: ``amplitude * (cos(2 pi t / T) u + sin(2 pi t / T) v)``.
    """

    kind: str = "uniform_rotating"
    u: tuple[float, float, float] = (0.0, 1.0, 0.0)
    v: tuple[float, float, float] = (0.0, 0.0, 1.0)
    period: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform_oscillating", "uniform_rotating"):
            raise ConfigError(f"unknown field kind {self.kind!r}")
        if not self.period > 0:
            raise ConfigError("field period must be positive")
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if abs(np.linalg.norm(u) - 1) > 1e-12:
            raise ConfigError("field direction u must be a unit vector")
        if self.kind == "uniform_rotating":
            if abs(np.linalg.norm(v) - 1) > 1e-12 or abs(u @ v) > 1e-12:
                raise ConfigError("rotating field needs an orthonormal pair (u, v)")
        object.__setattr__(self, "u", tuple(float(x) for x in u))
        object.__setattr__(self, "v", tuple(float(x) for x in v))

    def phase(self, t: float) -> float:
        s = math.fmod(float(t) / self.period, 1.0)
        if s < 0:
            s += 1.0
        s = round(s * _PHASE_BITS) / _PHASE_BITS
        return 0.0 if s == 1.0 else s


def external_field(t: float, spec: ExternalFieldSpec) -> np.ndarray:
    theta = 2 * math.pi * spec.phase(t)
    u = np.array(spec.u)
    if spec.kind == "uniform_oscillating":
        return spec.amplitude * math.cos(theta) * u
    return spec.amplitude * (math.cos(theta) * u + math.sin(theta) * np.array(spec.v))


@dataclass(frozen=True)
class SimParams:
    eta: float
    alpha: float = 0.0
    lam: float = 0.0
    period: float = 1.0
    field_spec: ExternalFieldSpec = field(default_factory=ExternalFieldSpec)

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period}")

    def with_(self, **changes) -> SimParams:
        return replace(self, **changes)

    def applied(self, t: float) -> np.ndarray:
        """lambda * h(t) as a 3-vector."""
        if self.lam == 0.0:
            return np.zeros(3)
        return self.lam * external_field(t, self.field_spec)


class EnergyParts(NamedTuple):
    exchange: float
    stray: float
    zeeman: float

    @property
    def total(self) -> float:
        return self.exchange + self.stray + self.zeeman


def energy_parts(m, p: SimParams, t: float, k: DemagKernel, H=None,
                 constrained: bool = True) -> EnergyParts:
    g = k.grid
    m = check_field(m, g)
    if constrained:
        check_unit(m)
    if H is None:
        H = stray_field(m, k)
    exch = exchange_norm_sq(m, g)
    stray = -p.eta**2 * inner_l2(H, m, g)
    zeeman = -2 * p.eta**2 * float(np.sum(m @ p.applied(t)) * g.cell_volume)
    return EnergyParts(exch, stray, zeeman)


def energy(m, p: SimParams, t: float, k: DemagKernel, constrained: bool = True) -> float:
    """||grad m||^2 + eta^2 int|H[m]|^2 - 2 eta^2 lambda <h(t), m>.

    ``constrained=False`` evaluates the same functional off the sphere
    (difference-quotient checks).
    """
    return energy_parts(m, p, t, k, constrained=constrained).total


def effective_field(m, p: SimParams, t: float, k: DemagKernel) -> np.ndarray:
    g = k.grid
    m = check_field(m, g)
    return laplacian_neumann(m, g) + p.eta**2 * (stray_field(m, k) + p.applied(t))


def tangent_project(v: np.ndarray, m: np.ndarray) -> np.ndarray:
    """-m x (m x v) = v - (m.v) m, cellwise."""
    return v - np.einsum("ij,ij->i", m, v)[:, None] * m


def el_residual(m, p: SimParams, k: DemagKernel) -> tuple[np.ndarray, float]:
    """Tangential part of Lap m + eta^2 H[m] and its L2 norm (lambda ignored)."""
    g = k.grid
    m = check_field(m, g)
    check_unit(m)
    r = tangent_project(laplacian_neumann(m, g) + p.eta**2 * stray_field(m, k), m)
    return r, norm_l2(r, g)
