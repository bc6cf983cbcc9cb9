"""Invariant battery run by ``llgorbit check``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .demag import build_kernel, demag_tensor, shape_condition, stray_field, stray_energy
from .energy import effective_field, energy
from .grid import build_grid, exchange_norm_sq, inner_l2, laplacian_neumann, norm_l2, normalize
from .linop import DENSE_CAP, coercivity_probe, random_tangent, spectrum, tangent_check, test_function_w
from .llg import evolve
from .minimize import minimize

__all__ = ["CheckItem", "rng_for", "run_check_suite", "format_report"]


@dataclass
class CheckItem:
    name: str
    status: str  # pass | fail | xfail (expected failure)
    value: float
    threshold: float
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "xfail")


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; ``stream`` selects an independent sub-sequence."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, stream]))


def _item(name, value, threshold, ok, note=""):
    return CheckItem(name, "pass" if ok else "fail", float(value), float(threshold), note)


def run_check_suite(cfg: RunConfig, n_random: int = 10) -> list[CheckItem]:
    g = build_grid(cfg.shape, cfg.resolution)
    k = build_kernel(g)
    p = cfg.params.with_(lam=0.0)
    N = g.interior_count
    items = []

    rng = rng_for(cfg.seed, 1)
    worst = 0.0
    for _ in range(n_random):
        u, v = rng.standard_normal((2, N, 3))
        a = inner_l2(stray_field(u, k), v, g)
        b = inner_l2(u, stray_field(v, k), g)
        worst = max(worst, abs(a - b) / (norm_l2(u, g) * norm_l2(v, g)))
    items.append(_item("stray_field_symmetry", worst, 1e-12, worst <= 1e-12))

    e_min = min(stray_energy(rng.standard_normal((N, 3)), k) for _ in range(n_random))
    items.append(_item("stray_energy_nonnegative", e_min, -1e-12, e_min >= -1e-12))

    d = demag_tensor(k)
    items.append(_item("demag_trace_rule", d.trace_defect, 1e-2, d.trace_defect <= 1e-2))

    verdict = shape_condition(d, cfg.tolerances.gap)
    status = "pass" if verdict.satisfied else "xfail"
    items.append(CheckItem("shape_condition", status, verdict.margin, cfg.tolerances.gap,
                           verdict.verdict))

    u, v = rng.standard_normal((2, N, 3))
    sym = abs(inner_l2(laplacian_neumann(u, g), v, g) - inner_l2(u, laplacian_neumann(v, g), g))
    sym /= norm_l2(u, g) * norm_l2(v, g) * max(1.0, 4 * sum(1 / h**2 for h in g.h))
    items.append(_item("laplacian_symmetry", sym, 1e-13, sym <= 1e-13))
    neg = inner_l2(laplacian_neumann(u, g), u, g)
    items.append(_item("laplacian_nonpositive", neg, 0.0, neg <= 0.0))

    m = normalize(g.constant(d.eigvecs[:, 0]) + 0.1 * rng.standard_normal((N, 3)))
    H = effective_field(m, p, 0.0, k)
    eps, worst = 1e-6, 0.0
    for _ in range(3):
        w = rng.standard_normal((N, 3))
        dE = (energy(m + eps * w, p, 0.0, k, constrained=False)
              - energy(m - eps * w, p, 0.0, k, constrained=False)) / (2 * eps)
        worst = max(worst, abs(inner_l2(w, H, g) + 0.5 * dE))
    items.append(_item("energy_gradient", worst, 1e-6, worst <= 1e-6))

    res = minimize(p, g, k, tol=cfg.tolerances.minimize)
    items.append(_item("minimizer_el_residual", res.el_residual_norm, cfg.tolerances.minimize,
                       res.converged))

    m0 = normalize(rng.standard_normal((N, 3)))
    traj = evolve(m0, 0.0, 0.02, p, k)
    rise = float(np.max(np.diff(traj.energy_series))) if len(traj.times) > 1 else 0.0
    items.append(_item("energy_decay", rise, 1e-10, rise <= 1e-10))

    worst = max(tangent_check(random_tangent(res.m, rng), res.m, p, k) for _ in range(3))
    items.append(_item("linearization_tangent", worst, 1e-6, worst <= 1e-6))

    u = rng.standard_normal((N, 3))
    w = test_function_w(u)
    pw = float(np.max(np.abs(np.einsum("ij,ij->i", u, w))))
    items.append(_item("w_orthogonal", pw, 1e-15, pw <= 1e-15))
    gw = abs(inner_l2(laplacian_neumann(u, g), w, g)) / exchange_norm_sq(u, g)
    items.append(_item("w_gradient_orthogonal", gw, 1e-12, gw <= 1e-12))

    if 2 * N <= DENSE_CAP and verdict.satisfied:
        rep = spectrum(res.m, p, k)
        items.append(_item("spectral_clearance", rep.min_abs_real, cfg.tolerances.clearance,
                           rep.min_abs_real > cfg.tolerances.clearance))
        probes = [coercivity_probe(random_tangent(res.m, rng), res.m, p, k) for _ in range(n_random)]
        worst = min(q.q1 + q.q2 for q in probes)
        items.append(_item("coercivity_positive", worst, 0.0, worst > 0))
    return items


def format_report(items: list[CheckItem]) -> str:
    lines = [f"{it.name}: {it.status.upper()} value={it.value!r} threshold={it.threshold!r}"
             + (f" ({it.note})" if it.note else "") for it in items]
    ok = all(it.ok for it in items)
    lines.append(f"overall={'PASS' if ok else 'FAIL'}")
    return "\n".join(lines)
