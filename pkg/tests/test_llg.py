import math

import numpy as np
import pytest

import llgorbit.llg as llg
from llgorbit.energy import SimParams, effective_field, energy, tangent_project
from llgorbit.grid import normalize
from llgorbit.llg import (
    IntegrationError,
    StepSizeError,
    default_dt,
    evolve,
    flow,
    llg_rhs,
    max_stable_dt,
    norm_drift,
    rk4_stability_radius,
)

from conftest import ROTATING


def smooth_perturbation(g, amp):
    x, y, z = g.centers.T
    return amp * np.stack([np.sin(3 * y + 1), np.cos(2 * x - z), np.sin(x + 2 * y * z)], axis=1)


def test_rk4_stability_radii():
    # real-axis bound of the classical scheme and the imaginary-axis bound 2 sqrt 2
    assert rk4_stability_radius(math.pi) == pytest.approx(2.785293563405282, rel=1e-12)
    assert rk4_stability_radius(math.pi / 2) == pytest.approx(2 * math.sqrt(2), rel=1e-12)


def test_stability_bound_shrinks_with_damping(prolate5):
    g, _ = prolate5
    assert max_stable_dt(g, 1.0) < max_stable_dt(g, 0.0)
    assert max_stable_dt(g, 0.0, mode="precession") == math.inf
    assert default_dt(g, 1.0) <= 0.8 * max_stable_dt(g, 1.0)


@pytest.mark.parametrize("alpha", [0.0, 0.7])
def test_rhs_matches_projected_effective_field(prolate5, rng, alpha):
    g, k = prolate5
    p = SimParams(0.3, alpha=alpha, lam=0.4, field_spec=ROTATING)
    m = normalize(g.constant((1, 0, 0)) + 0.3 * rng.standard_normal((g.interior_count, 3)))
    H = effective_field(m, p, 0.2, k)
    expected = tangent_project(H, m) + alpha * np.cross(m, H)
    rhs = llg_rhs(m, 0.2, p, k)
    np.testing.assert_allclose(rhs, expected, atol=1e-10 * np.abs(expected).max())
    assert np.abs(np.einsum("ij,ij->i", rhs, m)).max() < 1e-10 * np.abs(rhs).max()


def test_precession_rhs(prolate5, rng):
    g, k = prolate5
    p = SimParams(0.3, alpha=0.5)
    m = normalize(rng.standard_normal((g.interior_count, 3)))
    np.testing.assert_allclose(
        llg_rhs(m, 0.0, p, k, mode="precession"), 0.5 * np.cross(m, effective_field(m, p, 0.0, k)), atol=1e-12
    )
    with pytest.raises(ValueError):
        llg_rhs(m, 0.0, p, k, mode="other")


def test_flow_commutes_with_rotation_about_long_axis(prolate8, rng):
    g, k = prolate8
    n = g.n[1]
    assert g.n[1] == g.n[2] and g.h[1] == g.h[2]
    # R: (x, y, z) -> (x, -z, y), a 90 degree rotation about e1
    R = np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
    i, j, l = g.cells.T
    perm = g.index[i, n - 1 - l, j]

    def rotate(m):
        out = np.empty_like(m)
        out[perm] = m @ R.T
        return out

    p = SimParams(0.2, alpha=0.5)
    m0 = normalize(g.constant((1, 0, 0)) + 0.2 * rng.standard_normal((g.interior_count, 3)))
    dt = default_dt(g, p.alpha)
    a, _ = flow(m0, 0.0, 20 * dt, p, k, dt)
    b, _ = flow(rotate(m0), 0.0, 20 * dt, p, k, dt)
    np.testing.assert_allclose(rotate(a), b, atol=1e-12)


def test_minimizer_is_stationary(prolate8, m_eta8):
    g, k = prolate8
    p = SimParams(0.1, alpha=1.0)
    m, _ = flow(m_eta8, 0.0, 0.25, p, k, default_dt(g, 1.0))
    assert np.sqrt(np.sum((m - m_eta8) ** 2) * g.cell_volume) <= 1e-8


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_energy_non_increasing(prolate5, rng, alpha):
    g, k = prolate5
    p = SimParams(0.2, alpha=alpha)
    for _ in range(3):
        m0 = normalize(rng.standard_normal((g.interior_count, 3)))
        tr = evolve(m0, 0.0, 0.01, p, k)
        assert np.all(np.diff(tr.energy_series) <= 1e-10)
        assert tr.energy_series[-1] < tr.energy_series[0]


def test_precession_energy_converges_under_refinement(prolate5, m_eta5):
    g, k = prolate5
    p = SimParams(0.1, alpha=1.0)
    m0 = normalize(m_eta5 + smooth_perturbation(g, 0.05))
    e0 = energy(m0, p, 0.0, k)
    dt = default_dt(g, 1.0)
    errs = []
    for f in (1, 2, 4):
        m, _ = flow(m0, 0.0, 0.2, p, k, dt / f, mode="precession")
        errs.append(abs(energy(m, p, 0.2, k) - e0))
    assert errs[2] < errs[1] < errs[0]
    assert errs[0] / errs[2] > 16


def test_raw_drift_fourth_order(prolate5, m_eta5):
    g, k = prolate5
    p = SimParams(0.1, alpha=1.0)
    m0 = normalize(m_eta5 + smooth_perturbation(g, 0.1))
    dt = default_dt(g, 1.0)
    d1 = flow(m0, 0.0, 0.05, p, k, dt)[1]
    d2 = flow(m0, 0.0, 0.05, p, k, dt / 2)[1]
    assert d1 / d2 >= 12


def test_evolve_bookkeeping(prolate5, m_eta5):
    g, k = prolate5
    p = SimParams(0.1, alpha=1.0, lam=0.1, field_spec=ROTATING)
    dt = default_dt(g, 1.0)
    tr = evolve(m_eta5, 0.0, 10.5 * dt, p, k, dt=dt, sample_every=4, keep_snapshots=True)
    # 11 shrunken steps, samples at 4, 8 and the final step
    assert len(tr.times) == 4 and tr.times[-1] == pytest.approx(10.5 * dt, rel=1e-14)
    assert len(tr.snapshots) == 4
    raw, post = norm_drift(tr)
    assert post < 1e-14 and raw < 1e-6
    rows = list(tr.rows())
    assert len(rows) == 4 and len(rows[0]) == 7


def test_evolve_callback_and_zero_span(prolate5, m_eta5):
    g, k = prolate5
    seen = []
    tr = evolve(m_eta5, 0.0, 0.0, SimParams(0.1), k, callback=lambda t, m: seen.append(t))
    assert len(tr.times) == 1 and not seen
    evolve(m_eta5, 0.0, 0.001, SimParams(0.1), k, callback=lambda t, m: seen.append(t))
    assert seen and seen[-1] == pytest.approx(0.001)


def test_unstable_dt_refused(prolate5, m_eta5):
    g, k = prolate5
    dt = 1.5 * max_stable_dt(g, 0.0)
    with pytest.raises(StepSizeError):
        evolve(m_eta5, 0.0, 1.0, SimParams(0.1), k, dt=dt)
    with pytest.raises(StepSizeError):
        flow(m_eta5, 0.0, 1.0, SimParams(0.1), k, dt)


def test_non_finite_state_reports_last_good_time(prolate5, m_eta5, monkeypatch):
    g, k = prolate5
    real_rhs, calls = llg.llg_rhs, []

    def poisoned(m, t, p, k, mode="full"):
        calls.append(t)
        out = real_rhs(m, t, p, k, mode)
        # four evaluations per step: the sixth step goes bad
        return out * np.nan if len(calls) > 20 else out

    monkeypatch.setattr(llg, "llg_rhs", poisoned)
    dt = default_dt(g, 0.0)
    with np.errstate(all="ignore"), pytest.raises(IntegrationError) as exc:
        evolve(m_eta5, 0.0, 100 * dt, SimParams(0.1), k, dt=dt)
    assert exc.value.last_good_time == pytest.approx(5 * dt, rel=1e-12)


def test_negative_span_refused(prolate5, m_eta5):
    _, k = prolate5
    with pytest.raises(ValueError):
        evolve(m_eta5, 1.0, 0.0, SimParams(0.1), k)
