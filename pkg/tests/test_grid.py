import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llgorbit.grid import (
    GridMismatchError,
    ShapeError,
    ShapeSpec,
    SnapshotError,
    build_grid,
    exchange_norm_sq,
    inner_l2,
    laplacian_matrix,
    laplacian_neumann,
    mean_fluct_split,
    norm_l2,
    poincare_constant,
    read_snapshot,
    write_snapshot,
)


def test_unit_cube_grid():
    g = build_grid(ShapeSpec("cuboid"), 8)
    assert g.mask.all()
    assert g.cell_volume == (1 / 8) ** 3
    assert g.interior_count == 512


def test_ellipsoid_discrete_volume_close_to_analytic():
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 16)
    # raw masked volume vs the analytic unit volume, before spacing rescaling
    assert 0.98 <= g.raw_volume <= 1.02
    assert g.volume == pytest.approx(1.0, abs=1e-12)


def test_aspect_proportional_resolution_gives_cubic_cells():
    g = build_grid(ShapeSpec("cuboid", (2, 1, 0.5)), (16, 8, 4))
    assert g.h[0] == pytest.approx(g.h[1], rel=1e-14)
    assert g.h[1] == pytest.approx(g.h[2], rel=1e-14)
    assert g.volume == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize(
    "kind, aspect",
    [("cuboid", (1, 0, 1)), ("ellipsoid", (1, -1, 1)), ("prism", (1, 1, 1)), ("cuboid", (1, 1))],
)
def test_degenerate_shapes_rejected(kind, aspect):
    with pytest.raises(ShapeError):
        ShapeSpec(kind, aspect)


def test_resolution_too_small():
    with pytest.raises(ShapeError):
        build_grid(ShapeSpec("cuboid"), (1, 4, 4))


def test_laplacian_of_constant_is_zero():
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 8)
    out = laplacian_neumann(g.constant((0.3, -0.1, 0.9)), g)
    assert np.all(out == 0.0)


def test_laplacian_second_order_on_neumann_eigenfunction():
    errors = []
    for n in (8, 16, 32):
        g = build_grid(ShapeSpec("cuboid"), n)
        x = g.centers[:, 0] + 0.5
        m = np.stack([np.cos(np.pi * x), np.sin(np.pi * x), 0 * x], axis=1)
        # cos(pi x) is a Neumann eigenfunction; sin(pi x) is not, so check the first component
        err = laplacian_neumann(m, g)[:, 0] + np.pi**2 * m[:, 0]
        errors.append(np.abs(err).max())
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(rates > 1.9), rates


def test_mirror_ghost_gives_zero_boundary_flux():
    g = build_grid(ShapeSpec("cuboid", (1, 1, 1)), (2, 4, 4))
    m = np.zeros((g.interior_count, 3))
    m[:, 0] = np.where(g.cells[:, 0] == 0, -1.0, 1.0)
    lap = laplacian_neumann(m, g)
    # the only coupling along x is the interior face between the two layers
    expected = np.where(g.cells[:, 0] == 0, 2.0, -2.0) / g.h[0] ** 2
    np.testing.assert_allclose(lap[:, 0], expected)


def test_laplacian_rejects_wrong_grid():
    g = build_grid(ShapeSpec("cuboid"), 4)
    with pytest.raises(GridMismatchError):
        laplacian_neumann(np.zeros((10, 3)), g)


def test_inner_product_examples(rng):
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 8)
    e1, e2 = g.constant((1, 0, 0)), g.constant((0, 1, 0))
    assert inner_l2(e1, e1, g) == pytest.approx(1.0, abs=1e-12)
    assert inner_l2(e1, e2, g) == 0.0
    u, v = rng.standard_normal((2, g.interior_count, 3))
    brute = 0.0
    for a, b in zip(u, v):
        brute += (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) * g.cell_volume
    assert inner_l2(u, v, g) == pytest.approx(brute, rel=1e-12)


def test_mean_fluct_split(rng):
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 8)
    c = np.array([0.2, -0.4, 0.7])
    mean, fl = mean_fluct_split(g.constant(c), g)
    np.testing.assert_allclose(mean, c, atol=1e-15)
    assert np.abs(fl).max() < 1e-14
    u = rng.standard_normal((g.interior_count, 3))
    mean, fl = mean_fluct_split(u, g)
    assert np.abs(fl.mean(axis=0)).max() <= 1e-13
    assert abs(inner_l2(g.constant(mean), fl, g)) <= 1e-13
    mean2, fl2 = mean_fluct_split(fl, g)
    np.testing.assert_allclose(fl2, fl, atol=1e-14)


@pytest.fixture(scope="module")
def small_ellipsoid():
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 6)
    return g, poincare_constant(g)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), smooth=st.booleans())
def test_poincare_inequality(small_ellipsoid, seed, smooth):
    g, C = small_ellipsoid
    r = np.random.default_rng(seed)
    if smooth:
        x = g.centers
        u = np.stack([np.cos(r.normal() * x[:, 0] + r.normal()) for _ in range(3)], axis=1)
    else:
        u = r.standard_normal((g.interior_count, 3))
    _, fl = mean_fluct_split(u, g)
    assert norm_l2(fl, g) ** 2 <= C * exchange_norm_sq(u, g) * (1 + 1e-10)


def test_poincare_constant_is_attained():
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 6)
    C = poincare_constant(g)
    w, v = np.linalg.eigh(-laplacian_matrix(g).toarray())
    u = np.zeros((g.interior_count, 3))
    u[:, 0] = v[:, 1]
    _, fl = mean_fluct_split(u, g)
    assert norm_l2(fl, g) ** 2 == pytest.approx(C * exchange_norm_sq(u, g), rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_laplacian_symmetric_negative_semidefinite(seed):
    g = build_grid(ShapeSpec("ellipsoid", (1.5, 1, 0.7)), 6)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal((2, g.interior_count, 3))
    a = inner_l2(laplacian_neumann(u, g), v, g)
    b = inner_l2(u, laplacian_neumann(v, g), g)
    assert abs(a - b) <= 1e-12 * (abs(a) + 1)
    assert inner_l2(laplacian_neumann(u, g), u, g) <= 0.0
    assert exchange_norm_sq(u, g) == pytest.approx(-inner_l2(laplacian_neumann(u, g), u, g), rel=1e-12)


@pytest.mark.parametrize("shape", [ShapeSpec("ellipsoid", (2, 1, 1)), ShapeSpec("cuboid", (1, 2, 3))])
def test_laplacian_kernel_is_constants(shape):
    g = build_grid(shape, 6)
    w = np.linalg.eigvalsh(laplacian_matrix(g).toarray())
    scale = np.abs(w).max()
    assert np.sum(np.abs(w) < 1e-10 * scale) == 1


def test_sparse_matrix_matches_stencil(rng):
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), 6)
    u = rng.standard_normal((g.interior_count, 3))
    np.testing.assert_allclose(laplacian_matrix(g) @ u, laplacian_neumann(u, g), atol=1e-10)


def test_snapshot_roundtrip(tmp_path, rng):
    g = build_grid(ShapeSpec("ellipsoid", (2, 1, 1)), (7, 5, 6))
    m = rng.standard_normal((g.interior_count, 3))
    path = tmp_path / "f.magf"
    write_snapshot(path, m, g)
    mask, values = read_snapshot(path, g)
    assert np.array_equal(mask, g.mask)
    assert np.array_equal(values, m)
    raw = path.read_bytes()
    assert raw[:4] == b"MAGF"
    assert np.frombuffer(raw[4:20], "<u4").tolist() == [1, 7, 5, 6]
    # mask bits are x-fastest: bit 0 is cell (0,0,0), bit 1 is (1,0,0)
    bits = np.unpackbits(np.frombuffer(raw[20:], np.uint8), bitorder="little")
    assert bits[1] == g.mask[1, 0, 0] and bits[7] == g.mask[0, 1, 0]


def test_snapshot_ordering_is_mask_order(tmp_path):
    g = build_grid(ShapeSpec("cuboid"), (3, 2, 2))
    m = np.zeros((g.interior_count, 3))
    m[:, 0] = np.arange(g.interior_count)
    np.testing.assert_array_equal(g.cells[:4], [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]])


@pytest.mark.parametrize("damage", ["magic", "truncate", "version"])
def test_corrupted_snapshot(tmp_path, damage):
    g = build_grid(ShapeSpec("cuboid"), 3)
    path = tmp_path / "f.magf"
    write_snapshot(path, g.constant((1, 0, 0)), g)
    raw = bytearray(path.read_bytes())
    if damage == "magic":
        raw[:4] = b"XXXX"
    elif damage == "truncate":
        raw = raw[:-5]
    else:
        raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError):
        read_snapshot(path)


def test_snapshot_grid_mismatch(tmp_path):
    g = build_grid(ShapeSpec("cuboid"), 3)
    path = tmp_path / "f.magf"
    write_snapshot(path, g.constant((1, 0, 0)), g)
    with pytest.raises(SnapshotError):
        read_snapshot(path, build_grid(ShapeSpec("ellipsoid"), 3))
