"""Masked uniform Cartesian grids, Neumann Laplacian and L2 calculus.

Fields are stored packed over the interior cells as ``(N, 3)`` float arrays,
ordered x-fastest (then y, then z).  All integrals use the cell volume as
quadrature weight; the particle is normalized to unit discrete volume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ShapeError",
    "GridMismatchError",
    "ConstraintError",
    "SnapshotError",
    "ShapeSpec",
    "Grid",
    "build_grid",
    "check_field",
    "check_unit",
    "normalize",
    "laplacian_neumann",
    "laplacian_matrix",
    "inner_l2",
    "norm_l2",
    "gradient_sq_density",
    "exchange_norm_sq",
    "mean_fluct_split",
    "poincare_constant",
    "write_snapshot",
    "read_snapshot",
]

UNIT_TOL = 1e-12
SNAPSHOT_MAGIC = b"MAGF"
SNAPSHOT_VERSION = 1


class ShapeError(ValueError):
    """Degenerate or unsupported particle geometry."""


class GridMismatchError(ValueError):
    """A field does not live on the grid it was used with."""


class ConstraintError(ValueError):
    """A field violates the saturation constraint |m| = 1."""


class SnapshotError(IOError):
    """Malformed or inconsistent binary field snapshot."""


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    aspect: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("cuboid", "ellipsoid"):
            raise ShapeError(f"unknown shape kind {self.kind!r}")
        aspect = tuple(float(a) for a in self.aspect)
        if len(aspect) != 3:
            raise ShapeError("aspect needs three entries")
        if not all(np.isfinite(a) and a > 0 for a in aspect):
            raise ShapeError(f"aspect entries must be positive, got {aspect}")
        object.__setattr__(self, "aspect", aspect)

    def extents(self) -> np.ndarray:
        """Side lengths (cuboid) or semi-axes (ellipsoid) at unit volume."""
        a = np.array(self.aspect)
        if self.kind == "cuboid":
            return a / np.prod(a) ** (1 / 3)
        return a / (4 / 3 * np.pi * np.prod(a)) ** (1 / 3)


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable masked grid; build with :func:`build_grid`."""

    shape: ShapeSpec
    n: tuple[int, int, int]
    h: tuple[float, float, float]
    mask: np.ndarray = field(repr=False)
    # discrete volume of the mask before spacings were rescaled
    raw_volume: float = 1.0

    def __post_init__(self):
        self.mask.setflags(write=False)

    @property
    def cell_volume(self) -> float:
        return self.h[0] * self.h[1] * self.h[2]

    @property
    def interior_count(self) -> int:
        return len(self.cells)

    @property
    def volume(self) -> float:
        return self.interior_count * self.cell_volume

    @cached_property
    def cells(self) -> np.ndarray:
        """(N, 3) integer cell indices in packed (x-fastest) order."""
        ijk = np.argwhere(self.mask.transpose(2, 1, 0))[:, ::-1]
        return np.ascontiguousarray(ijk)

    @cached_property
    def index(self) -> np.ndarray:
        """Full-box array mapping cell -> packed index, -1 outside."""
        idx = np.full(self.n, -1, dtype=np.int64)
        i, j, k = self.cells.T
        idx[i, j, k] = np.arange(len(self.cells))
        return idx

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(6, N) packed neighbor index per direction; self where the
        neighbor is outside the mask (mirror ghost cell)."""
        out = np.empty((6, self.interior_count), dtype=np.int64)
        own = np.arange(self.interior_count)
        padded = np.pad(self.index, 1, constant_values=-1)
        for axis in range(3):
            for s, step in enumerate((-1, 1)):
                c = self.cells + 1
                c[:, axis] += step
                nb = padded[c[:, 0], c[:, 1], c[:, 2]]
                out[2 * axis + s] = np.where(nb >= 0, nb, own)
        return out

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell-center coordinates in the (rescaled) particle frame."""
        h = np.array(self.h)
        return (self.cells + 0.5) * h - 0.5 * np.array(self.n) * h

    def scatter(self, m: np.ndarray) -> np.ndarray:
        """Packed field -> full box array of shape n + (3,), zero outside."""
        full = np.zeros(self.n + (3,))
        i, j, k = self.cells.T
        full[i, j, k] = m
        return full

    def gather(self, full: np.ndarray) -> np.ndarray:
        i, j, k = self.cells.T
        return full[i, j, k]

    def constant(self, v) -> np.ndarray:
        return np.tile(np.asarray(v, dtype=float), (self.interior_count, 1))

    def h_min(self) -> float:
        return min(self.h)

    def boundary_distance(self) -> np.ndarray:
        """Per cell, number of cell layers to the nearest masked-out cell."""
        from scipy.ndimage import distance_transform_cdt

        d = distance_transform_cdt(np.pad(self.mask, 1), metric="chessboard")
        return self.gather(d[1:-1, 1:-1, 1:-1])


def build_grid(shape: ShapeSpec, resolution) -> Grid:
    """Discretize a unit-volume particle by cell-center masking.

    ``resolution`` is one integer or three.  Cuboids tile exactly; for
    ellipsoids the spacings are rescaled afterwards so the masked volume is
    one (the mask itself is never changed).
    """
    n = (resolution,) * 3 if np.isscalar(resolution) else tuple(resolution)
    n = tuple(int(v) for v in n)
    if len(n) != 3 or min(n) < 2:
        raise ShapeError(f"resolution must be >= 2 along each axis, got {n}")
    ext = shape.extents()
    if shape.kind == "cuboid":
        h = ext / np.array(n)
        mask = np.ones(n, dtype=bool)
        return Grid(shape, n, tuple(float(x) for x in h), mask, 1.0)

    h = 2 * ext / np.array(n)
    axes = [(np.arange(k) + 0.5) * hk - a for k, hk, a in zip(n, h, ext)]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    mask = (x / ext[0]) ** 2 + (y / ext[1]) ** 2 + (z / ext[2]) ** 2 < 1.0
    count = int(mask.sum())
    if count == 0:
        raise ShapeError("no cell center falls inside the particle")
    raw = count * float(np.prod(h))
    h = h * raw ** (-1 / 3)
    return Grid(shape, n, tuple(float(x) for x in h), mask, raw)


def check_field(m: np.ndarray, g: Grid) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (g.interior_count, 3):
        raise GridMismatchError(
            f"field of shape {m.shape} does not match grid with "
            f"{g.interior_count} interior cells"
        )
    return m


def check_unit(m: np.ndarray, tol: float = UNIT_TOL) -> None:
    drift = np.max(np.abs(np.linalg.norm(m, axis=1) - 1.0)) if len(m) else 0.0
    if not drift <= tol:
        raise ConstraintError(f"field is not sphere-valued: max ||m|-1| = {drift:.3e}")


def normalize(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def laplacian_neumann(m: np.ndarray, g: Grid) -> np.ndarray:
    """7-point Laplacian, mirror ghost cells across the masked boundary."""
    m = check_field(m, g)
    nb = g.neighbors
    out = np.zeros_like(m)
    for axis in range(3):
        w = 1.0 / g.h[axis] ** 2
        out += w * (m[nb[2 * axis]] + m[nb[2 * axis + 1]] - 2.0 * m)
    return out


def laplacian_matrix(g: Grid) -> sp.csr_matrix:
    """Scalar Neumann Laplacian as a sparse N x N matrix."""
    N = g.interior_count
    rows, cols, vals = [], [], []
    own = np.arange(N)
    for axis in range(3):
        w = 1.0 / g.h[axis] ** 2
        for d in (2 * axis, 2 * axis + 1):
            nb = g.neighbors[d]
            real = nb != own
            rows += [own[real], own[real]]
            cols += [nb[real], own[real]]
            vals += [np.full(real.sum(), w), np.full(real.sum(), -w)]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )


def inner_l2(u: np.ndarray, v: np.ndarray, g: Grid) -> float:
    u = check_field(u, g)
    v = check_field(v, g)
    return float(np.sum(u * v) * g.cell_volume)


def norm_l2(u: np.ndarray, g: Grid) -> float:
    return float(np.sqrt(inner_l2(u, u, g)))


def gradient_sq_density(m: np.ndarray, g: Grid) -> np.ndarray:
    """Per-cell |grad m|^2 from face differences (half weight per face).

    Sums with the cell volume to ``-<Lap m, m>``.
    """
    m = check_field(m, g)
    nb = g.neighbors
    out = np.zeros(len(m))
    for axis in range(3):
        w = 0.5 / g.h[axis] ** 2
        for d in (2 * axis, 2 * axis + 1):
            out += w * np.sum((m[nb[d]] - m) ** 2, axis=1)
    return out


def exchange_norm_sq(m: np.ndarray, g: Grid) -> float:
    """Discrete ||grad m||^2_{L2}."""
    return float(np.sum(gradient_sq_density(m, g)) * g.cell_volume)


def mean_fluct_split(u: np.ndarray, g: Grid) -> tuple[np.ndarray, np.ndarray]:
    u = check_field(u, g)
    mean = u.sum(axis=0) * g.cell_volume / g.volume
    return mean, u - mean


def poincare_constant(g: Grid) -> float:
    """Smallest C with ||u - mean u||_{L2}^2 <= C ||grad u||_{L2}^2."""
    L = laplacian_matrix(g)
    N = g.interior_count
    if N <= 400:
        ev = np.linalg.eigvalsh(-L.toarray())
    else:
        from scipy.sparse.linalg import eigsh

        ev = eigsh(-L, k=3, sigma=-1e-3, which="LM", return_eigenvectors=False)
    ev = np.sort(ev)
    nonzero = ev[ev > 1e-9 * max(1.0, ev[-1])]
    return float(1.0 / nonzero[0])


def write_snapshot(path, m: np.ndarray, g: Grid) -> None:
    m = check_field(m, g)
    bits = np.packbits(g.mask.transpose(2, 1, 0).ravel(), bitorder="little")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<4I", SNAPSHOT_VERSION, *g.n))
        fh.write(bits.tobytes())
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def read_snapshot(path, g: Grid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(mask, values)``; if ``g`` is given the mask must match it."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != SNAPSHOT_MAGIC:
        raise SnapshotError(f"{path}: not a MAGF snapshot")
    version, *n = struct.unpack_from("<4I", data, 4)
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    total = int(np.prod(n))
    nbytes = (total + 7) // 8
    if len(data) < 20 + nbytes:
        raise SnapshotError(f"{path}: truncated mask")
    bits = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=20)
    flat = np.unpackbits(bits, count=total, bitorder="little").astype(bool)
    mask = flat.reshape(n[::-1]).transpose(2, 1, 0)
    count = int(flat.sum())
    payload = data[20 + nbytes :]
    if len(payload) != 24 * count:
        raise SnapshotError(
            f"{path}: expected {count} cells of data, found {len(payload)} bytes"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(count, 3).astype(float)
    if g is not None and (tuple(n) != g.n or not np.array_equal(mask, g.mask)):
        raise SnapshotError(f"{path}: snapshot mask does not match the configured grid")
    return mask, values
