"""Volumes, symmetric differences, translation alignment, slices and the deficit."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from . import geometry
from .shapes import DegenerateShapeError, StarShape, VoxelSet
from .tension import SurfaceTension, surface_energy

# rasterisation cells per equivalent radius
CELLS_PER_RADIUS = {2: 64, 3: 32}
GOLDEN_ROUNDS = 3


class AlignmentWarning(UserWarning):
    """The centroids are farther apart than the translation search radius."""


def volume(shape: StarShape | VoxelSet) -> float:
    return float(shape.volume)


def rescale_to_mass(shape: StarShape | VoxelSet, mass: float):
    """Dilate about the shape's center (StarShape) or origin (VoxelSet) to volume ``mass``."""
    if not mass > 0:
        raise ValueError("mass must be positive")
    vol = shape.volume
    if not vol > 0:
        raise DegenerateShapeError("cannot rescale a set of zero volume")
    factor = (mass / vol) ** (1.0 / shape.n)
    if isinstance(shape, VoxelSet):
        return VoxelSet(shape.n, shape.origin * factor, shape.spacing * factor, shape.occupancy)
    return shape.with_radial_values(shape.radial_values * factor)


def equivalent_radius(shape) -> float:
    return (shape.volume / geometry.ball_volume(shape.n)) ** (1.0 / shape.n)


def bounding_box(shape) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(shape, VoxelSet):
        idx = np.argwhere(shape.occupancy)
        if len(idx) == 0:
            return shape.origin.copy(), shape.origin.copy()
        return shape.origin + idx.min(axis=0) * shape.spacing, shape.origin + (idx.max(axis=0) + 1) * shape.spacing
    # the interpolant never exceeds the largest node value
    r = shape.max_radius
    return shape.center - r, shape.center + r


@dataclass(frozen=True)
class Grid:
    """A voxel lattice: cell ``idx`` is centered at origin + (idx + 1/2) * spacing."""

    origin: np.ndarray
    spacing: float
    dims: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.dims)

    def centers(self) -> np.ndarray:
        axes = [self.origin[k] + (np.arange(d) + 0.5) * self.spacing for k, d in enumerate(self.dims)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def common_grid(*shapes, spacing: float | None = None, pad: float = 0.0) -> Grid:
    """Smallest lattice covering every shape (plus ``pad``) at a shared spacing."""
    n = shapes[0].n
    if any(s.n != n for s in shapes):
        raise ValueError("shapes live in different dimensions")
    if spacing is None:
        spacing = min(equivalent_radius(s) for s in shapes) / CELLS_PER_RADIUS[n]
    lo = np.min([bounding_box(s)[0] for s in shapes], axis=0) - pad - spacing
    hi = np.max([bounding_box(s)[1] for s in shapes], axis=0) + pad + spacing
    dims = tuple(int(v) for v in np.ceil((hi - lo) / spacing))
    return Grid(lo, float(spacing), dims)


def rasterize(shape, grid: Grid | None = None, offset=None) -> VoxelSet:
    """Voxelise ``shape + offset`` by testing cell centers."""
    grid = common_grid(shape) if grid is None else grid
    pts = grid.centers().reshape(-1, grid.n)
    if offset is not None:
        pts = pts - np.asarray(offset, dtype=float)
    occ = shape.contains(pts).reshape(grid.dims)
    return VoxelSet(grid.n, grid.origin, grid.spacing, occ)


def sym_diff_volume(a, b, spacing: float | None = None) -> float:
    """|A Δ B| from rasterisations on a common grid (error O(spacing))."""
    if isinstance(a, VoxelSet) and isinstance(b, VoxelSet) and _same_lattice(a, b):
        return float(np.count_nonzero(a.occupancy ^ b.occupancy)) * a.spacing ** a.n
    grid = common_grid(a, b, spacing=spacing)
    va, vb = rasterize(a, grid), rasterize(b, grid)
    return float(np.count_nonzero(va.occupancy ^ vb.occupancy)) * grid.spacing ** grid.n


def _same_lattice(a: VoxelSet, b: VoxelSet) -> bool:
    return (a.occupancy.shape == b.occupancy.shape and a.spacing == b.spacing
            and np.array_equal(a.origin, b.origin))


@dataclass(frozen=True)
class Alignment:
    x0: np.ndarray
    ratio: float
    search_radius: float
    within_search: bool

    def __iter__(self):
        return iter((self.x0, self.ratio))

    def to_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "ratio": self.ratio, "search_radius": self.search_radius,
                "within_search": self.within_search}


def align(a, b, search_radius: float | None = None, spacing: float | None = None) -> Alignment:
    """Translation x0 minimising |(A + x0) Δ B| and the ratio |(A + x0) Δ B| / |B|.

    Every lattice shift within ``search_radius`` is scored at once by FFT
    cross-correlation of the rasterisations (maximal overlap is minimal
    symmetric difference), then each axis gets golden-section refinement with
    exact re-rasterisation of the translated A.
    """
    if a.n != b.n:
        raise ValueError("shapes live in different dimensions")
    n = a.n
    distance = float(np.linalg.norm(b.centroid - a.centroid))
    if spacing is None:
        spacing = min(equivalent_radius(a), equivalent_radius(b)) / CELLS_PER_RADIUS[n]
    if search_radius is None:
        search_radius = distance + 0.5 * equivalent_radius(b)
    within = distance <= search_radius
    if not within:
        warnings.warn(f"centroid distance {distance:.4g} exceeds search radius {search_radius:.4g}",
                      AlignmentWarning, stacklevel=2)
    lo_a, hi_a = bounding_box(a)
    lo_b, hi_b = bounding_box(b)
    # lattice anchored at B's box; A's box snapped onto the same lattice
    lo = np.minimum(lo_b, lo_a - search_radius) - spacing
    hi = np.maximum(hi_b, hi_a + search_radius) + spacing
    dims = tuple(int(v) for v in np.ceil((hi - lo) / spacing))
    big = Grid(lo, spacing, dims)
    start = np.floor((lo_a - spacing - lo) / spacing).astype(int)
    stop = np.ceil((hi_a + spacing - lo) / spacing).astype(int)
    small = Grid(lo + start * spacing, spacing, tuple(int(v) for v in stop - start))
    vb = rasterize(b, big)
    va = rasterize(a, small)
    flip = tuple(slice(None, None, -1) for _ in range(n))
    overlap = signal.fftconvolve(vb.occupancy.astype(float), va.occupancy[flip].astype(float), mode="valid")
    # overlap[k] pairs A's small-grid cell i with big-grid cell i + k: shift = (k - start) * spacing
    shifts = np.stack(np.meshgrid(*[(np.arange(d) - s) * spacing for d, s in zip(overlap.shape, start)],
                                  indexing="ij"), axis=-1)
    allowed = np.linalg.norm(shifts, axis=-1) <= search_radius + 1e-12
    score = np.where(allowed, np.rint(overlap), -np.inf)
    best = np.unravel_index(np.argmax(score), score.shape)
    x = shifts[best].copy()

    b_count = vb.count
    if b_count == 0:
        raise DegenerateShapeError("reference set B is empty")

    def cost(shift) -> int:
        # |(A+x) Δ B| = |A+x| + |B| - 2 |(A+x) ∩ B|, with A+x rasterised on its own box only
        lo_k = np.clip(np.floor((lo_a + shift - spacing - lo) / spacing).astype(int), 0, None)
        hi_k = np.minimum(np.ceil((hi_a + shift + spacing - lo) / spacing).astype(int), dims)
        sub = Grid(lo + lo_k * spacing, spacing, tuple(int(v) for v in hi_k - lo_k))
        occ = rasterize(a, sub, shift).occupancy
        window = vb.occupancy[tuple(slice(i, j) for i, j in zip(lo_k, hi_k))]
        return int(occ.sum()) + b_count - 2 * int(np.count_nonzero(occ & window))

    best_cost = cost(x)
    zero_cost = cost(np.zeros(n))
    if zero_cost <= best_cost:
        x, best_cost = np.zeros(n), zero_cost
    for _ in range(GOLDEN_ROUNDS):
        improved = False
        for axis in range(n):
            def along(t, axis=axis):
                trial = x.copy()
                trial[axis] = t
                return cost(trial)

            res = optimize.minimize_scalar(along, bounds=(x[axis] - spacing, x[axis] + spacing),
                                           method="bounded", options={"xatol": spacing / 8, "maxiter": 8})
            if res.fun < best_cost:
                x[axis] = res.x
                best_cost = int(res.fun)
                improved = True
        if not improved:
            break
    return Alignment(x, best_cost / b_count, float(search_radius), bool(within))


def slice_measure(shape, nu, t: float, resolution: int = 256) -> float:
    """H^{n-1} of the section {x : nu.x = t} ∩ E.

    VoxelSet: occupied cells within half a cell of the plane, divided by the
    slab width.  StarShape: exact chord lengths in 2D (roots of the boundary
    crossing along the line), cell counting on a planar grid in 3D.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (shape.n,):
        raise ValueError("direction has the wrong dimension")
    norm = np.linalg.norm(nu)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("nu must be a unit vector")
    if isinstance(shape, VoxelSet):
        c = shape.voxel_centers()
        width = shape.spacing
        hits = np.count_nonzero(np.abs(c @ nu - t) < 0.5 * width)
        return hits * shape.spacing ** shape.n / width
    offset = t - float(nu @ shape.center)
    reach = shape.max_radius
    if abs(offset) >= reach:
        return 0.0
    half = math.sqrt(reach * reach - offset * offset)
    base = shape.center + offset * nu
    if shape.n == 2:
        return _chord_length(shape, base, np.array([-nu[1], nu[0]]), half)
    e1, e2 = _plane_frame(nu)
    h = 2.0 * half / resolution
    s = -half + (np.arange(resolution) + 0.5) * h
    ss, tt = np.meshgrid(s, s, indexing="ij")
    pts = base + ss[..., None] * e1 + tt[..., None] * e2
    return float(np.count_nonzero(shape.contains(pts.reshape(-1, 3)))) * h * h


def _plane_frame(nu: np.ndarray):
    helper = np.eye(3)[int(np.argmin(np.abs(nu)))]
    e1 = np.cross(nu, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(nu, e1)


def _chord_length(shape: StarShape, base: np.ndarray, direction: np.ndarray, half: float,
                  samples: int = 2049) -> float:
    def inside(s):
        d = base + np.multiply.outer(s, direction) - shape.center
        rho = np.linalg.norm(d, axis=-1)
        u = d / np.where(rho > 0, rho, 1.0)[..., None]
        return shape.radius_at(u) - rho

    s = np.linspace(-half, half, samples)
    g = inside(s)
    # closed membership, so boundary points hit exactly by the scan count as inside
    ins = g >= 0
    total = 0.0
    entry = s[0] if ins[0] else None
    for k in np.nonzero(ins[:-1] != ins[1:])[0]:
        if g[k] == 0:
            root = s[k]
        elif g[k + 1] == 0:
            root = s[k + 1]
        else:
            root = optimize.brentq(lambda v: float(inside(np.array([v]))[0]), s[k], s[k + 1], xtol=1e-13)
        if ins[k + 1]:
            entry = root
        else:
            total += root - entry
            entry = None
    if entry is not None:
        total += s[-1] - entry
    return float(total)


def deficit(shape, f: SurfaceTension) -> float:
    """F(E) / (n |K|^{1/n} |E|^{(n-1)/n}) - 1 with the exact Wulff volume |K|."""
    n = shape.n
    vol = shape.volume
    if not vol > 0:
        raise DegenerateShapeError("shape has zero volume")
    return surface_energy(shape, f) / (n * f.wulff_volume() ** (1.0 / n) * vol ** ((n - 1.0) / n)) - 1.0
