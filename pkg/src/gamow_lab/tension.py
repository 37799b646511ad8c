"""Surface tensions, Wulff shapes and the anisotropic surface energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import geometry
from .shapes import DegenerateShapeError, StarShape, VoxelSet

KINDS = ("isotropic", "crystalline", "ellipsoidal")


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceTension:
    """Convex, positively 1-homogeneous weight on normals.

    Use the constructors :meth:`isotropic`, :meth:`crystalline`,
    :meth:`ellipsoidal` (and :meth:`l1` for the common crystalline case)
    rather than building instances by hand.
    """

    kind: str
    n: int
    scale: float = 1.0
    vectors: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown tension kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        if self.kind == "isotropic" and not self.scale > 0:
            raise ValueError("isotropic scale must be positive")
        if self.kind == "crystalline":
            v = np.array(self.vectors, dtype=float)
            if v.ndim != 2 or v.shape[1] != self.n or len(v) < self.n + 1:
                raise ValueError(f"crystalline tension needs at least {self.n + 1} vectors in R^{self.n}")
            if np.any(np.linalg.norm(v, axis=1) == 0):
                raise ValueError("crystalline generating vectors must be nonzero")
            v.setflags(write=False)
            object.__setattr__(self, "vectors", v)
            # positivity of f <=> origin strictly inside conv(vectors)
            if np.any(self._hull_offsets <= 0):
                raise ValueError("crystalline tension is not positive: origin is not inside conv(vectors)")
        if self.kind == "ellipsoidal":
            a = np.array(self.matrix, dtype=float)
            if a.shape != (self.n, self.n):
                raise ValueError(f"ellipsoidal tension needs an {self.n}x{self.n} matrix")
            if abs(np.linalg.det(a)) < 1e-14:
                raise ValueError("ellipsoidal tension matrix must be invertible")
            a.setflags(write=False)
            object.__setattr__(self, "matrix", a)

    # -- constructors -------------------------------------------------------

    @classmethod
    def isotropic(cls, n: int, c: float = 1.0) -> "SurfaceTension":
        return cls("isotropic", n, scale=float(c))

    @classmethod
    def crystalline(cls, vectors) -> "SurfaceTension":
        v = np.asarray(vectors, dtype=float)
        return cls("crystalline", v.shape[1], vectors=v)

    @classmethod
    def ellipsoidal(cls, matrix) -> "SurfaceTension":
        a = np.asarray(matrix, dtype=float)
        return cls("ellipsoidal", a.shape[0], matrix=a)

    @classmethod
    def l1(cls, n: int) -> "SurfaceTension":
        """f(nu) = ||nu||_1, generated by the 2^n sign vectors (+-1, ..., +-1)."""
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
        return cls.crystalline(signs)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DimensionMismatchError(f"tension lives in R^{self.n}, got vector(s) of shape {x.shape}")
        if self.kind == "isotropic":
            out = self.scale * np.sqrt(np.sum(x * x, axis=-1))
        elif self.kind == "crystalline":
            out = np.max(x @ self.vectors.T, axis=-1)
            # f(0) = 0 exactly; max of dot products with 0 is 0 already
        else:
            y = x @ self.matrix.T
            out = np.sqrt(np.sum(y * y, axis=-1))
        return float(out) if np.ndim(out) == 0 else out

    def max_on_sphere(self) -> float:
        """max_{|nu|=1} f(nu), in closed form for every supported kind."""
        if self.kind == "isotropic":
            return self.scale
        if self.kind == "crystalline":
            return float(np.max(np.linalg.norm(self.vectors, axis=1)))
        return float(np.linalg.norm(self.matrix, 2))

    @cached_property
    def _hull(self):
        from scipy.spatial import ConvexHull

        return ConvexHull(self.vectors)

    @cached_property
    def _hull_offsets(self) -> np.ndarray:
        return -self._hull.equations[:, -1]

    def facet_normals(self) -> np.ndarray:
        """Outward unit normals of the Wulff polytope (crystalline only)."""
        if self.kind != "crystalline":
            return np.empty((0, self.n))
        return np.array(self._hull.equations[:, :-1])

    def wulff_volume(self) -> float:
        """|K| for the Wulff shape K = {x : x.nu <= f(nu) for all nu}.

        Closed forms: a ball of radius c, the polytope conv(vectors), and the
        ellipsoid A^T B respectively.
        """
        if self.kind == "isotropic":
            return self.scale ** self.n * geometry.ball_volume(self.n)
        if self.kind == "crystalline":
            return float(self._hull.volume)
        return abs(float(np.linalg.det(self.matrix))) * geometry.ball_volume(self.n)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "isotropic":
            params = {"n": self.n, "c": self.scale}
        elif self.kind == "crystalline":
            params = {"vectors": self.vectors.tolist()}
        else:
            params = {"matrix": self.matrix.tolist()}
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, data: dict) -> "SurfaceTension":
        kind = data.get("kind")
        params = data.get("params", {})
        if kind == "isotropic":
            return cls.isotropic(int(params["n"]), float(params.get("c", 1.0)))
        if kind == "crystalline":
            return cls.crystalline(params["vectors"])
        if kind == "ellipsoidal":
            return cls.ellipsoidal(params["matrix"])
        raise ValueError(f"unknown tension kind {kind!r}")


def eval_tension(f: SurfaceTension, x) -> float | np.ndarray:
    return f(x)


@dataclass(frozen=True, eq=False)
class WulffShape:
    tension: SurfaceTension
    boundary: StarShape

    @property
    def volume(self) -> float:
        """Volume of the discretised boundary (angular quadrature)."""
        return self.boundary.volume

    def scaled_to_mass(self, mass: float, center=None) -> StarShape:
        factor = (mass / self.volume) ** (1.0 / self.tension.n)
        values = factor * self.boundary.radial_values
        return StarShape(self.tension.n, np.zeros(self.tension.n) if center is None else center, values,
                         self.boundary.interpolation)


def _wulff_radius(f: SurfaceTension, u: np.ndarray, candidates: np.ndarray,
                  refine_rounds: int = 24, chunk: int = 2048) -> np.ndarray:
    """r(u) = min over nu with u.nu > 0 of f(nu) / (u.nu)."""
    fc = f(candidates)
    best_val = np.empty(len(u))
    best_nu = np.empty_like(u)
    for start in range(0, len(u), chunk):
        uu = u[start:start + chunk]
        dots = uu @ candidates.T
        ratio = np.where(dots > 1e-12, fc[None, :] / np.where(dots > 1e-12, dots, 1.0), np.inf)
        k = np.argmin(ratio, axis=1)
        best_val[start:start + chunk] = ratio[np.arange(len(uu)), k]
        best_nu[start:start + chunk] = candidates[k]
    # local compass refinement in the tangent plane of the current best normal
    n = u.shape[1]
    step = 0.5 * _spacing(len(candidates), n)
    for _ in range(refine_rounds):
        improved = False
        for t in _tangent_frame(best_nu):
            for sign in (1.0, -1.0):
                trial = best_nu + sign * step * t
                trial /= np.linalg.norm(trial, axis=1, keepdims=True)
                dots = np.sum(trial * u, axis=1)
                val = np.where(dots > 1e-12, f(trial) / np.where(dots > 1e-12, dots, 1.0), np.inf)
                better = val < best_val
                if np.any(better):
                    improved = True
                    best_val = np.where(better, val, best_val)
                    best_nu = np.where(better[:, None], trial, best_nu)
        if not improved:
            step *= 0.5
    return best_val


def _spacing(count: int, n: int) -> float:
    return 2.0 * math.pi / count if n == 2 else math.sqrt(4.0 * math.pi / count)


def _tangent_frame(nu: np.ndarray):
    if nu.shape[1] == 2:
        return [np.stack([-nu[:, 1], nu[:, 0]], axis=1)]
    helper = np.where(np.abs(nu[:, [0]]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    t1 = np.cross(nu, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(nu, t1)
    d1 = (t1 + t2) / math.sqrt(2.0)
    d2 = (t1 - t2) / math.sqrt(2.0)
    return [t1, t2, d1, d2]


def wulff_shape(f: SurfaceTension, resolution=None, directions: int | None = None) -> WulffShape:
    """Wulff shape of ``f`` sampled on the angular grid.

    Crystalline tensions: K is a polytope whose facets have the hull's outer
    normals, so the radius is exact from those normals alone and the shape
    uses the piecewise-flat (chordal) interpolation, which keeps facets flat.
    Otherwise the radius is the support-intersection bound over a dense set of
    normals (4096 in 2D, 16384 in 3D by default) polished by a compass search.
    """
    if f.n not in (2, 3):
        raise ValueError("Wulff shapes are discretised only for n in (2, 3)")
    grid = geometry.grid_from_resolution(f.n, resolution)
    u = geometry.grid_directions(grid).reshape(-1, f.n)
    if f.kind == "isotropic":
        return WulffShape(f, StarShape(f.n, np.zeros(f.n), np.full(grid, f.scale)))
    if f.kind == "crystalline":
        normals = f.facet_normals()
        ratio = f(normals)[None, :] / np.clip(u @ normals.T, 1e-300, None)
        radial = np.min(np.where(u @ normals.T > 0, ratio, np.inf), axis=1).reshape(grid)
        return WulffShape(f, StarShape(f.n, np.zeros(f.n), radial, "chordal"))
    if directions is None:
        directions = 4096 if f.n == 2 else 16384
    candidates = geometry.dense_directions(f.n, directions)
    radial = _wulff_radius(f, u, candidates).reshape(grid)
    return WulffShape(f, StarShape(f.n, np.zeros(f.n), radial))


def surface_energy(shape: StarShape | VoxelSet, f: SurfaceTension) -> float:
    """F(E) = integral over the boundary of f(outer normal).

    StarShape: Gauss quadrature of the radial parametrisation on every cell.
    VoxelSet: exposed faces weighted by f of their axis normal (first order).
    """
    if shape.n != f.n:
        raise DimensionMismatchError(f"shape in R^{shape.n} but tension in R^{f.n}")
    if isinstance(shape, VoxelSet):
        if shape.count == 0:
            raise DegenerateShapeError("empty voxel set")
        occ = np.pad(shape.occupancy, 1)
        total = 0.0
        eye = np.eye(shape.n)
        for axis in range(shape.n):
            d = np.diff(occ.astype(np.int8), axis=axis)
            # +1: empty -> full crossing (normal points to -axis), -1: full -> empty
            total += np.count_nonzero(d == 1) * f(-eye[axis]) + np.count_nonzero(d == -1) * f(eye[axis])
        return float(total * shape.spacing ** (shape.n - 1))
    if shape.volume <= 0:
        raise DegenerateShapeError("shape has zero volume")
    return float(np.sum(f(shape.area_vectors)))


@dataclass(frozen=True, eq=False)
class ModelParams:
    n: int
    lam: float
    tension: SurfaceTension
    bounding_radius: float | None = None
    quadrature_budget: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.lam < self.n:
            raise ValueError(f"lambda must lie in (0, {self.n}), got {self.lam}")
        if self.bounding_radius is not None and not self.bounding_radius > 0:
            raise ValueError("bounding radius must be positive")
        if self.tension.n != self.n:
            raise DimensionMismatchError("tension dimension differs from model dimension")
        if self.quadrature_budget < 1:
            raise ValueError("quadrature budget must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @staticmethod
    def default_radius(n: int, mass: float) -> float:
        return 4.0 * (mass / geometry.ball_volume(n)) ** (1.0 / n)

    def radius_for(self, mass: float) -> float:
        """R of the container B_R; 4 ball radii of mass ``mass`` unless configured."""
        return self.bounding_radius if self.bounding_radius is not None else self.default_radius(self.n, mass)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "tension": self.tension.to_dict(),
            "bounding_radius": self.bounding_radius,
            "quadrature_budget": self.quadrature_budget,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        n = int(data["n"])
        tension = (SurfaceTension.from_dict(data["tension"]) if "tension" in data
                   else SurfaceTension.isotropic(n))
        return cls(
            n=n,
            lam=float(data["lambda"]),
            tension=tension,
            bounding_radius=None if data.get("bounding_radius") is None else float(data["bounding_radius"]),
            quadrature_budget=int(data.get("quadrature_budget", 200_000)),
            seed=int(data.get("seed", 0)),
        )
