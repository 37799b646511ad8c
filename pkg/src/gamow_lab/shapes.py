"""Discretised sets: star-shaped sets on angular grids and voxel occupancy grids.

A :class:`StarShape` is the set ``{c + rho*u : 0 <= rho <= r(u)}`` where the
radial function ``r`` is interpolated from its values on the angular grid
(piecewise linear in angle for n=2, bilinear in (theta, phi) for n=3, with
pole values equal to the mean of the adjacent ring).  Volume, surface energy,
membership and Monte-Carlo sampling all refer to this same interpolated set.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from . import geometry
from .geometry import GAUSS_ORDER, _gauss


INTERPOLATIONS = ("angular", "chordal")


class DegenerateShapeError(ValueError):
    """Raised when a set has no volume or its radial function collapsed."""


def _ray_plane(u, p0, p1, p2):
    """Distance along unit rays u (from the origin) to the plane through p0, p1, p2."""
    normal = np.cross(p1 - p0, p2 - p0)
    return np.sum(normal * p0, axis=-1) / np.sum(normal * u, axis=-1)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StarShape:
    n: int
    center: np.ndarray
    radial_values: np.ndarray
    interpolation: str = "angular"

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"StarShape supports n in (2, 3), got {self.n}")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        center = _frozen(self.center)
        radial = _frozen(self.radial_values)
        if center.shape != (self.n,):
            raise ValueError(f"center must have shape ({self.n},), got {center.shape}")
        if radial.ndim != self.n - 1:
            raise ValueError(f"radial_values must be {self.n - 1}-dimensional for n={self.n}")
        geometry.grid_from_resolution(self.n, radial.shape)
        if not np.all(np.isfinite(radial)) or np.any(radial < 0):
            raise ValueError("radial_values must be finite and non-negative")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radial_values", radial)

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_function(cls, n: int, radius: Callable[[np.ndarray], np.ndarray],
                      resolution=None, center=None, interpolation: str = "angular") -> "StarShape":
        """Sample ``radius(u)`` (vectorised over unit vectors) on the grid."""
        grid = geometry.grid_from_resolution(n, resolution)
        u = geometry.grid_directions(grid)
        values = np.asarray(radius(u.reshape(-1, n)), dtype=float).reshape(grid)
        return cls(n, np.zeros(n) if center is None else center, values, interpolation)

    @classmethod
    def ball(cls, n: int, radius: float = 1.0, center=None, resolution=None) -> "StarShape":
        grid = geometry.grid_from_resolution(n, resolution)
        return cls(n, np.zeros(n) if center is None else center, np.full(grid, float(radius)))

    @classmethod
    def ball_of_mass(cls, n: int, mass: float, center=None, resolution=None) -> "StarShape":
        if mass <= 0:
            raise ValueError("mass must be positive")
        radius = (mass / geometry.ball_volume(n)) ** (1.0 / n)
        return cls.ball(n, radius, center, resolution)

    # -- basic properties -----------------------------------------------

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.radial_values.shape

    @property
    def max_radius(self) -> float:
        return float(self.radial_values.max())

    def is_ball(self, rtol: float = 1e-12) -> bool:
        r = self.radial_values
        return bool(np.ptp(r) <= rtol * r.max())

    def with_radial_values(self, values) -> "StarShape":
        return StarShape(self.n, self.center, values, self.interpolation)

    def translated(self, offset) -> "StarShape":
        return StarShape(self.n, self.center + np.asarray(offset, dtype=float), self.radial_values,
                         self.interpolation)

    def scaled(self, factor: float) -> "StarShape":
        """Dilation about the origin: x -> factor * x."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return StarShape(self.n, factor * self.center, factor * self.radial_values, self.interpolation)

    def contained_in_ball(self, radius: float) -> bool:
        return self.max_radius + float(np.linalg.norm(self.center)) <= radius

    # -- interpolation --------------------------------------------------

    @cached_property
    def _extended(self):
        """Node angles and values with poles appended (3D) or wrap-around (2D)."""
        r = self.radial_values
        if self.n == 2:
            m = r.shape[0]
            nodes = 2.0 * math.pi * np.arange(m + 1) / m
            return nodes, np.append(r, r[0])
        n_theta, n_phi = r.shape
        theta = np.concatenate([[0.0], geometry.polar_nodes(n_theta), [math.pi]])
        north, south = self._pole_values
        values = np.vstack([np.full(n_phi, north), r, np.full(n_phi, south)])
        values = np.hstack([values, values[:, :1]])
        return theta, values

    @cached_property
    def _pole_values(self):
        r = self.radial_values
        if self.interpolation == "angular":
            return r[0].mean(), r[-1].mean()
        # chordal: pole vertex at the mean height of the adjacent ring
        c = math.cos(math.pi / (2 * r.shape[0]))
        return r[0].mean() * c, r[-1].mean() * c

    def radius_at(self, u: np.ndarray) -> np.ndarray:
        """Radial function at unit vectors ``u`` (shape (..., n))."""
        u = np.asarray(u, dtype=float)
        if self.interpolation == "angular":
            idx, w = self.angular_stencil(u)
            return self.radius_from_stencil(idx, w)
        if self.n == 2:
            m = self.grid_shape[0]
            t = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2.0 * math.pi) * (m / (2.0 * math.pi))
            j = np.minimum(np.floor(t).astype(np.intp), m - 1)
            s = t - j
            values = self._extended[1]
            r0, r1 = values[j], values[j + 1]
            h = 2.0 * math.pi / m
            return r0 * r1 * math.sin(h) / (r0 * np.sin(s * h) + r1 * np.sin((1.0 - s) * h))
        return self._chordal_radius_3d(u)

    def angular_stencil(self, u: np.ndarray):
        """Indices into the flattened extended node array and interpolation weights.

        The stencil depends on the grid only, so callers that evaluate many
        shapes at the same directions can compute it once.
        """
        if self.n == 2:
            m = self.grid_shape[0]
            t = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2.0 * math.pi) * (m / (2.0 * math.pi))
            j = np.minimum(np.floor(t).astype(np.intp), m - 1)
            s = t - j
            return np.stack([j, j + 1], axis=-1), np.stack([1.0 - s, s], axis=-1)
        theta_nodes = np.concatenate([[0.0], geometry.polar_nodes(self.grid_shape[0]), [math.pi]])
        n_phi = self.grid_shape[1]
        width = n_phi + 1
        theta, phi = geometry.unit_to_spherical(np.asarray(u, dtype=float))
        i = np.clip(np.searchsorted(theta_nodes, theta, side="right") - 1, 0, len(theta_nodes) - 2)
        a = (theta - theta_nodes[i]) / (theta_nodes[i + 1] - theta_nodes[i])
        p = phi * (n_phi / (2.0 * math.pi))
        j = np.minimum(np.floor(p).astype(np.intp), n_phi - 1)
        b = p - j
        base = i * width + j
        idx = np.stack([base, base + 1, base + width, base + width + 1], axis=-1)
        w = np.stack([(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b], axis=-1)
        return idx, w

    def radius_from_stencil(self, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
        values = self._extended[1].ravel()
        return np.sum(values[idx] * w, axis=-1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - self.center
        rho = np.linalg.norm(d, axis=-1)
        u = d / np.where(rho > 0, rho, 1.0)[..., None]
        u[rho == 0] = np.eye(self.n)[0]
        return rho <= self.radius_at(u)

    # -- chordal (piecewise flat) surface -------------------------------------

    @cached_property
    def _vertices(self) -> np.ndarray:
        """Boundary points c + r u at the grid nodes (relative to the center)."""
        return self.radial_values[..., None] * geometry.grid_directions(self.grid_shape)

    @cached_property
    def _diagonal_first(self) -> np.ndarray:
        """Per quad: True splits along (k, j)-(k+1, j+1), else along (k+1, j)-(k, j+1).

        The diagonal whose midpoint lies farther out is the locally convex choice.
        """
        x = self._vertices
        a, b = x[:-1], x[1:]
        a1, b1 = np.roll(a, -1, axis=1), np.roll(b, -1, axis=1)
        return np.linalg.norm(a + b1, axis=-1) >= np.linalg.norm(b + a1, axis=-1)

    @cached_property
    def _triangles(self) -> np.ndarray:
        """Outward-oriented triangles (T, 3, 3) of the chordal surface, center-relative.

        Layout: first triangles of every quad, second triangles, north cap, south cap.
        """
        x = self._vertices
        north, south = self._pole_values
        a, b = x[:-1], x[1:]
        a1, b1 = np.roll(a, -1, axis=1), np.roll(b, -1, axis=1)
        sel = self._diagonal_first[..., None, None]
        t1 = np.where(sel, np.stack([a, b, b1], -2), np.stack([a, b, a1], -2))
        t2 = np.where(sel, np.stack([a, b1, a1], -2), np.stack([b, b1, a1], -2))
        top, bot = x[0], x[-1]
        pn = np.broadcast_to(np.array([0.0, 0.0, north]), top.shape)
        ps = np.broadcast_to(np.array([0.0, 0.0, -south]), bot.shape)
        caps_n = np.stack([pn, top, np.roll(top, -1, axis=0)], -2)
        caps_s = np.stack([ps, np.roll(bot, -1, axis=0), bot], -2)
        return np.concatenate([t1.reshape(-1, 3, 3), t2.reshape(-1, 3, 3), caps_n, caps_s])

    def _chordal_radius_3d(self, u: np.ndarray) -> np.ndarray:
        shape = u.shape[:-1]
        u = u.reshape(-1, 3)
        n_theta, n_phi = self.grid_shape
        quads = (n_theta - 1) * n_phi
        theta, phi = geometry.unit_to_spherical(u)
        k = np.floor(theta * n_theta / math.pi - 0.5).astype(np.intp)
        j = np.minimum(np.floor(phi * n_phi / (2.0 * math.pi)).astype(np.intp), n_phi - 1)
        idx = np.where(k < 0, 2 * quads + j, 2 * quads + n_phi + j)
        mid = (k >= 0) & (k < n_theta - 1)
        km, jm = k[mid], j[mid]
        q = km * n_phi + jm
        tri = self._triangles[q]
        # the diagonal plane through the origin separates the two triangles of a quad
        first = self._diagonal_first[km, jm]
        d0 = np.where(first[:, None], tri[:, 0], tri[:, 1])
        probe = np.where(first[:, None], tri[:, 1], tri[:, 0])
        normal = np.cross(d0, tri[:, 2])
        same = np.sign(np.sum(u[mid] * normal, axis=1)) == np.sign(np.sum(probe * normal, axis=1))
        idx[mid] = np.where(same, q, quads + q)
        t = self._triangles[idx]
        return _ray_plane(u, t[:, 0], t[:, 1], t[:, 2]).reshape(shape)

    # -- integrals ---------------------------------------------------------------

    @cached_property
    def quadrature(self) -> dict:
        """Gauss points of the angular interpolant on every cell.

        Returns the unit direction ``u``, the radius ``r``, ``weight`` for
        volume-type integrals (r^n/n * weight sums to the volume) and the
        outward area vector ``normal`` (area element and weight included).
        """
        s, w = _gauss(GAUSS_ORDER)
        if self.n == 2:
            nodes, values = self._extended
            h = nodes[1] - nodes[0]
            r0, r1 = values[:-1, None], values[1:, None]
            theta = nodes[:-1, None] + h * s[None, :]
            r = r0 + (r1 - r0) * s[None, :]
            dr = np.broadcast_to((r1 - r0) / h, r.shape)
            u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            uperp = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
            weight = np.broadcast_to(h * w[None, :], r.shape)
            normal = (r[..., None] * u - dr[..., None] * uperp) * weight[..., None]
            return {"u": u.reshape(-1, 2), "r": r.ravel(), "weight": weight.ravel(),
                    "normal": normal.reshape(-1, 2)}
        theta_nodes, values = self._extended
        n_phi = values.shape[1] - 1
        hphi = 2.0 * math.pi / n_phi
        htheta = np.diff(theta_nodes)
        A = s[None, None, :, None]
        Bq = s[None, None, None, :]
        v00 = values[:-1, :-1, None, None]
        v01 = values[:-1, 1:, None, None]
        v10 = values[1:, :-1, None, None]
        v11 = values[1:, 1:, None, None]
        r = (1 - A) * (1 - Bq) * v00 + (1 - A) * Bq * v01 + A * (1 - Bq) * v10 + A * Bq * v11
        ht = htheta[:, None, None, None]
        r_t = ((1 - Bq) * (v10 - v00) + Bq * (v11 - v01)) / ht
        r_p = ((1 - A) * (v01 - v00) + A * (v11 - v10)) / hphi
        theta = theta_nodes[:-1, None, None, None] + ht * A
        phi = (np.arange(n_phi) * hphi)[None, :, None, None] + hphi * Bq
        theta, phi = np.broadcast_arrays(theta, phi)
        r, r_t, r_p = np.broadcast_arrays(r, r_t, r_p)
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        u = np.stack([st * cp, st * sp, ct], axis=-1)
        e_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_p = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
        weight = np.broadcast_to(ht * hphi * w[None, None, :, None] * w[None, None, None, :], r.shape)
        normal = (r[..., None] ** 2 * st[..., None] * u
                  - (r * r_t * st)[..., None] * e_t
                  - (r * r_p)[..., None] * e_p) * weight[..., None]
        return {"u": u.reshape(-1, 3), "r": r.ravel(), "weight": (weight * st).ravel(),
                "normal": normal.reshape(-1, 3)}

    @cached_property
    def area_vectors(self) -> np.ndarray:
        """Outward area vectors whose f-weighted sum is the surface energy."""
        if self.interpolation == "angular":
            return self.quadrature["normal"]
        if self.n == 2:
            x = self._vertices
            e = np.roll(x, -1, axis=0) - x
            return np.stack([e[:, 1], -e[:, 0]], axis=-1)
        t = self._triangles
        return 0.5 * np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])

    @cached_property
    def _cone_moments(self):
        """(volume, first moment about the center)."""
        if self.interpolation == "angular":
            q = self.quadrature
            vol = np.sum(q["weight"] * q["r"] ** self.n) / self.n
            mom = np.sum((q["weight"] * q["r"] ** (self.n + 1))[:, None] * q["u"], axis=0) / (self.n + 1)
            return float(vol), mom
        if self.n == 2:
            x = self._vertices
            y = np.roll(x, -1, axis=0)
            area = 0.5 * (x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0])
            return float(area.sum()), np.sum(area[:, None] * (x + y), axis=0) / 3.0
        t = self._triangles
        vol = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])) / 6.0
        return float(vol.sum()), np.sum(vol[:, None] * t.sum(axis=1), axis=0) / 4.0

    @property
    def volume(self) -> float:
        return self._cone_moments[0]

    @property
    def centroid(self) -> np.ndarray:
        vol, mom = self._cone_moments
        return self.center + mom / vol

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "grid_shape": list(self.grid_shape),
            "radial_values": self.radial_values.ravel().tolist(),
            "center": self.center.tolist(),
            "interpolation": self.interpolation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StarShape":
        try:
            n = int(data["n"])
            grid = tuple(int(v) for v in data["grid_shape"])
            values = np.asarray(data["radial_values"], dtype=float)
            center = data.get("center", [0.0] * n)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed StarShape document: {exc}") from None
        if values.size != math.prod(grid):
            raise ValueError(f"radial_values has {values.size} entries, grid {grid} needs {math.prod(grid)}")
        return cls(n, center, values.reshape(grid), data.get("interpolation", "angular"))


@dataclass(frozen=True, eq=False)
class VoxelSet:
    """Binary occupancy grid; voxel ``idx`` covers ``origin + spacing*[idx, idx+1)``."""

    n: int
    origin: np.ndarray
    spacing: float
    occupancy: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"VoxelSet supports n in (2, 3), got {self.n}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        origin = _frozen(self.origin)
        occ = _frozen(self.occupancy, dtype=bool)
        if origin.shape != (self.n,) or occ.ndim != self.n:
            raise ValueError("origin/occupancy do not match the dimension")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    @property
    def volume(self) -> float:
        return self.count * self.spacing ** self.n

    def voxel_centers(self) -> np.ndarray:
        idx = np.argwhere(self.occupancy)
        return self.origin + (idx + 0.5) * self.spacing

    @property
    def centroid(self) -> np.ndarray:
        return self.voxel_centers().mean(axis=0)

    @property
    def max_radius(self) -> float:
        c = self.voxel_centers()
        return float(np.linalg.norm(c - self.centroid, axis=1).max() + self.spacing * math.sqrt(self.n))

    def contains(self, points: np.ndarray) -> np.ndarray:
        idx = np.floor((np.asarray(points, dtype=float) - self.origin) / self.spacing).astype(np.intp)
        ok = np.all((idx >= 0) & (idx < np.array(self.occupancy.shape)), axis=-1)
        out = np.zeros(idx.shape[:-1], dtype=bool)
        sel = idx[ok]
        out[ok] = self.occupancy[tuple(sel.T)]
        return out

    # -- binary format ------------------------------------------------------
    # magic (8 bytes) + 8 little-endian float64: n, d0, d1, d2, spacing, o0, o1, o2,
    # then np.packbits(occupancy, C order).

    MAGIC = b"GAMOWVOX"

    def to_bytes(self) -> bytes:
        dims = list(self.occupancy.shape) + [1] * (3 - self.n)
        origin = list(self.origin) + [0.0] * (3 - self.n)
        header = struct.pack("<8d", self.n, *dims, self.spacing, *origin)
        return self.MAGIC + header + np.packbits(self.occupancy.ravel()).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "VoxelSet":
        if blob[:8] != cls.MAGIC:
            raise ValueError("not a voxel file (bad magic)")
        vals = struct.unpack("<8d", blob[8:72])
        n = int(vals[0])
        dims = tuple(int(v) for v in vals[1:1 + n])
        spacing = vals[4]
        origin = vals[5:5 + n]
        bits = np.unpackbits(np.frombuffer(blob[72:], dtype=np.uint8))[: math.prod(dims)]
        if bits.size != math.prod(dims):
            raise ValueError("voxel file is truncated")
        return cls(n, origin, spacing, bits.reshape(dims).astype(bool))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "VoxelSet":
        return cls.from_bytes(Path(path).read_bytes())


def load_shape(path) -> StarShape | VoxelSet:
    """Load a StarShape JSON document or a binary voxel file."""
    raw = Path(path).read_bytes()
    if raw[:8] == VoxelSet.MAGIC:
        return VoxelSet.from_bytes(raw)
    return StarShape.from_dict(json.loads(raw.decode("utf-8")))


def save_shape(shape: StarShape, path) -> None:
    Path(path).write_text(json.dumps(shape.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
