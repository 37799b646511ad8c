"""Unit balls, spheres and angular grids shared by the rest of the package."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

DEFAULT_GRID_2D = (512,)
DEFAULT_GRID_3D = (64, 128)
GAUSS_ORDER = 3


def ball_volume(n: int) -> float:
    """Lebesgue measure |B| of the unit ball in R^n.

    Uses the two-step recursion |B_n| = 2*pi/n * |B_{n-2}|, which is the
    Gamma-function formula written so that n=2 and n=3 come out as pi and
    4*pi/3 without rounding drift.
    """
    if n < 0:
        raise ValueError(f"dimension must be non-negative, got {n}")
    vol = 1.0 if n % 2 == 0 else 2.0
    for k in range(2 + n % 2, n + 1, 2):
        vol *= 2.0 * math.pi / k
    return vol


def sphere_area(n: int) -> float:
    """H^{n-1}(S^{n-1}) = n |B|."""
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    return n * ball_volume(n)


def default_grid(n: int) -> tuple[int, ...]:
    if n == 2:
        return DEFAULT_GRID_2D
    if n == 3:
        return DEFAULT_GRID_3D
    raise ValueError(f"angular grids exist only for n in (2, 3), got {n}")


def grid_from_resolution(n: int, resolution: int | tuple[int, ...] | None) -> tuple[int, ...]:
    """Normalise a resolution argument to a grid shape.

    An integer means nodes per circle in 2D and polar rings in 3D (the azimuth
    then gets twice as many nodes).
    """
    if resolution is None:
        return default_grid(n)
    if isinstance(resolution, (int, np.integer)):
        res = int(resolution)
        grid = (res,) if n == 2 else (res, 2 * res)
    else:
        grid = tuple(int(v) for v in resolution)
    if len(grid) != n - 1:
        raise ValueError(f"grid {grid} does not match dimension {n}")
    if min(grid) < 16:
        raise ValueError(f"angular resolution must be at least 16 per angle, got {grid}")
    return grid


def polar_nodes(n_theta: int) -> np.ndarray:
    """Cell-centred polar angles of the latitude-longitude grid."""
    return (np.arange(n_theta) + 0.5) * math.pi / n_theta


def grid_angles(grid: tuple[int, ...]):
    if len(grid) == 1:
        return (2.0 * math.pi * np.arange(grid[0]) / grid[0],)
    n_theta, n_phi = grid
    return polar_nodes(n_theta), 2.0 * math.pi * np.arange(n_phi) / n_phi


def spherical_to_unit(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def unit_to_spherical(u: np.ndarray):
    theta = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2.0 * math.pi)
    return theta, phi


def grid_directions(grid: tuple[int, ...]) -> np.ndarray:
    """Unit vectors at the grid nodes, shape grid + (n,)."""
    if len(grid) == 1:
        (theta,) = grid_angles(grid)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    theta, phi = grid_angles(grid)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return spherical_to_unit(tt, pp)


@lru_cache(maxsize=8)
def _gauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def fibonacci_sphere(count: int) -> np.ndarray:
    """Quasi-uniform unit vectors on S^2."""
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def dense_directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        t = 2.0 * math.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    if n == 3:
        return fibonacci_sphere(count)
    raise ValueError(f"direction sets exist only for n in (2, 3), got {n}")


def sphere_quadrature(n: int, resolution: int = 256):
    """Nodes and weights integrating functions over S^{n-1}.

    2D is the periodic rectangle rule; 3D is Gauss-Legendre in cos(theta)
    times the rectangle rule in azimuth.
    """
    if n == 2:
        t = 2.0 * math.pi * (np.arange(resolution) + 0.5) / resolution
        nodes = np.stack([np.cos(t), np.sin(t)], axis=-1)
        return nodes, np.full(resolution, 2.0 * math.pi / resolution)
    if n == 3:
        z, wz = np.polynomial.legendre.leggauss(resolution)
        phi = 2.0 * math.pi * (np.arange(2 * resolution) + 0.5) / (2 * resolution)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - zz * zz)
        nodes = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        weights = np.outer(wz, np.full(2 * resolution, math.pi / resolution)).ravel()
        return nodes, weights
    raise ValueError(f"sphere quadrature exists only for n in (2, 3), got {n}")


def halfspace_mean_width(n: int, e, resolution: int = 512) -> float:
    """Quadrature of  int_{S^{n-1}} (nu . e)_+ d nu  for a unit vector e.

    The exact value is |B^{n-1}| for every unit e; this is the rotation step
    that turns the averaged cut inequality into the slicing bound.
    """
    e = np.asarray(e, dtype=float)
    if e.shape != (n,):
        raise ValueError(f"direction must have shape ({n},)")
    e = e / np.linalg.norm(e)
    nodes, weights = sphere_quadrature(n, resolution)
    return float(np.sum(weights * np.clip(nodes @ e, 0.0, None)))


def angular_modes(grid: tuple[int, ...], degree: int) -> np.ndarray:
    """Real perturbation modes evaluated at the grid nodes.

    2D: cos(k t), sin(k t) for k = 1..degree.  3D: real spherical harmonics of
    degree 1..degree.  The constant mode is left out because volume is fixed
    by rescaling.  Each mode is normalised to unit sup-norm on the grid.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    modes = []
    if len(grid) == 1:
        (t,) = grid_angles(grid)
        for k in range(1, degree + 1):
            modes.append(np.cos(k * t))
            modes.append(np.sin(k * t))
    else:
        from scipy.special import sph_harm_y

        theta, phi = grid_angles(grid)
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        for ell in range(1, degree + 1):
            for m in range(-ell, ell + 1):
                y = sph_harm_y(ell, abs(m), tt, pp)
                if m < 0:
                    modes.append(np.sqrt(2.0) * y.imag)
                elif m == 0:
                    modes.append(y.real)
                else:
                    modes.append(np.sqrt(2.0) * y.real)
    out = np.array(modes, dtype=float)
    scale = np.max(np.abs(out.reshape(len(out), -1)), axis=1)
    return out / scale.reshape((-1,) + (1,) * len(grid))
