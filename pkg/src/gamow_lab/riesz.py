"""Riesz interaction energies D_mu(E) = 1/2 * int_E int_E |z - y|^{-mu} dz dy.

Balls have a deterministic value through the distribution of the distance
between two uniform points of the ball.  Everything else goes through a
seeded Monte-Carlo estimator whose pairs are generated block by block, each
block from its own derived seed, so a run gives the same number whatever
the number of worker lanes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import geometry
from .shapes import DegenerateShapeError, StarShape, VoxelSet

BLOCK = 65536
MIN_SAMPLES = 10_000
MIN_LEVELS = 32


@dataclass(frozen=True)
class AnalyticBall:
    """Closed-form path; only valid for (discretised) balls."""

    kind = "analytic_ball"


@dataclass(frozen=True)
class RadialQuadrature:
    """Gauss-Jacobi quadrature of the pair-distance integral (balls only)."""

    levels: int = 64

    kind = "radial_quadrature"

    def __post_init__(self):
        if self.levels < MIN_LEVELS:
            raise ValueError(f"radial quadrature needs at least {MIN_LEVELS} levels")


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 1_000_000
    seed: int = 0

    kind = "monte_carlo"

    def __post_init__(self):
        if self.samples < MIN_SAMPLES:
            raise ValueError(f"monte_carlo needs at least {MIN_SAMPLES} samples")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


RieszMethod = AnalyticBall | RadialQuadrature | MonteCarlo


def method_from_dict(data: dict) -> RieszMethod:
    kind = data.get("kind", "monte_carlo")
    if kind == "analytic_ball":
        return AnalyticBall()
    if kind == "radial_quadrature":
        return RadialQuadrature(int(data.get("levels", 64)))
    if kind == "monte_carlo":
        return MonteCarlo(int(data.get("samples", 1_000_000)), int(data.get("seed", 0)))
    raise ValueError(f"unknown Riesz method {kind!r}")


def method_to_dict(method: RieszMethod) -> dict:
    if isinstance(method, MonteCarlo):
        return {"kind": method.kind, "samples": method.samples, "seed": method.seed}
    if isinstance(method, RadialQuadrature):
        return {"kind": method.kind, "levels": method.levels}
    return {"kind": method.kind}


@dataclass(frozen=True)
class EnergyBreakdown:
    surface: float
    riesz: float
    total: float
    mass: float
    stderr_riesz: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not math.isclose(self.total, self.surface + self.riesz, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("total must equal surface + riesz")

    @classmethod
    def from_parts(cls, surface: float, riesz: float, mass: float, stderr: float = 0.0) -> "EnergyBreakdown":
        return cls(float(surface), float(riesz), float(surface) + float(riesz), float(mass), float(stderr))

    def to_dict(self) -> dict:
        return {"surface": self.surface, "riesz": self.riesz, "total": self.total,
                "mass": self.mass, "stderr_riesz": self.stderr_riesz}


def lanes() -> int:
    """Worker lanes for Monte-Carlo blocks, capped by GAMOW_LAB_THREADS."""
    cap = os.environ.get("GAMOW_LAB_THREADS")
    count = os.cpu_count() or 1
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            pass
    return count


def _check_mu(n: int, mu: float) -> None:
    if not mu < n:
        raise ValueError(f"Riesz exponent mu={mu} must be below n={n}: the integral diverges")


# -- balls ------------------------------------------------------------------


def _pair_overlap(n: int, r):
    """|B ∩ (B + r e)| / |B| for unit balls at distance r in [0, 2]."""
    return special.betainc((n + 1) / 2.0, 0.5, np.clip(1.0 - 0.25 * np.asarray(r) ** 2, 0.0, 1.0))


@lru_cache(maxsize=256)
def _riesz_ball_adaptive(n: int, mu: float) -> float:
    ball = geometry.ball_volume(n)
    # r^{n-1-mu} is the algebraic weight at r=0; the overlap factor is bounded
    value, _ = integrate.quad(lambda r: _pair_overlap(n, r), 0.0, 2.0, weight="alg",
                              wvar=(n - 1 - mu, 0.0), epsabs=0.0, epsrel=1e-12, limit=200)
    return 0.5 * n * ball * ball * value


def _riesz_ball_jacobi(n: int, mu: float, levels: int) -> float:
    # r = 1 + y on [-1, 1]; weight (1-y)^a (1+y)^b = (2-r)^a r^b absorbs both endpoint powers
    a = (n + 1) / 2.0
    y, w = special.roots_jacobi(levels, a, n - 1 - mu)
    r = 1.0 + y
    smooth = _pair_overlap(n, r) / (2.0 - r) ** a
    ball = geometry.ball_volume(n)
    return float(0.5 * n * ball * ball * np.sum(w * smooth))


def riesz_ball(n: int, mu: float, levels: int | None = None) -> float:
    """D_mu(B) for the unit ball of R^n.

    Uses  D_mu(B) = |B|^2 n/2 * int_0^2 r^{n-1-mu} I_{1-r^2/4}((n+1)/2, 1/2) dr,
    where the regularised incomplete beta function is the overlap fraction of
    two unit balls at distance r.  ``levels`` selects Gauss-Jacobi quadrature
    of that order instead of adaptive quadrature.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    _check_mu(n, mu)
    if mu == 0:
        return 0.5 * geometry.ball_volume(n) ** 2
    if levels is not None:
        if levels < MIN_LEVELS:
            raise ValueError(f"radial quadrature needs at least {MIN_LEVELS} levels")
        return _riesz_ball_jacobi(n, float(mu), int(levels))
    return _riesz_ball_adaptive(n, float(mu))


def riesz_lipschitz_constant(n: int, lam: float, m: float) -> float:
    """C with |D_lam(E) - D_lam(F)| <= C |E Δ F| for |E| = |F| = m."""
    if not 0 < lam <= n - 1e-6:
        raise ValueError(f"lambda must lie in (0, n - 1e-6], got {lam}")
    if not m > 0:
        raise ValueError("mass must be positive")
    ball = geometry.ball_volume(n)
    return geometry.sphere_area(n) / (2.0 * (n - lam)) * (m / ball) ** ((n - lam) / n)


# -- Monte Carlo ----------------------------------------------------------------


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(block,)))


def _block_sizes(samples: int) -> list[int]:
    full, rest = divmod(int(samples), BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _draw_star(rng: np.random.Generator, n: int, size: int):
    """Uniform directions and radial fractions rho' = U^{1/n} for two point sets."""
    u = rng.standard_normal((2, size, n))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    s = rng.random((2, size)) ** (1.0 / n)
    return u, s


def _star_points(shape: StarShape, u: np.ndarray, s: np.ndarray, r: np.ndarray | None = None):
    """Points c + r(u) s u and importance weights |S^{n-1}| r(u)^n / n.

    The weight is the reciprocal density of the point, so E[w_X w_Y k(X, Y)]
    is the double integral over E x E for any star-shaped E.
    """
    r = shape.radius_at(u) if r is None else r
    pts = shape.center + (r * s)[..., None] * u
    w = geometry.sphere_area(shape.n) / shape.n * r ** shape.n
    return pts, w


def _voxel_points(shape: VoxelSet, rng: np.random.Generator, size: int):
    centers = shape.voxel_centers()
    idx = rng.integers(0, len(centers), size=(2, size))
    pts = centers[idx] + (rng.random((2, size, shape.n)) - 0.5) * shape.spacing
    return pts, np.full((2, size), shape.volume)


def _kernel(x: np.ndarray, y: np.ndarray, mu: float) -> np.ndarray:
    d = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    return d ** (-mu)


def _block_moments(shape, mu: float, seed: int, block: int, size: int):
    rng = _block_rng(seed, block)
    if isinstance(shape, VoxelSet):
        pts, w = _voxel_points(shape, rng, size)
    else:
        u, s = _draw_star(rng, shape.n, size)
        pts, w = _star_points(shape, u, s)
    v = w[0] * w[1] * _kernel(pts[0], pts[1], mu)
    return float(np.sum(v)), float(np.sum(v * v))


def _combine(moments, samples: int):
    total = sum(m[0] for m in moments)
    total_sq = sum(m[1] for m in moments)
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return 0.5 * mean, 0.5 * math.sqrt(var / samples)


def _monte_carlo(shape, mu: float, samples: int, seed: int):
    sizes = _block_sizes(samples)
    jobs = [(b, size) for b, size in enumerate(sizes)]
    workers = min(lanes(), len(jobs))
    if workers <= 1:
        moments = [_block_moments(shape, mu, seed, b, size) for b, size in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            moments = list(pool.map(lambda job: _block_moments(shape, mu, seed, *job), jobs))
    return _combine(moments, samples)


def riesz_energy(shape: StarShape | VoxelSet, mu: float, method: RieszMethod | None = None):
    """Return ``(value, stderr)`` for D_mu(shape).

    mu may be zero or negative (positive powers of the distance).  The
    deterministic methods require a ball and report a zero standard error.
    """
    method = MonteCarlo() if method is None else method
    _check_mu(shape.n, mu)
    vol = shape.volume
    if not vol > 0:
        raise DegenerateShapeError("shape has zero volume")
    if mu == 0:
        return 0.5 * vol * vol, 0.0
    if isinstance(method, (AnalyticBall, RadialQuadrature)):
        if not (isinstance(shape, StarShape) and shape.interpolation == "angular" and shape.is_ball(1e-12)):
            raise ValueError(f"{method.kind} applies to balls only; use monte_carlo")
        radius = float(shape.radial_values.flat[0])
        levels = method.levels if isinstance(method, RadialQuadrature) else None
        return riesz_ball(shape.n, mu, levels) * radius ** (2 * shape.n - mu), 0.0
    return _monte_carlo(shape, float(mu), int(method.samples), int(method.seed))


@dataclass(frozen=True, eq=False)
class PairSample:
    """A frozen set of reference pairs for common-random-number comparisons.

    Directions and radial fractions are fixed once; evaluating a different
    StarShape moves the points with the shape, so energy differences between
    nearby shapes are smooth and nearly noise-free.
    """

    n: int
    u: np.ndarray
    s: np.ndarray
    _stencils: dict = field(default_factory=dict, repr=False)

    @classmethod
    def draw(cls, n: int, samples: int, seed: int = 0) -> "PairSample":
        if samples < 1:
            raise ValueError("samples must be positive")
        us, ss = [], []
        for b, size in enumerate(_block_sizes(samples)):
            u, s = _draw_star(_block_rng(seed, b), n, size)
            us.append(u)
            ss.append(s)
        return cls(n, np.concatenate(us, axis=1), np.concatenate(ss, axis=1))

    @property
    def samples(self) -> int:
        return self.u.shape[1]

    def points(self, shape: StarShape):
        """Points (2, N, n) and weights (2, N) for ``shape``."""
        if shape.n != self.n:
            raise ValueError("pair sample and shape dimensions differ")
        if shape.interpolation != "angular":
            return _star_points(shape, self.u, self.s)
        key = shape.grid_shape
        stencil = self._stencils.get(key)
        if stencil is None:
            stencil = shape.angular_stencil(self.u)
            self._stencils[key] = stencil
        return _star_points(shape, self.u, self.s, shape.radius_from_stencil(*stencil))

    def energy(self, shape: StarShape, mu: float):
        _check_mu(shape.n, mu)
        if mu == 0:
            return 0.5 * shape.volume ** 2, 0.0
        pts, w = self.points(shape)
        v = w[0] * w[1] * _kernel(pts[0], pts[1], mu)
        return 0.5 * float(v.mean()), 0.5 * float(v.std() / math.sqrt(len(v)))


def sample_pairs(shape: StarShape | VoxelSet, samples: int, seed: int = 0):
    """Independent pairs (X, Y, w) with E[w k(X, Y)] = int_E int_E k."""
    xs, ys, ws = [], [], []
    for b, size in enumerate(_block_sizes(samples)):
        rng = _block_rng(seed, b)
        if isinstance(shape, VoxelSet):
            pts, w = _voxel_points(shape, rng, size)
        else:
            u, s = _draw_star(rng, shape.n, size)
            pts, w = _star_points(shape, u, s)
        xs.append(pts[0])
        ys.append(pts[1])
        ws.append(w[0] * w[1])
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)
