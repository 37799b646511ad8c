"""Non-minimality certificates from half-space cuts.

Cutting E by {nu.x = t} and sending one half to infinity adds at most
2 max f * H^{n-1}(slice) of surface and removes the cross interaction between
the halves.  A cut whose cross term beats that gain proves E is not a
minimizer.  Averaging over all cuts gives the slicing bound
int int_{ExE} |z-y|^{1-lambda} <= a_{n,f} |E|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import slicing_constant
from .riesz import MonteCarlo, riesz_energy, sample_pairs
from .setops import slice_measure
from .shapes import StarShape, VoxelSet
from .tension import ModelParams

NON_MINIMAL = "non_minimal"
INCONCLUSIVE = "inconclusive"
BOUNDARY = "boundary_inconclusive"


@dataclass(frozen=True)
class CutCertificate:
    nu: np.ndarray
    t: float
    surface_gain: float
    cross_interaction: float
    stderr: float
    verdict: str

    def to_dict(self) -> dict:
        return {"nu": [float(v) for v in self.nu], "t": self.t, "surface_gain": self.surface_gain,
                "cross_interaction": self.cross_interaction, "stderr": self.stderr, "verdict": self.verdict}


def cut_directions(n: int, count: int | None = None) -> np.ndarray:
    """Default stencils: 16 angles in 2D; axes, icosahedron vertices and cube corners (26) in 3D."""
    if n == 2:
        count = 16 if count is None else count
        a = 2.0 * math.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if n != 3:
        raise ValueError("cut directions exist only for n in (2, 3)")
    if count is not None and count != 26:
        from .geometry import fibonacci_sphere

        return fibonacci_sphere(count)
    g = (1.0 + math.sqrt(5.0)) / 2.0
    axes = np.vstack([np.eye(3), -np.eye(3)])
    ico = []
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            ico += [(0.0, s1, s2 * g), (s1, s2 * g, 0.0), (s2 * g, 0.0, s1)]
    corners = np.array(np.meshgrid([-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0], indexing="ij")).reshape(3, -1).T
    dirs = np.vstack([axes, np.array(ico), corners])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _support(shape, nu: np.ndarray) -> tuple[float, float]:
    if isinstance(shape, VoxelSet):
        p = shape.voxel_centers() @ nu
        half = 0.5 * shape.spacing * np.abs(nu).sum()
        return float(p.min() - half), float(p.max() + half)
    from .geometry import dense_directions

    u = dense_directions(shape.n, 4096)
    p = (shape.center + shape.radius_at(u)[:, None] * u) @ nu
    return float(p.min()), float(p.max())


def cut_test(shape: StarShape | VoxelSet, params: ModelParams, directions: int | None = None,
             t_samples: int = 21, samples: int | None = None, seed: int | None = None) -> list[CutCertificate]:
    """Certificates for every sampled (nu, t) with both halves non-empty."""
    if shape.n != params.n:
        raise ValueError("shape and model dimensions differ")
    if not shape.volume > 0:
        raise ValueError("shape has no mass")
    samples = params.quadrature_budget if samples is None else samples
    seed = params.seed if seed is None else seed
    x, y, w = sample_pairs(shape, samples, seed)
    k = w * np.sqrt(np.sum((x - y) ** 2, axis=1)) ** (-params.lam)
    fmax = params.tension.max_on_sphere()
    out = []
    for nu in cut_directions(shape.n, directions):
        lo, hi = _support(shape, nu)
        px, py = x @ nu, y @ nu
        for t in lo + (hi - lo) * (np.arange(1, t_samples + 1) / (t_samples + 1)):
            split = (px > t) != (py > t)
            if not np.any(px > t) or not np.any(px <= t):
                continue
            # int_{E+ x E-} = 1/2 int_{E x E} k [one point on each side]
            v = np.where(split, k, 0.0)
            cross = 0.5 * float(v.mean())
            err = 0.5 * float(v.std() / math.sqrt(len(v)))
            gain = 2.0 * fmax * slice_measure(shape, nu, float(t))
            verdict = NON_MINIMAL if cross > gain + 3.0 * err else INCONCLUSIVE
            out.append(CutCertificate(nu.copy(), float(t), gain, cross, err, verdict))
    return out


@dataclass(frozen=True)
class SlicingCertificate:
    lhs: float
    rhs: float
    stderr: float
    verdict: str

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.verdict))

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "stderr": self.stderr, "verdict": self.verdict}


def slicing_certificate(shape: StarShape | VoxelSet, params: ModelParams,
                        method: MonteCarlo | None = None) -> SlicingCertificate:
    """Compare int int_{ExE} |z-y|^{1-lambda} with a_{n,f} |E|.

    For lambda = 1 the left side is |E|^2 exactly, and equality (up to 1e-9
    relative) is reported as ``boundary_inconclusive``.
    """
    lam = params.lam
    if lam > 1:
        raise ValueError("slicing certificates need lambda in (0, 1]")
    vol = shape.volume
    rhs = slicing_constant(shape.n, params.tension) * vol
    if lam == 1:
        lhs, err = vol * vol, 0.0
    else:
        method = MonteCarlo(max(params.quadrature_budget, 10_000), params.seed) if method is None else method
        d, se = riesz_energy(shape, lam - 1.0, method)
        lhs, err = 2.0 * d, 2.0 * se
    if abs(lhs - rhs) <= max(3.0 * err, 1e-9 * rhs):
        verdict = BOUNDARY
    elif lhs > rhs:
        verdict = NON_MINIMAL
    else:
        verdict = INCONCLUSIVE
    return SlicingCertificate(float(lhs), float(rhs), float(err), verdict)
