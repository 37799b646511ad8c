"""Fixed-mass minimisation of F + D_lambda over star-shaped sets.

The search space is the radial function perturbed along a fixed set of
angular modes (Fourier modes in 2D, real spherical harmonics in 3D).  Each
iteration takes central finite differences of the mass-projected energy,
preconditions them by mode order, and runs an Armijo line search.  Riesz
terms use one frozen :class:`~gamow_lab.riesz.PairSample` for the whole run,
so every comparison shares its random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .riesz import EnergyBreakdown, MonteCarlo, PairSample, RieszMethod, riesz_energy
from .setops import Alignment, align, deficit
from .shapes import DegenerateShapeError, StarShape
from .tension import ModelParams, SurfaceTension, surface_energy, wulff_shape

CLAMP = 1e-4
MAX_CLAMPED = 0.01
ARMIJO = 1e-4
MAX_BACKTRACK = 30


def evaluate_energy(shape: StarShape, f: SurfaceTension, lam: float,
                    method: RieszMethod | None = None) -> EnergyBreakdown:
    riesz, stderr = riesz_energy(shape, lam, method)
    return EnergyBreakdown.from_parts(surface_energy(shape, f), riesz, shape.volume, stderr)


@dataclass(frozen=True, eq=False)
class OptimizationConfig:
    params: ModelParams
    mass: float
    init: str | StarShape = "perturbed"
    amplitude: float = 0.1
    max_iters: int = 200
    step_tolerance: float = 1e-5
    fd_step: float = 1e-3
    riesz_method: MonteCarlo | None = None
    degree: int | None = None
    resolution: int | tuple | None = None

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not 0 < self.fd_step < 0.1:
            raise ValueError("fd_step must lie in (0, 0.1)")
        if isinstance(self.init, StarShape):
            if self.init.n != self.params.n:
                raise ValueError("custom init shape has the wrong dimension")
        elif self.init not in ("wulff", "ball", "perturbed"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.riesz_method is not None and not isinstance(self.riesz_method, MonteCarlo):
            raise ValueError("the optimiser needs a monte_carlo Riesz method")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")

    @property
    def method(self) -> MonteCarlo:
        if self.riesz_method is not None:
            return self.riesz_method
        return MonteCarlo(max(self.params.quadrature_budget, 10_000), self.params.seed)

    @property
    def mode_degree(self) -> int:
        if self.degree is not None:
            return self.degree
        return 8 if self.params.n == 2 else 4


@dataclass
class OptimizationResult:
    shape: StarShape
    energy: EnergyBreakdown
    deficit: float
    alignment_to_wulff: Alignment
    iterations: int
    converged: bool
    telemetry: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy.to_dict(),
            "deficit": self.deficit,
            "alignment_to_wulff": self.alignment_to_wulff.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "shape": self.shape.to_dict(),
        }


TELEMETRY_COLUMNS = ("iter", "surface", "riesz", "total", "deficit", "step")


def _mode_orders(n: int, degree: int) -> np.ndarray:
    """Order k (2D) or degree l (3D) of each column of geometry.angular_modes."""
    if n == 2:
        return np.repeat(np.arange(1, degree + 1), 2)
    return np.concatenate([np.full(2 * ell + 1, ell) for ell in range(1, degree + 1)])


def initial_shape(config: OptimizationConfig) -> StarShape:
    p = config.params
    f = p.tension
    if isinstance(config.init, StarShape):
        shape = config.init
    elif config.init == "ball":
        shape = StarShape.ball_of_mass(p.n, config.mass, resolution=config.resolution)
    else:
        wulff = wulff_shape(f, config.resolution)
        shape = wulff.scaled_to_mass(config.mass)
        if config.init == "perturbed":
            rng = np.random.default_rng(np.random.SeedSequence(int(p.seed), spawn_key=(1,)))
            modes = geometry.angular_modes(shape.grid_shape, min(config.mode_degree, 4))
            orders = _mode_orders(p.n, min(config.mode_degree, 4))
            low = modes[orders >= 2]
            coeffs = rng.uniform(-1.0, 1.0, len(low))
            bump = np.tensordot(coeffs, low, axes=1)
            bump /= max(np.abs(bump).max(), 1e-300)
            shape = shape.with_radial_values(shape.radial_values * (1.0 + config.amplitude * bump))
    return _project(shape, config.mass)


def _project(shape: StarShape, mass: float) -> StarShape:
    vol = shape.volume
    if not vol > 0:
        raise DegenerateShapeError("shape lost all volume")
    return shape.with_radial_values(shape.radial_values * (mass / vol) ** (1.0 / shape.n))


class _Objective:
    """Mass-projected energy with frozen pair samples, normalised by the ball's surface."""

    def __init__(self, config: OptimizationConfig):
        p = config.params
        self.f = p.tension
        self.lam = p.lam
        self.mass = config.mass
        self.n = p.n
        method = config.method
        self.pairs = PairSample.draw(p.n, method.samples, method.seed)
        self.length = (config.mass / geometry.ball_volume(p.n)) ** (1.0 / p.n)
        self.scale = p.n * geometry.ball_volume(p.n) * self.length ** (p.n - 1)
        self.floor = CLAMP * self.length

    def shape_from(self, base: StarShape, radial: np.ndarray) -> StarShape:
        clamped = radial < self.floor
        if np.mean(clamped) > MAX_CLAMPED:
            raise DegenerateShapeError(
                f"{np.count_nonzero(clamped)} of {clamped.size} radial values fell below {self.floor:.3g}")
        return _project(base.with_radial_values(np.maximum(radial, self.floor)), self.mass)

    def breakdown(self, shape: StarShape) -> EnergyBreakdown:
        riesz, stderr = self.pairs.energy(shape, self.lam)
        return EnergyBreakdown.from_parts(surface_energy(shape, self.f), riesz, shape.volume, stderr)

    def __call__(self, shape: StarShape) -> float:
        return self.breakdown(shape).total / self.scale


def minimize_energy(config: OptimizationConfig) -> OptimizationResult:
    p = config.params
    objective = _Objective(config)
    shape = initial_shape(config)
    radius = p.radius_for(config.mass)
    if not shape.contained_in_ball(radius):
        raise ValueError(f"initial shape is not inside B_R with R={radius:.4g}")
    degree = config.mode_degree
    # order-1 modes are infinitesimal translations: the energy is flat there,
    # while frozen samples are not, so they would only let the shape drift
    orders = _mode_orders(p.n, degree)
    modes = geometry.angular_modes(shape.grid_shape, degree)[orders >= 2]
    orders = orders[orders >= 2]
    # first-variation of the perimeter grows like order^2; divide it back out
    precond = 1.0 / (1.0 + orders.astype(float) ** 2)
    modes = modes * objective.length
    h = config.fd_step

    def telemetry_row(it, s, step):
        e = objective.breakdown(s)
        return {"iter": it, "surface": e.surface, "riesz": e.riesz, "total": e.total,
                "deficit": deficit(s, p.tension), "step": step}

    value = objective(shape)
    rows = [telemetry_row(0, shape, 0.0)]
    alpha = 1.0
    converged = False
    iterations = 0
    for it in range(1, config.max_iters + 1):
        r = shape.radial_values
        grad = np.empty(len(modes))
        for k, mode in enumerate(modes):
            up = objective(objective.shape_from(shape, r + h * mode))
            down = objective(objective.shape_from(shape, r - h * mode))
            grad[k] = (up - down) / (2.0 * h)
        direction = -precond * grad
        slope = float(grad @ direction)
        if slope >= 0 or not np.any(direction):
            converged = True
            break
        accepted = None
        for _ in range(MAX_BACKTRACK):
            trial = objective.shape_from(shape, r + alpha * np.tensordot(direction, modes, axes=1))
            trial_value = objective(trial)
            if trial_value <= value + ARMIJO * alpha * slope:
                accepted = (trial, trial_value)
                break
            alpha *= 0.5
        iterations = it
        if accepted is None:
            converged = True
            rows.append(telemetry_row(it, shape, 0.0))
            break
        trial, trial_value = accepted
        step = float(np.max(np.abs(trial.radial_values - r)) / objective.length)
        shape, value = trial, trial_value
        rows.append(telemetry_row(it, shape, step))
        if step < config.step_tolerance:
            converged = True
            break
        alpha = min(alpha * 2.0, 1e3)

    energy = objective.breakdown(shape)
    target = wulff_shape(p.tension, shape.grid_shape).scaled_to_mass(config.mass, center=shape.center)
    return OptimizationResult(
        shape=shape,
        energy=energy,
        deficit=deficit(shape, p.tension),
        alignment_to_wulff=align(shape, target),
        iterations=iterations,
        converged=converged,
        telemetry=rows,
    )


def directional_derivative(fun, shape: StarShape, direction: np.ndarray, h: float,
                           scheme: str = "forward") -> float:
    """Finite-difference derivative of ``fun`` along a radial perturbation."""
    r = shape.radial_values
    if scheme == "forward":
        return (fun(shape.with_radial_values(r + h * direction)) - fun(shape)) / h
    if scheme == "central":
        return (fun(shape.with_radial_values(r + h * direction))
                - fun(shape.with_radial_values(r - h * direction))) / (2.0 * h)
    raise ValueError(f"unknown scheme {scheme!r}")
