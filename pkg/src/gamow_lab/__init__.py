"""Numerical laboratory for the anisotropic liquid drop (Gamow) model."""

from .bounds import (
    MassReport,
    ball_energy,
    classical_critical_mass,
    conjectured_critical_mass,
    crossover_mass,
    mass_report,
    modulus_upper_bound,
    nonexistence_mass,
    slicing_constant,
    split_function,
    two_cluster_energy,
)
from .certify import CutCertificate, SlicingCertificate, cut_test, slicing_certificate
from .minimizer import OptimizationConfig, OptimizationResult, evaluate_energy, minimize_energy
from .riesz import (
    AnalyticBall,
    EnergyBreakdown,
    MonteCarlo,
    RadialQuadrature,
    riesz_ball,
    riesz_energy,
    riesz_lipschitz_constant,
)
from .setops import align, deficit, rasterize, rescale_to_mass, slice_measure, sym_diff_volume, volume
from .shapes import DegenerateShapeError, StarShape, VoxelSet, load_shape, save_shape
from .tension import ModelParams, SurfaceTension, WulffShape, eval_tension, surface_energy, wulff_shape

__version__ = "0.1.0"
