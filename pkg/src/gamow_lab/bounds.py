"""Closed-form critical masses, the ball-versus-split crossover and the modulus bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ball_volume, sphere_area
from .riesz import EnergyBreakdown, riesz_ball
from .tension import SurfaceTension

MODULUS_EPS = (0.01, 0.05, 0.1, 0.5)


class BracketError(RuntimeError):
    """No sign change of ball minus split energy on the scanned mass range."""


def _check_lambda(n: int, lam: float) -> None:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < lam < n:
        raise ValueError(f"lambda must lie in (0, {n}), got {lam}")


def classical_critical_mass() -> float:
    """Ball/two-ball crossover for n=3, lambda=1: 5(2^{1/3}-1)/(1-2^{-2/3})."""
    return 5.0 * (2.0 ** (1 / 3) - 1.0) / (1.0 - 2.0 ** (-2 / 3))


def conjectured_critical_mass(n: int, lam: float) -> float:
    """Mass where one ball and two far-apart half-mass balls cost the same (f = |x|)."""
    _check_lambda(n, lam)
    ratio = (2.0 ** (1.0 / n) - 1.0) / (1.0 - 2.0 ** ((lam - n) / n))
    base = ratio * sphere_area(n) / riesz_ball(n, lam)
    return ball_volume(n) * base ** (n / (n - lam + 1.0))


def slicing_constant(n: int, f: SurfaceTension | None = None) -> float:
    """a_{n,f} = 2 max f * H^{n-1}(S^{n-1}) / |B^{n-1}|."""
    fmax = 1.0 if f is None else f.max_on_sphere()
    return 2.0 * fmax * sphere_area(n) / ball_volume(n - 1)


def nonexistence_mass(n: int, lam: float, f: SurfaceTension | None = None) -> float:
    """Mass above which no minimizer exists, for lambda in (0, 1].

    lambda = 1 is pure arithmetic (a_{n,f}); below 1 the positive-power ball
    energy D_{lambda-1}(B) enters.
    """
    _check_lambda(n, lam)
    if lam > 1:
        raise ValueError("the non-existence mass is available for lambda in (0, 1] only")
    if f is not None and f.n != n:
        raise ValueError("tension dimension differs from n")
    if lam == 1:
        return slicing_constant(n, f)
    fmax = 1.0 if f is None else f.max_on_sphere()
    ball = ball_volume(n)
    base = ball / ball_volume(n - 1) * fmax * sphere_area(n) / riesz_ball(n, lam - 1.0)
    return ball * base ** (n / (n - lam + 1.0))


def split_function(s: float, n: int):
    """h(s) = (1-s)^{(n-1)/n} + s^{(n-1)/n}: surface of a split relative to one ball."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("split fraction must lie in [0, 1]")
    p = (n - 1.0) / n
    out = (1.0 - s) ** p + s ** p
    return float(out) if out.ndim == 0 else out


def ball_energy(n: int, lam: float, m: float) -> EnergyBreakdown:
    """Energy of a ball of mass m with isotropic unit tension."""
    _check_lambda(n, lam)
    if not m > 0:
        raise ValueError("mass must be positive")
    ball = ball_volume(n)
    surface = n * ball ** (1.0 / n) * m ** ((n - 1.0) / n)
    riesz = (m / ball) ** ((2.0 * n - lam) / n) * riesz_ball(n, lam)
    return EnergyBreakdown.from_parts(surface, riesz, m)


def _ball_total(n: int, lam: float, m: float) -> float:
    return ball_energy(n, lam, m).total if m > 0 else 0.0


def two_cluster_energy(n: int, lam: float, m: float, s: float = 0.5) -> float:
    """Two balls of masses s*m and (1-s)*m at infinite distance."""
    if not 0 <= s <= 1:
        raise ValueError("split fraction must lie in [0, 1]")
    return _ball_total(n, lam, s * m) + _ball_total(n, lam, (1.0 - s) * m)


def crossover_mass(n: int, lam: float, tol: float = 1e-6, lo: float = 1e-6, hi: float = 1e3) -> float:
    """Root of ball_energy(m) = two_cluster_energy(m, 1/2) by scan and bisection."""
    _check_lambda(n, lam)
    g = lambda m: _ball_total(n, lam, m) - two_cluster_energy(n, lam, m, 0.5)
    grid = np.geomspace(lo, hi, 400)
    values = np.array([g(m) for m in grid])
    change = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
    if len(change) == 0:
        raise BracketError(f"no crossover in [{lo}, {hi}] for n={n}, lambda={lam}")
    a, b = grid[change[0]], grid[change[0] + 1]
    ga = values[change[0]]
    while (b - a) > tol * a:
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0:
            return float(mid)
        if np.sign(gm) == np.sign(ga):
            a, ga = mid, gm
        else:
            b = mid
    return float(0.5 * (a + b))


def modulus_upper_bound(n: int, lam: float, m: float, eps: float, wulff_volume: float) -> float:
    """max{(m/|K|)^{(n-1)/n}, H^{n-1}(S^{n-1})/(2(n-lam)) (m/|B|)^{(n-lam)/n} m} * eps."""
    _check_lambda(n, lam)
    if not m > 0:
        raise ValueError("mass must be positive")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if not wulff_volume > 0:
        raise ValueError("Wulff volume must be positive")
    first = (m / wulff_volume) ** ((n - 1.0) / n)
    second = sphere_area(n) / (2.0 * (n - lam)) * (m / ball_volume(n)) ** ((n - lam) / n) * m
    return max(first, second) * eps


@dataclass(frozen=True)
class MassReport:
    n: int
    lam: float
    conjectured_m_star: float
    crossover_mass_numeric: float
    nonexistence_mass: float | None
    classical_m_star: float | None
    modulus_bound_at: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float | None:
        if self.nonexistence_mass is None:
            return None
        return self.nonexistence_mass / self.conjectured_m_star

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "conjectured_m_star": self.conjectured_m_star,
            "crossover_mass_numeric": self.crossover_mass_numeric,
            "nonexistence_mass": self.nonexistence_mass,
            "classical_m_star": self.classical_m_star,
            "ratio": self.ratio,
            "modulus_bound_at": {f"{eps:g}": v for eps, v in self.modulus_bound_at.items()},
        }


def mass_report(n: int, lam: float, f: SurfaceTension | None = None, tol: float = 1e-6) -> MassReport:
    """All masses for one (n, lambda); the modulus bound is tabulated at m_*."""
    f = SurfaceTension.isotropic(n) if f is None else f
    m_star = conjectured_critical_mass(n, lam)
    isotropic_unit = f.kind == "isotropic" and f.scale == 1.0
    return MassReport(
        n=n,
        lam=float(lam),
        conjectured_m_star=m_star,
        crossover_mass_numeric=crossover_mass(n, lam, tol),
        nonexistence_mass=nonexistence_mass(n, lam, f) if lam <= 1 else None,
        classical_m_star=classical_critical_mass() if (n == 3 and lam == 1 and isotropic_unit) else None,
        modulus_bound_at={eps: modulus_upper_bound(n, lam, m_star, eps, f.wulff_volume())
                          for eps in MODULUS_EPS},
    )
