import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gamow_lab.geometry import angular_modes, grid_from_resolution
from gamow_lab.shapes import StarShape

settings.register_profile("lab", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

ACCEPTANCE_LINES = []


def random_star(rng, n, resolution=None, amplitude=0.3, degree=4, radius=1.0, center_scale=0.2):
    """Smooth random star-shaped set: radius * (1 + low-order modes), random center."""
    grid = grid_from_resolution(n, resolution if resolution is not None else (256 if n == 2 else 32))
    modes = angular_modes(grid, degree)
    coeffs = rng.normal(size=len(modes)) * amplitude / np.sqrt(len(modes))
    r = radius * np.maximum(1.0 + np.tensordot(coeffs, modes, axes=1), 0.3)
    return StarShape(n, rng.normal(size=n) * center_scale, r)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def record(criterion, passed, detail):
    line = f"CRITERION {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
