import numpy as np
import pytest

from hflab.framing import Framing, gauge_apply, reference_left_framing
from hflab.grid import build_grid
from hflab.harness import random_deformation


@pytest.fixture(scope="session")
def grid():
    return build_grid(16, 16, 32)


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(8, 8, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def perturbed(grid, eps=0.3, seed=7):
    return gauge_apply(reference_left_framing(grid), random_deformation(grid, seed, eps))


def random_positive(grid, rng, scale=0.4):
    """exp of a random matrix at every node, hence det > 0."""
    from scipy.linalg import expm

    m = scale * rng.standard_normal(grid.shape + (3, 3))
    return expm(m)


def as_framing(grid, A):
    return Framing(grid, A)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
