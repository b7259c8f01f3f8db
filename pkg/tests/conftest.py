"""
Shared fixtures: bundled scenarios, plans and seeded generators.
"""

import numpy as np
import pytest

from fpsteer.core.distribution_catalog import Gaussian
from fpsteer.core.moment_algebra import MomentSequence
from fpsteer.core.scenario import load_scenario, make_scenario
from fpsteer.core.steering_planner import interpolate_states
from fpsteer.utils.config import Config


@pytest.fixture(scope="session")
def example1():
    """Bundled Gaussian-mixture scenario."""
    return load_scenario("example1")


@pytest.fixture(scope="session")
def example2():
    """Bundled generalized-logistic-mixture scenario."""
    return load_scenario("example2")


@pytest.fixture(scope="session")
def example1_plan(example1):
    """Interpolated moment plan of the first example."""
    return interpolate_states(
        example1.initial_moments(), example1.target_moments(), example1.horizon
    )


@pytest.fixture(scope="session")
def example2_plan(example2):
    """Interpolated moment plan of the second example."""
    return interpolate_states(
        example2.initial_moments(), example2.target_moments(), example2.horizon
    )


@pytest.fixture(scope="session")
def shift_scenario():
    """
    One-step Gaussian instance N(3, 1) -> N(2, 4) with a positive optimal gain.

    Every kernel along c in [0, 1] is Gaussian, so realizations are exact.
    """
    return make_scenario(
        initial=Gaussian(3.0, 1.0),
        target=Gaussian(2.0, 4.0),
        a=0.5,
        b=0.2,
        noise_variance=0.01,
        horizon=1,
        name="shift",
    )


@pytest.fixture
def standard_normal_moments():
    """(0, 1, 0, 3)."""
    return MomentSequence.of([0.0, 1.0, 0.0, 3.0])


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def config():
    """Default configuration."""
    return Config()
