"""
Shared fixtures for the toolkit tests.

End-to-end runs marked ``slow`` are skipped unless pytest is started with
``--runslow``.
"""

import logging

import numpy as np
import pytest

from cdkit.models import landau_zener, tfim
from cdkit.operators import LCUHamiltonian, Schedule, track_path


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def reset_cli_loggers():
    """The CLI binds handlers to the captured stdout of the test that ran it."""
    yield
    for name in ("cdkit", "run_pipeline"):
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            handler.close()
        logger.handlers = []
        logger.propagate = True


@pytest.fixture(scope="session")
def lz():
    return landau_zener()


@pytest.fixture(scope="session")
def lz_path(lz):
    return track_path(lz.hamiltonian)


@pytest.fixture(scope="session")
def small_tfim():
    return tfim(3, lam_range=(0.05, 0.25))


@pytest.fixture(scope="session")
def small_tfim_path(small_tfim):
    return track_path(small_tfim.hamiltonian)


@pytest.fixture
def constant_h():
    """H = X + Z/2 with no λ dependence."""
    return LCUHamiltonian(
        paulis=("X", "Z"),
        initial=[1.0, 0.5],
        problem=[0.0, 0.0],
        schedule=Schedule.linear(),
        domain=(0.0, 1.0),
        name="constant",
    )


@pytest.fixture
def commuting_h():
    """H(λ) = λZ on [0.5, 1.5]; ∂H commutes with H everywhere."""
    return LCUHamiltonian(
        paulis=("Z",),
        initial=[0.0],
        problem=[1.0],
        schedule=Schedule.linear(),
        domain=(0.5, 1.5),
        name="lambda_z",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
