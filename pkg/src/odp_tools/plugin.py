"""Pytest plugins"""
import io
import os
from typing import Iterable, Optional

import numpy as np
import pytest

from odp_tools.extmem import ExternalMemory, capture_trace
from odp_tools.noise import LaplaceNoise
from odp_tools.queries import Database

SEED_OPTION = "--odp-seed"
SEED_OPTION_HELP = "Seed of the random generator handed out by the `rng` fixture"
DEFAULT_TEST_SEED = 20240607


def pytest_addoption(parser):
    parser.addoption(SEED_OPTION, help=SEED_OPTION_HELP, type=int, default=None)
    parser.addini(SEED_OPTION, SEED_OPTION_HELP, default=str(DEFAULT_TEST_SEED))


def get_test_seed(pytestconfig) -> int:
    if pytestconfig.getoption(SEED_OPTION, default=None) is not None:
        return pytestconfig.getoption(SEED_OPTION)
    return int(pytestconfig.getini(SEED_OPTION))


@pytest.fixture(scope="session", autouse=True)
def remove_click_options_environment_variables():
    """Remove the environment variables used by click options in the CLI.
    Otherwise they will interfere with the tests.
    """
    for env_var in list(os.environ.keys()):
        if env_var.startswith("ODP_"):
            del os.environ[env_var]


@pytest.fixture()
def rng(pytestconfig):
    """A numpy generator seeded from `--odp-seed`, fresh for every test"""
    return np.random.default_rng(get_test_seed(pytestconfig))


@pytest.fixture()
def memory():
    """Empty external memory that keeps every access event"""
    return ExternalMemory()


@pytest.fixture()
def make_database(memory):
    """Fixture to load records into the `memory` fixture

    Usage: `make_database([1, 2, 2, 3])` gives records with ids 0..3 and those types
    """

    def make_database_function(
        types: Iterable[int], *, domain: Optional[int] = None, array_id: str = "db"
    ) -> Database:
        return Database.from_types(memory, types, domain=domain, array_id=array_id)

    return make_database_function


@pytest.fixture()
def zero_noise(rng):
    """Noise source whose draws are all 0, for exact comparisons. NOT private"""
    return LaplaceNoise(rng, zero_noise=True)


@pytest.fixture()
def traced(memory):
    """Runs a callable and returns the trace of the accesses it made to `memory`

    Usage: `trace = traced(lambda: oblivious_sort(arr, key))`
    """

    def traced_function(run):
        return capture_trace(memory, run)

    return traced_function


def pytest_report_header(config):
    msgs = io.StringIO()
    msgs.write(f"odp-tools seed: {get_test_seed(config)}\n")
    msgs.write(f"numpy version: {np.__version__}\n")
    return msgs.getvalue()
