import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale Monte Carlo and MCMC studies")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale Monte Carlo or MCMC study")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
