import random

import pytest

from ats.params import medium_cycle, toy_cycle


@pytest.fixture(scope="session")
def toy():
    return toy_cycle()


@pytest.fixture(scope="session")
def med():
    return medium_cycle()


@pytest.fixture()
def rng():
    return random.Random(0xA75)


def pytest_addoption(parser):
    parser.addoption(
        "--skip-acceptance",
        action="store_true",
        help="skip the (slow) acceptance criteria module",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-acceptance"):
        skip = pytest.mark.skip(reason="--skip-acceptance given")
        for item in items:
            if "acceptance" in item.nodeid:
                item.add_marker(skip)
