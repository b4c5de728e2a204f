import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fiber():
    from isrs_gn.units import table1_fiber

    return table1_fiber()


@pytest.fixture(scope="session")
def fb(fiber):
    return fiber.derived()


@pytest.fixture(scope="session")
def grid251():
    from isrs_gn.raman import SpectralLoad

    return SpectralLoad.uniform(251, 40.005e9, 40.004e9, 1e-3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
