import numpy as np
import pytest
from hypothesis import settings

from caosim.domain import HorizontalGrid, VerticalGrid

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240601))


@pytest.fixture
def hg8():
    return HorizontalGrid(8, 8)


@pytest.fixture
def ocean9():
    return VerticalGrid.ocean(9)


@pytest.fixture
def atmos9():
    return VerticalGrid.atmosphere(9)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
