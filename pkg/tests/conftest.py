import numpy as np
import pytest

from helpers import ACCEPTANCE, preset_system


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:>4}  {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def small_system():
    """Case I(a) dark on a coarse mesh, for fast structural tests."""
    return preset_system("case_I_a_dark", n_per_region=24, grading_ratio=4.0)[1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
