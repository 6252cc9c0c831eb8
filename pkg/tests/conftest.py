import pytest

from lmm_discover.experiments import LongTimeConfig, run_longtime
from lmm_discover.reference import cubic_2d, exact_dynamics_on_grid, integrate_reference

LADDER = (0.02, 0.01, 0.005, 0.0025)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def cubic_ladder():
    """Reference (state, dynamics) on [0, 0.2] for each mesh size of the standard ladder."""
    sys = cubic_2d()
    out = {}
    for h in LADDER:
        x = integrate_reference(sys, 0.0, 0.2, h)
        out[h] = (x, exact_dynamics_on_grid(sys, x))
    return out


@pytest.fixture(scope="session")
def longtime_default():
    cfg = LongTimeConfig([("AB", 2), ("BDF", 2), ("AM", 1), ("AM", 2)])
    return run_longtime(cfg)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
