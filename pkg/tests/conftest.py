import numpy as np
import pytest

from brsup.model import Anchor, Grid, Variogram, build_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def line2():
    """Points {0, 1}, gamma(h) = |h|, anchored at 0: C = [[0, 0], [0, 2]]."""
    return build_model(Grid(np.array([[0.0], [1.0]])), Variogram(1.0, 1.0), Anchor.point(0.0))


@pytest.fixture(scope="session")
def exch2():
    """Two points symmetric about an off-grid anchor: an exchangeable pair."""
    return build_model(Grid(np.array([[-1.0], [1.0]])), Variogram(1.0, 1.0), Anchor.point(0.0))


@pytest.fixture(scope="session")
def tri3():
    """Three points with a non-singular covariance (anchor off the grid)."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return build_model(Grid(pts), Variogram(1.0, 1.5), Anchor.point((1 / 3, 1 / 3)))


@pytest.fixture(scope="session")
def square_small():
    """6 x 6 corner-anchored square grid, a fast stand-in for the big one."""
    grid = Grid.regular([(0.0, 5.0, 1.0), (0.0, 5.0, 1.0)])
    return build_model(grid, Variogram(5.0, 1.5), Anchor.corners())


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
