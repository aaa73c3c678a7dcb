import numpy as np
import pytest
from hypothesis import settings, strategies as st

from tierpart.core import Cell, Design, Floorplan, Net, annotate_lengths

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def make_design(centers, nets=(), size=1.0, floorplan=None, name="t"):
    """Unit-ish cells at the given centers; ``nets`` are pin-index lists."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    cells = [Cell(i, f"c{i}", (float(x) - size / 2, float(y) - size / 2), size, size)
             for i, (x, y) in enumerate(centers)]
    if floorplan is None:
        if len(centers):
            lo = centers.min(axis=0) - size
            hi = centers.max(axis=0) + size
            floorplan = Floorplan(float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))
        else:
            floorplan = Floorplan(0, 0, 1, 1)
    nets = [Net(j, f"n{j}", tuple(p)) for j, p in enumerate(nets)]
    return annotate_lengths(Design(cells, nets, floorplan, name))


@st.composite
def designs(draw, min_cells=1, max_cells=30, max_nets=30, span=100):
    n = draw(st.integers(min_cells, max_cells))
    coords = draw(st.lists(st.tuples(st.integers(0, span), st.integers(0, span)), min_size=n, max_size=n))
    m = draw(st.integers(0, max_nets))
    nets = []
    for _ in range(m):
        k = draw(st.integers(1, min(n, 5)))
        nets.append(draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True)))
    return make_design(coords, nets)


@pytest.fixture
def small_design():
    return make_design([(1, 1), (4, 5), (9, 2), (2, 8)], [(0, 1), (1, 2, 3), (0, 3)])


# One line per acceptance criterion, echoed at the end of every session.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
