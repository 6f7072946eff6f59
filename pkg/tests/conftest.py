import numpy as np
import pytest

from cyclematch import shapes
from cyclematch.cycles import decompose
from cyclematch.mesh import build_shape_graph


@pytest.fixture
def tetra():
    return shapes.tetrahedron()


@pytest.fixture
def icosa():
    return shapes.icosahedron()


@pytest.fixture
def tetra_graph(tetra):
    return build_shape_graph(tetra)


@pytest.fixture
def icosa_graph(icosa):
    return build_shape_graph(icosa)


@pytest.fixture
def tetra_cycles(tetra_graph):
    return decompose(tetra_graph)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; the line is echoed in the run summary."""
    def check(number, ok, detail):
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
