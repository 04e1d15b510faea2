import numpy as np
import pytest

from inafl import kernels
from inafl.harness import ScenarioConfig, generate_topology
from inafl.network import GBPS, ModelSize, Topology

BACKENDS = ["numpy"] + (["numba"] if kernels.simplex_iterate_nb is not None else [])

D232 = ModelSize.from_megabytes(232)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def default_topology():
    return generate_topology(ScenarioConfig(seed=0))


def line_topology(K, M, reach=None, fr=1.0, bk=1.0, wu=2.0, direct=False):
    """Uniform-capacity topology; everyone reaches everything unless told otherwise."""
    if reach is None:
        reach = np.ones((K, M), dtype=bool)
    edge_xy = np.column_stack([np.arange(M) * 100.0, np.zeros(M)])
    user_xy = np.column_stack([np.linspace(0, 100.0 * max(M - 1, 0), K), np.ones(K)])
    return Topology(np.full(M, fr * GBPS), np.full(M, bk * GBPS), 2 * GBPS, wu * GBPS,
                    reach, edge_xy=edge_xy, user_xy=user_xy, allow_direct_cloud=direct)


# filled by the acceptance suite, echoed once at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
