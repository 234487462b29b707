import pytest

from walktest.graphs import (
    Graph,
    complete_graph,
    cycle_graph,
    erdos_renyi_graph,
    random_regular_graph,
)


@pytest.fixture(scope="session")
def k16() -> Graph:
    return complete_graph(16)


@pytest.fixture(scope="session")
def k8() -> Graph:
    return complete_graph(8)


@pytest.fixture(scope="session")
def c6() -> Graph:
    return cycle_graph(6)


@pytest.fixture(scope="session")
def er64() -> Graph:
    g = erdos_renyi_graph(64, 0.3, 42)
    assert g.connected and not g.bipartite
    return g


@pytest.fixture(scope="session")
def rr64() -> Graph:
    g = random_regular_graph(64, 8, 7)
    assert g.connected
    return g
