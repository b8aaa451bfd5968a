import numpy as np
import pytest

from bispec.model import BipartiteGraph

ACCEPTANCE_LINES = []


def random_graph(rng, n1, n2, p) -> BipartiteGraph:
    return BipartiteGraph.from_dense(rng.random((n1, n2)) < p)


def dense_hollow_gram(A: BipartiteGraph) -> np.ndarray:
    D = A.to_dense()
    G = D @ D.T
    np.fill_diagonal(G, 0)
    return G


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
