import numpy as np
import pytest

from topomol.molio import Atom, Bond, MolGraph

ORGANIC_Z = [6, 6, 6, 7, 8, 9, 16, 17]  # carbon-heavy palette


def random_graph(rng, max_nodes=12, max_edges=16, z_choices=ORGANIC_Z):
    """Random simple graph with random atomic numbers; not necessarily
    connected, may contain cycles."""
    n = int(rng.integers(1, max_nodes + 1))
    nodes = [Atom(int(rng.choice(z_choices)), i) for i in range(n)]
    possible = [(u, v) for u in range(n) for v in range(u + 1, n)]
    m = int(rng.integers(0, min(max_edges, len(possible)) + 1))
    edges = []
    if m:
        chosen = rng.choice(len(possible), size=m, replace=False)
        edges = [Bond(*possible[int(k)], "single") for k in chosen]
    return MolGraph(nodes, edges)


def random_tree(rng, n, z_choices=ORGANIC_Z):
    nodes = [Atom(int(rng.choice(z_choices)), i) for i in range(n)]
    edges = [Bond(int(rng.integers(0, i)), i, "single") for i in range(1, n)]
    return MolGraph(nodes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# ---------------------------------------------------------------------------
# End-to-end check reporting: each check records one line, printed after the
# run so the outcome survives pytest's output capture.

ACCEPTANCE_LINES = []


def record_acceptance(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    ACCEPTANCE_LINES.append(f"[{status}] {name}{suffix}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance checks")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
