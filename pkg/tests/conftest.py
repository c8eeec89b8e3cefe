import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from anarchy_lab.flows import PathFlowPattern
from anarchy_lab.network import CostPolynomial, Demand, EndHost, Link, Network, build_universe

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_network(rng: np.random.Generator, n_ases=None, n_links=None, n_ods=None, max_degree=3) -> Network:
    """Small connected multigraph with random polynomial costs and 1-2 demands."""
    n_ases = n_ases or int(rng.integers(2, 4))
    n_links = n_links or int(rng.integers(n_ases - 1, 5))
    ases = tuple(f"A{i}" for i in range(n_ases))
    pairs = [(ases[i], ases[i + 1]) for i in range(n_ases - 1)]  # spanning chain keeps it connected
    while len(pairs) < n_links:
        a, b = rng.choice(n_ases, size=2, replace=False)
        pairs.append((ases[a], ases[b]))
    links = []
    for i, ends in enumerate(pairs):
        deg = int(rng.integers(0, max_degree + 1))
        coeffs = np.round(rng.uniform(0, 2, size=deg + 1), 3)
        coeffs[rng.random(deg + 1) < 0.3] = 0.0
        if deg > 0 and coeffs[1:].sum() == 0:
            coeffs[-1] = 1.0
        links.append(Link(f"l{i}", ends, CostPolynomial(tuple(float(c) for c in coeffs))))
    hosts = tuple(EndHost(f"e{a}", a) for a in ases)
    n_ods = n_ods or int(rng.integers(1, 3))
    demands = []
    seen = set()
    while len(demands) < n_ods:
        s, t = rng.choice(n_ases, size=2, replace=False)
        if (s, t) in seen:
            continue
        seen.add((s, t))
        demands.append(Demand(hosts[s].id, hosts[t].id, float(np.round(rng.uniform(0.2, 2.0), 3))))
    return Network(ases, tuple(links), hosts, tuple(demands), "random")


def random_pattern(U, rng: np.random.Generator) -> PathFlowPattern:
    x = np.zeros(len(U))
    for i, vol in enumerate(U.volumes):
        sl = U.od_slice(i)
        w = rng.dirichlet(np.ones(sl.stop - sl.start))
        x[sl] = vol * w
    return PathFlowPattern(U, x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fig1_universe():
    from anarchy_lab.topologies import fig1_network
    return build_universe(fig1_network())
