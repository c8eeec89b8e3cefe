import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from anarchy_lab.network import (
    CostPolynomial,
    Demand,
    EndHost,
    Link,
    Network,
    NoPath,
    ParseError,
    build_universe,
    enumerate_paths,
    network_from_dict,
    network_to_dict,
    read_network,
    validate,
    write_network,
)
from anarchy_lab.closed_form import LadderSpec
from anarchy_lab.topologies import fig1_network, gen_ladder

from conftest import random_network


def test_cost_polynomial_evaluation():
    c = CostPolynomial((1.0, 2.0, 3.0))
    assert c(0.0) == 1.0
    assert c(2.0) == pytest.approx(1 + 4 + 12)
    assert c.derivative(2.0) == pytest.approx(2 + 12)
    assert c.derivative(2.0, 2) == pytest.approx(6)
    assert c.antiderivative(2.0) == pytest.approx(2 + 4 + 8)
    assert CostPolynomial.monomial(3, 2.0)(2.0) == pytest.approx(16)


def test_fig1_paths():
    paths = enumerate_paths(fig1_network(), ("e1", "e4"))
    assert sorted(p.links for p in paths) == [("alpha",), ("gamma", "beta")]
    # the zero free-flow path ranks first
    assert paths[0].links == ("gamma", "beta")


def test_single_link_network_has_one_path():
    net = Network(("A", "B"), (Link("l", ("A", "B"), CostPolynomial((1.0,))),),
                  (EndHost("s", "A"), EndHost("t", "B")), (Demand("s", "t", 1.0),))
    for k in (None, 1, 5):
        assert len(enumerate_paths(net, ("s", "t"), k)) == 1


def test_ladder_path_counts():
    net = gen_ladder(LadderSpec(2, 1, 1.0, 1.0))
    paths = enumerate_paths(net, ("e11", "e12"))
    assert [p.links for p in paths] == [("h1",), ("v11", "h2", "v12")]
    net3 = gen_ladder(LadderSpec(3, 1, 1.0, 1.0))
    assert len(enumerate_paths(net3, ("e21", "e22"))) == 3


def test_k_limit_takes_prefix():
    net = gen_ladder(LadderSpec(4, 2, 1.0, 1.0))
    full = enumerate_paths(net, ("e21", "e22"))
    for k in (1, 2, 3):
        assert enumerate_paths(net, ("e21", "e22"), k) == full[:k]
    with pytest.raises(ValueError):
        enumerate_paths(net, ("e21", "e22"), 0)


def test_no_path_raises():
    net = Network(("A", "B", "C"), (Link("l", ("A", "B"), CostPolynomial((1.0,))),),
                  (EndHost("s", "A"), EndHost("t", "C")), (Demand("s", "t", 1.0),))
    with pytest.raises(NoPath):
        enumerate_paths(net, ("s", "t"))
    assert "NoPath" in validate(net).kinds()


def test_validate_clean_and_negative_coefficient():
    assert validate(fig1_network()).ok
    net = Network(("A", "B"), (Link("bad", ("A", "B"), CostPolynomial((1.0, -2.0))),),
                  (EndHost("s", "A"), EndHost("t", "B")), (Demand("s", "t", 1.0),))
    report = validate(net)
    assert not report.ok
    [finding] = report.findings
    assert "bad" in str(finding) and "coefficient[1]" in str(finding)


def _nx_paths(net, src, dst):
    g = nx.MultiGraph()
    g.add_nodes_from(net.ases)
    for l in net.links:
        g.add_edge(*l.endpoints, key=l.id)
    if src == dst:
        return {()}
    return {tuple(key for _, _, key in p) for p in nx.all_simple_edge_paths(g, src, dst)}


@given(seed=st.integers(0, 10_000), n=st.integers(2, 8))
def test_enumeration_matches_exhaustive_oracle(seed, n):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n_ases=n, n_links=int(rng.integers(n - 1, n + 4)), n_ods=1)
    od = net.demands[0].od
    src, dst = (net.host(h).home_as for h in od)
    paths = enumerate_paths(net, od)
    assert {p.links for p in paths} == _nx_paths(net, src, dst)
    assert len(paths) == len({p.links for p in paths})
    # deterministic total order
    assert enumerate_paths(net, od) == paths
    keys = [(sum(net.link(l).cost.coefficients[0] for l in p.links), len(p.links), p.links) for p in paths]
    assert keys == sorted(keys)
    for p in paths:
        assert p.ases[0] == src and p.ases[-1] == dst
        assert len(set(p.ases)) == len(p.ases)
        for l, a, b in zip(p.links, p.ases, p.ases[1:]):
            assert set(net.link(l).endpoints) == {a, b}


def test_universe_layout(fig1_universe):
    U = fig1_universe
    assert len(U) == 2 and U.ods == (("e1", "e4"),)
    assert U.incidence.shape == (2, 3)
    assert U.hosts == ("e1",)


def test_zero_demand_dropped():
    net = fig1_network().with_demands([Demand("e1", "e4", 0.0), Demand("e2", "e3", 1.0)])
    U = build_universe(net)
    assert U.ods == (("e2", "e3"),)


def test_document_round_trip(tmp_path):
    net = fig1_network()
    path = tmp_path / "net.json"
    write_network(net, path)
    back = read_network(path)
    assert network_to_dict(back) == network_to_dict(net)


def test_document_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 1,\n "ases": [}')
    with pytest.raises(ParseError) as info:
        read_network(path)
    assert info.value.line == 2
    with pytest.raises(ParseError):
        network_from_dict({"format_version": 7})
    doc = network_to_dict(fig1_network())
    del doc["links"][0]["endpoints"]
    with pytest.raises(ParseError):
        network_from_dict(json.loads(json.dumps(doc)))
