"""Synthetic networks (parallel links, ladders, the two worked examples) and Abilene ingestion."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path as FilePath

import numpy as np

from .closed_form import LadderSpec, ParallelLinksSpec
from .network import (
    CostPolynomial,
    Demand,
    EndHost,
    Link,
    Network,
    ParseError,
    network_from_dict,
    read_topology_document,
)

EARTH_RADIUS_KM = 6371.0
DEFAULT_TOTAL_DEMAND = 10.0


class MissingCoordinates(ValueError):
    pass


class AsymmetricMatrixWarning(UserWarning):
    pass


def _integer_degree(p) -> int:
    if float(p) != int(p):
        raise ValueError(f"network generators need an integer polynomial degree, got p={p!r}")
    return int(p)


def gen_parallel_links(spec: ParallelLinksSpec) -> Network:
    """ASes O and D joined by m constant links (cost d^p) and one link beta (cost f^p)."""
    p = _integer_degree(spec.p)
    links = [Link(f"alpha{i}", ("O", "D"), CostPolynomial.constant(spec.d ** p)) for i in range(1, spec.m + 1)]
    links.append(Link("beta", ("O", "D"), CostPolynomial.monomial(p)))
    hosts = [EndHost(f"e{k}", "O") for k in range(1, spec.K + 1)] + [EndHost("eD", "D")]
    demands = [Demand(f"e{k}", "eD", spec.d / spec.K) for k in range(1, spec.K + 1)]
    name = f"parallel(m={spec.m},p={spec.p},d={spec.d},K={spec.K})"
    return Network(("O", "D"), tuple(links), tuple(hosts), tuple(demands), name)


def ladder_link_ids(H: int):
    """(horizontal ids, vertical ids as {(level, side): id})."""
    horizontal = [f"h{i}" for i in range(1, H + 1)]
    vertical = {(i, j): f"v{i}{j}" for i in range(1, H) for j in (1, 2)}
    return horizontal, vertical


def gen_ladder(spec: LadderSpec) -> Network:
    """H rungs h_i (cost f^p) between A_i1 and A_i2, rails v_ij (cost t f); demand d across each rung."""
    if spec.H < 2:
        raise ValueError(f"ladder needs H >= 2, got H={spec.H}")
    p = _integer_degree(spec.p)
    H = spec.H
    ases = tuple(f"A{i}{j}" for i in range(1, H + 1) for j in (1, 2))
    links = [Link(f"h{i}", (f"A{i}1", f"A{i}2"), CostPolynomial.monomial(p)) for i in range(1, H + 1)]
    for i in range(1, H):
        for j in (1, 2):
            links.append(Link(f"v{i}{j}", (f"A{i}{j}", f"A{i + 1}{j}"), CostPolynomial.monomial(1, spec.t)))
    hosts = [EndHost(f"e{i}{j}", f"A{i}{j}") for i in range(1, H + 1) for j in (1, 2)]
    demands = [Demand(f"e{i}1", f"e{i}2", spec.d) for i in range(1, H + 1)]
    name = f"ladder(H={H},p={spec.p},d={spec.d},t={spec.t})"
    return Network(ases, tuple(links), tuple(hosts), tuple(demands), name)


def fig1_network() -> Network:
    """Three ASes; alpha: A1-A2 cost 1, beta: A2-A3 cost f^2, gamma: A1-A3 cost f; e1 -> e4 demand 1."""
    links = (
        Link("alpha", ("A1", "A2"), CostPolynomial.constant(1.0)),
        Link("beta", ("A2", "A3"), CostPolynomial.monomial(2)),
        Link("gamma", ("A1", "A3"), CostPolynomial.monomial(1)),
    )
    hosts = (EndHost("e1", "A1"), EndHost("e2", "A2"), EndHost("e3", "A3"), EndHost("e4", "A2"))
    return Network(("A1", "A2", "A3"), links, hosts, (Demand("e1", "e4", 1.0),), "fig1")


def fig2_network() -> Network:
    """One end-host e with demand 1 over alpha (f + 1/2) or beta (2).

    The background of one flow unit per link is carried by end-host ``bg``,
    which the worked example keeps frozen at (1, 1).
    """
    links = (
        Link("alpha", ("O", "D"), CostPolynomial((0.5, 1.0))),
        Link("beta", ("O", "D"), CostPolynomial.constant(2.0)),
    )
    hosts = (EndHost("e", "O"), EndHost("bg", "O"), EndHost("t", "D"))
    demands = (Demand("e", "t", 1.0), Demand("bg", "t", 2.0))
    return Network(("O", "D"), links, hosts, demands, "fig2")


# -- Abilene -------------------------------------------------------------------

@dataclass(frozen=True)
class AbileneConfig:
    """Knobs for turning the PoP topology and traffic matrix into a network.

    ``delta_scale`` (propagation cost per km) and ``demand_scale`` are resolved
    automatically when left as None: total demand is normalized to 10 flow
    units, and the delay scale is chosen so the mean delay offset equals the
    mean queueing cost ``f^2`` at the end-host optimum.
    """

    topology_path: str | None = None
    traffic_matrix_path: str | None = None
    delta_scale: float | None = None
    demand_scale: float | None = None
    hosts_per_pop: int = 1

    def __post_init__(self):
        if self.delta_scale is not None and not self.delta_scale > 0:
            raise ValueError("delta_scale must be > 0")
        if self.demand_scale is not None and not self.demand_scale > 0:
            raise ValueError("demand_scale must be > 0")
        if int(self.hosts_per_pop) != self.hosts_per_pop or self.hosts_per_pop < 1:
            raise ValueError("hosts_per_pop must be a positive integer")


@dataclass(frozen=True)
class AbileneLoad:
    network: Network
    delta_scale: float
    demand_scale: float
    distances_km: dict
    symmetrized: bool
    max_asymmetry: float
    ignored_diagonal: float
    matrix_total: float

    def config_echo(self) -> dict:
        return {
            "delta_scale": self.delta_scale,
            "demand_scale": self.demand_scale,
            "symmetrized": self.symmetrized,
            "max_asymmetry": self.max_asymmetry,
            "ignored_diagonal": self.ignored_diagonal,
            "matrix_total_offdiagonal": self.matrix_total,
        }


def vendored_abilene_paths() -> tuple[str, str]:
    base = resources.files("anarchy_lab") / "data"
    return str(base / "abilene_topology.json"), str(base / "abilene_tm.csv")


def great_circle_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def read_traffic_matrix(path) -> tuple[list[str], np.ndarray]:
    """Comma-separated square matrix with a header row of PoP names."""
    path = FilePath(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    rows = [(i + 1, r) for i, r in enumerate(rows) if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(path, None, "empty traffic matrix")
    header_line, header = rows[0]
    names = [c.strip() for c in header]
    if len(set(names)) != len(names) or not all(names):
        raise ParseError(path, header_line, "header must list distinct PoP names")
    n = len(names)
    if len(rows) - 1 != n:
        raise ParseError(path, None, f"expected {n} matrix rows, found {len(rows) - 1}")
    M = np.zeros((n, n))
    for i, (line, row) in enumerate(rows[1:]):
        if len(row) != n:
            raise ParseError(path, line, f"expected {n} columns, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                M[i, j] = float(cell)
            except ValueError:
                raise ParseError(path, line, f"column {j + 1}: {cell!r} is not a number") from None
            if not math.isfinite(M[i, j]) or M[i, j] < 0:
                raise ParseError(path, line, f"column {j + 1}: entries must be finite and non-negative")
    return names, M


def _abilene_base(cfg: AbileneConfig):
    topo_path, tm_path = vendored_abilene_paths()
    topo_path = cfg.topology_path or topo_path
    tm_path = cfg.traffic_matrix_path or tm_path
    doc = read_topology_document(topo_path)
    base = network_from_dict(doc, source=topo_path)
    coords = {}
    for entry in doc.get("ases", []):
        if isinstance(entry, dict) and "lat" in entry and "lon" in entry:
            coords[str(entry["id"])] = (float(entry["lat"]), float(entry["lon"]))
    missing = [a for a in base.ases if a not in coords]
    if missing:
        raise MissingCoordinates(f"{topo_path}: no lat/lon for {', '.join(missing)}")
    names, M = read_traffic_matrix(tm_path)
    unknown = [n for n in names if n not in base.ases]
    if unknown:
        raise ParseError(tm_path, 1, f"PoPs not in topology: {', '.join(unknown)}")
    return base, coords, names, M, tm_path


def _build(base, coords, names, M, delta_scale, demand_scale, hosts_per_pop):
    dist = {l.id: great_circle_km(coords[l.endpoints[0]], coords[l.endpoints[1]]) for l in base.links}
    links = tuple(Link(l.id, l.endpoints, CostPolynomial((delta_scale * dist[l.id], 0.0, 1.0))) for l in base.links)
    n = hosts_per_pop
    host = (lambda pop, k: pop) if n == 1 else (lambda pop, k: f"{pop}.{k}")
    hosts = tuple(EndHost(host(a, k), a) for a in base.ases for k in range(1, n + 1))
    demands = []
    for i, src in enumerate(names):
        for j, dst in enumerate(names):
            if i == j or M[i, j] <= 0:
                continue
            for k in range(1, n + 1):
                demands.append(Demand(host(src, k), host(dst, k), M[i, j] * demand_scale / n))
    return Network(base.ases, links, hosts, tuple(demands), "abilene"), dist


def resolve_abilene(cfg: AbileneConfig = AbileneConfig(), calibration_cfg=None) -> AbileneLoad:
    """Load Abilene and resolve the automatic scales; see :class:`AbileneConfig`."""
    base, coords, names, M, tm_path = _abilene_base(cfg)
    diag = float(np.trace(M))
    np.fill_diagonal(M, 0.0)
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    symmetrized = asym > 0
    if symmetrized:
        warnings.warn(f"{tm_path}: traffic matrix asymmetric (max |M - M^T| = {asym:.6g}); "
                      "symmetrized by averaging", AsymmetricMatrixWarning, stacklevel=2)
        M = 0.5 * (M + M.T)
    total = float(M.sum())
    demand_scale = cfg.demand_scale
    if demand_scale is None:
        demand_scale = DEFAULT_TOTAL_DEMAND / total if total > 0 else 1.0

    delta_scale = cfg.delta_scale
    if delta_scale is None:
        delta_scale = _calibrate_delta(base, coords, names, M, demand_scale, cfg.hosts_per_pop, calibration_cfg)
    net, dist = _build(base, coords, names, M, delta_scale, demand_scale, cfg.hosts_per_pop)
    return AbileneLoad(net, float(delta_scale), float(demand_scale), dist, symmetrized, asym, diag, total)


def load_abilene(cfg: AbileneConfig = AbileneConfig()) -> Network:
    return resolve_abilene(cfg).network


def _calibrate_delta(base, coords, names, M, demand_scale, hosts_per_pop, solver_cfg, rtol=1e-9, max_rounds=100):
    """Fixed point: mean delay offset == mean f^2 over links at the end-host optimum."""
    from .flows import transfer_pattern
    from .network import build_universe
    from .solvers import solve_social_optimum

    dist = np.array([great_circle_km(coords[l.endpoints[0]], coords[l.endpoints[1]]) for l in base.links])
    if M.sum() <= 0 or dist.mean() <= 0:
        return 1.0
    scale = 0.0
    init = None
    for _ in range(max_rounds):
        net, _ = _build(base, coords, names, M, max(scale, 0.0), demand_scale, hosts_per_pop)
        U = build_universe(net)
        if init is not None:
            init = transfer_pattern(init, U)
        res = solve_social_optimum(U, "endhost", solver_cfg, init=init)
        init = res.pattern
        f = U.incidence.T @ res.pattern.flows
        new = float(np.mean(f ** 2) / dist.mean())
        if scale > 0 and abs(new - scale) <= rtol * scale:
            return new
        scale = new
    return scale
