"""Path-flow patterns, link-flow aggregation, the cost functionals and their gradients.

Selfish costs attribute each demand's flow to its origin end-host only, so the
selfish costs of all end-hosts add up to the end-host cost exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .network import Path, PathUniverse, UnknownEndHost

FEASIBILITY_TOL = 1e-9
OBJECTIVES = ("endhost", "operator", "beckmann", "selfish")


class InfeasiblePattern(ValueError):
    pass


@dataclass(frozen=True)
class LinkFlowVector:
    link_ids: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, link_id: str) -> float:
        return float(self.values[self.link_ids.index(link_id)])

    def as_dict(self) -> dict[str, float]:
        return {l: float(v) for l, v in zip(self.link_ids, self.values)}


class PathFlowPattern:
    """Non-negative flow on every path of a universe, summing to each OD's demand.

    Patterns within ``FEASIBILITY_TOL`` of feasibility are renormalized on
    construction; anything further off raises :class:`InfeasiblePattern`.
    """

    __slots__ = ("universe", "flows")

    def __init__(self, universe: PathUniverse, flows, renormalize: bool = True):
        x = np.array(flows, dtype=float).reshape(-1)
        if x.shape != (len(universe),):
            raise InfeasiblePattern(f"expected {len(universe)} path flows, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise InfeasiblePattern("path flows must be finite")
        if np.any(x < -FEASIBILITY_TOL):
            raise InfeasiblePattern(f"negative path flow {x.min():.3g}")
        x = np.maximum(x, 0.0)
        for i, vol in enumerate(universe.volumes):
            sl = universe.od_slice(i)
            total = x[sl].sum()
            if abs(total - vol) > FEASIBILITY_TOL:
                raise InfeasiblePattern(
                    f"OD {universe.ods[i]} carries {total!r}, demand is {vol!r}"
                )
            if renormalize and total > 0 and total != vol:
                x[sl] *= vol / total
        x.setflags(write=False)
        self.universe = universe
        self.flows = x

    @classmethod
    def equal_split(cls, universe: PathUniverse) -> "PathFlowPattern":
        counts = np.diff(universe.od_ptr)
        return cls(universe, np.repeat(universe.volumes / counts, counts))

    @classmethod
    def all_or_nothing(cls, universe: PathUniverse) -> "PathFlowPattern":
        x = np.zeros(len(universe))
        x[universe.od_ptr[:-1]] = universe.volumes
        return cls(universe, x)

    @classmethod
    def from_mapping(cls, universe: PathUniverse, entries: Mapping) -> "PathFlowPattern":
        """Build from ``{path or path key or index: flow}``; missing paths get 0."""
        x = np.zeros(len(universe))
        for key, value in entries.items():
            i = key if isinstance(key, (int, np.integer)) else universe.path_index(key)
            x[i] = value
        return cls(universe, x)

    def __getitem__(self, path) -> float:
        i = path if isinstance(path, (int, np.integer)) else self.universe.path_index(path)
        return float(self.flows[i])

    def __len__(self):
        return len(self.flows)

    def __repr__(self):
        return f"PathFlowPattern({self.universe!r})"

    def od_flows(self, od) -> np.ndarray:
        return self.flows[self.universe.od_slice(od)]

    def entries(self) -> dict[tuple, float]:
        return {p.key: float(v) for p, v in zip(self.universe.paths, self.flows)}

    def with_flows(self, flows) -> "PathFlowPattern":
        return PathFlowPattern(self.universe, flows)


def link_flows(F: PathFlowPattern) -> LinkFlowVector:
    return LinkFlowVector(F.universe.net.link_ids, F.universe.incidence.T @ F.flows)


def _link_arrays(F: PathFlowPattern):
    """Per-link flow, cost, and first derivative of the cost."""
    net = F.universe.net
    f = F.universe.incidence.T @ F.flows
    c = np.array([l.cost(v) for l, v in zip(net.links, f)])
    dc = np.array([l.cost.derivative(v) for l, v in zip(net.links, f)])
    return f, c, dc


def _own_link_flows(F: PathFlowPattern, host: str) -> np.ndarray:
    if not F.universe.net.has_host(host):
        raise UnknownEndHost(host)
    mask = F.universe.host_mask(host)
    return F.universe.incidence.T @ np.where(mask, F.flows, 0.0)


def endhost_cost(F: PathFlowPattern) -> float:
    """Total flow-weighted latency ``sum_l f_l * c_l(f_l)``."""
    f, c, _ = _link_arrays(F)
    return float(f @ c)


def operator_cost(F: PathFlowPattern) -> float:
    """Aggregate congestion ``sum_l c_l(f_l)`` over every link, used or not."""
    _, c, _ = _link_arrays(F)
    return float(c.sum())


def beckmann_potential(F: PathFlowPattern) -> float:
    net = F.universe.net
    f = F.universe.incidence.T @ F.flows
    return float(sum(l.cost.antiderivative(v) for l, v in zip(net.links, f)))


def selfish_cost(F: PathFlowPattern, host: str) -> float:
    """Flow-weighted latency of the flow originating at ``host``.

    Link latencies are evaluated at the total link flow.
    """
    own = _own_link_flows(F, host)
    _, c, _ = _link_arrays(F)
    return float(own @ c)


def path_cost(F: PathFlowPattern, path: Path | int) -> float:
    i = path if isinstance(path, (int, np.integer)) else F.universe.path_index(path)
    _, c, _ = _link_arrays(F)
    return float(F.universe.incidence[i] @ c)


def path_costs(F: PathFlowPattern) -> np.ndarray:
    _, c, _ = _link_arrays(F)
    return F.universe.incidence @ c


def objective_value(F: PathFlowPattern, objective: str, host: str | None = None) -> float:
    if objective == "endhost":
        return endhost_cost(F)
    if objective == "operator":
        return operator_cost(F)
    if objective == "beckmann":
        return beckmann_potential(F)
    if objective == "selfish":
        return selfish_cost(F, host)
    raise ValueError(f"unknown objective {objective!r}")


def gradient(F: PathFlowPattern, objective: str, host: str | None = None) -> np.ndarray:
    """Partial derivatives of an objective with respect to every path flow.

    ``objective`` is one of ``endhost``, ``operator``, ``beckmann`` or
    ``selfish`` (the latter needs ``host``).  For ``selfish`` the entries of
    other end-hosts' paths are the cross-partials ``sum_l own_l * c_l'(f_l)``;
    the host's own entries are its selfish marginal costs.
    """
    f, c, dc = _link_arrays(F)
    A = F.universe.incidence
    if objective == "endhost":
        return A @ (c + f * dc)
    if objective == "operator":
        return A @ dc
    if objective == "beckmann":
        return A @ c
    if objective == "selfish":
        if host is None:
            raise ValueError("selfish gradient needs a host")
        own = _own_link_flows(F, host)
        mask = F.universe.host_mask(host)
        return A @ (own * dc) + np.where(mask, A @ c, 0.0)
    raise ValueError(f"unknown objective {objective!r}")


# -- serialization -------------------------------------------------------------

def pattern_to_dict(F: PathFlowPattern) -> dict:
    return {
        "format_version": 1,
        "flows": [
            {"origin": p.od[0], "destination": p.od[1], "links": list(p.links), "flow": float(v)}
            for p, v in zip(F.universe.paths, F.flows)
        ],
    }


def pattern_from_dict(universe: PathUniverse, doc: Mapping) -> PathFlowPattern:
    entries = {}
    for e in doc["flows"]:
        entries[(e["origin"], e["destination"], tuple(e["links"]))] = e["flow"]
    return PathFlowPattern.from_mapping(universe, entries)


def dumps_pattern(F: PathFlowPattern) -> str:
    return json.dumps(pattern_to_dict(F), indent=2)


def transfer_pattern(F: PathFlowPattern, universe: PathUniverse) -> PathFlowPattern:
    """Carry ``F`` over to another path universe of the same demands.

    Flow on paths present in both universes is kept; each OD is rescaled onto
    its surviving paths, or put on its first path if none survives.
    """
    old = F.entries()
    x = np.zeros(len(universe))
    for i, p in enumerate(universe.paths):
        x[i] = old.get(p.key, 0.0)
    for i, vol in enumerate(universe.volumes):
        sl = universe.od_slice(i)
        total = x[sl].sum()
        if total > 0:
            x[sl] *= vol / total
        else:
            x[sl] = 0.0
            x[sl.start] = vol
    return PathFlowPattern(universe, x)
