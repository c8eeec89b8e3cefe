"""Network graph, polynomial link costs, end-hosts, demands and path enumeration.

Links are undirected; a path is the ordered sequence of link ids traversed from
the origin's home AS to the destination's home AS.  End-hosts attach to ASes at
no cost.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FilePath
from typing import Iterable, Mapping, Sequence

import numpy as np

FORMAT_VERSION = 1


class NoPath(Exception):
    """Raised when an origin-destination pair is disconnected."""


class UnknownEndHost(KeyError):
    pass


class InvalidNetwork(ValueError):
    def __init__(self, report: "ValidationReport"):
        super().__init__("invalid network:\n" + "\n".join(f"  {f}" for f in report.findings))
        self.report = report


class ParseError(ValueError):
    """Malformed input document; carries the file, line and reason."""

    def __init__(self, file, line, reason):
        self.file = str(file)
        self.line = line
        self.reason = reason
        where = f"{self.file}:{line}" if line is not None else self.file
        super().__init__(f"{where}: {reason}")


@dataclass(frozen=True)
class CostPolynomial:
    """Latency ``c(f) = sum_k coefficients[k] * f**k``."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            coeffs = (0.0,)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def monomial(cls, degree: int, scale: float = 1.0, offset: float = 0.0) -> "CostPolynomial":
        if int(degree) != degree or degree < 0:
            raise ValueError(f"polynomial degree must be a non-negative integer, got {degree!r}")
        coeffs = [0.0] * (int(degree) + 1)
        coeffs[int(degree)] += scale
        coeffs[0] += offset
        return cls(tuple(coeffs))

    @classmethod
    def constant(cls, value: float) -> "CostPolynomial":
        return cls((value,))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, f):
        return np.polynomial.polynomial.polyval(f, self.coefficients)

    def derivative(self, f, order: int = 1):
        d = np.polynomial.polynomial.polyder(self.coefficients, order) if self.degree >= order else [0.0]
        return np.polynomial.polynomial.polyval(f, d)

    def antiderivative(self, f):
        """``int_0^f c(x) dx``, the per-link Beckmann term."""
        return np.polynomial.polynomial.polyval(f, np.polynomial.polynomial.polyint(self.coefficients))

    def is_valid(self) -> bool:
        return all(math.isfinite(c) and c >= 0 for c in self.coefficients)


@dataclass(frozen=True)
class Link:
    id: str
    endpoints: tuple[str, str]
    cost: CostPolynomial

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        a, b = self.endpoints
        object.__setattr__(self, "endpoints", (str(a), str(b)))
        if not isinstance(self.cost, CostPolynomial):
            object.__setattr__(self, "cost", CostPolynomial(tuple(self.cost)))

    def other(self, as_id: str) -> str:
        a, b = self.endpoints
        return b if as_id == a else a


@dataclass(frozen=True)
class EndHost:
    id: str
    home_as: str

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "home_as", str(self.home_as))


@dataclass(frozen=True)
class Demand:
    origin: str
    destination: str
    volume: float

    def __post_init__(self):
        object.__setattr__(self, "origin", str(self.origin))
        object.__setattr__(self, "destination", str(self.destination))
        object.__setattr__(self, "volume", float(self.volume))

    @property
    def od(self) -> tuple[str, str]:
        return (self.origin, self.destination)


@dataclass(frozen=True)
class Path:
    od: tuple[str, str]
    links: tuple[str, ...]
    ases: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[str, str, tuple[str, ...]]:
        return (self.od[0], self.od[1], self.links)

    def __len__(self):
        return len(self.links)


@dataclass(frozen=True)
class Network:
    ases: tuple[str, ...]
    links: tuple[Link, ...]
    endhosts: tuple[EndHost, ...]
    demands: tuple[Demand, ...]
    name: str = ""
    _link_index: dict = field(init=False, repr=False, compare=False)
    _host_index: dict = field(init=False, repr=False, compare=False)
    _adjacency: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ases", tuple(str(a) for a in self.ases))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "endhosts", tuple(self.endhosts))
        object.__setattr__(self, "demands", tuple(self.demands))
        object.__setattr__(self, "_link_index", {l.id: i for i, l in enumerate(self.links)})
        object.__setattr__(self, "_host_index", {h.id: h for h in self.endhosts})
        adj: dict[str, list[tuple[str, str]]] = {a: [] for a in self.ases}
        for l in self.links:
            a, b = l.endpoints
            if a == b:
                continue
            adj.setdefault(a, []).append((l.id, b))
            adj.setdefault(b, []).append((l.id, a))
        for nbrs in adj.values():
            nbrs.sort()
        object.__setattr__(self, "_adjacency", adj)

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(l.id for l in self.links)

    def link(self, link_id: str) -> Link:
        return self.links[self._link_index[link_id]]

    def link_position(self, link_id: str) -> int:
        return self._link_index[link_id]

    def host(self, host_id: str) -> EndHost:
        try:
            return self._host_index[host_id]
        except KeyError:
            raise UnknownEndHost(host_id) from None

    def has_host(self, host_id: str) -> bool:
        return host_id in self._host_index

    def neighbors(self, as_id: str) -> list[tuple[str, str]]:
        return self._adjacency.get(as_id, [])

    def max_degree(self) -> int:
        return max((l.cost.degree for l in self.links), default=0)

    def with_demands(self, demands: Iterable[Demand]) -> "Network":
        return Network(self.ases, self.links, self.endhosts, tuple(demands), self.name)


def _free_flow(net: Network, links: Sequence[str]) -> float:
    return sum(net.link(l).cost.coefficients[0] for l in links)


def _simple_paths(net: Network, src: str, dst: str) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """All simple AS-level walks from src to dst as (links, ases) pairs."""
    if src == dst:
        return [((), (src,))]
    found = []
    links: list[str] = []
    visited = [src]
    on_path = {src}

    def dfs(node):
        for link_id, nxt in net.neighbors(node):
            if nxt in on_path:
                continue
            links.append(link_id)
            visited.append(nxt)
            if nxt == dst:
                found.append((tuple(links), tuple(visited)))
            else:
                on_path.add(nxt)
                dfs(nxt)
                on_path.discard(nxt)
            links.pop()
            visited.pop()

    dfs(src)
    return found


def enumerate_paths(net: Network, od: tuple[str, str], k: int | None = None) -> list[Path]:
    """Simple paths for an OD pair, ordered by (free-flow cost, hops, link ids).

    With ``k`` given only the first ``k`` paths of that order are returned.
    """
    origin, destination = od
    src = net.host(origin).home_as
    dst = net.host(destination).home_as
    if k is not None and (int(k) != k or k < 1):
        raise ValueError(f"k must be a positive integer, got {k!r}")
    walks = _simple_paths(net, src, dst)
    if not walks:
        raise NoPath(f"no path between {origin} ({src}) and {destination} ({dst})")
    walks.sort(key=lambda w: (_free_flow(net, w[0]), len(w[0]), w[0]))
    if k is not None:
        walks = walks[: int(k)]
    return [Path((origin, destination), links, ases) for links, ases in walks]


@dataclass(frozen=True)
class Finding:
    kind: str
    subject: str
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.subject}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings

    def __bool__(self):
        return self.ok

    def kinds(self) -> set[str]:
        return {f.kind for f in self.findings}


def validate(net: Network) -> ValidationReport:
    """Report every violated invariant; an empty report means well-formed."""
    out: list[Finding] = []
    seen = set()
    for a in net.ases:
        if a in seen:
            out.append(Finding("DuplicateAS", a, "AS id listed twice"))
        seen.add(a)
    as_set = set(net.ases)

    seen = set()
    for l in net.links:
        if l.id in seen:
            out.append(Finding("DuplicateLink", l.id, "link id not unique"))
        seen.add(l.id)
        a, b = l.endpoints
        if a == b:
            out.append(Finding("SelfLoop", l.id, f"endpoints are both {a}"))
        for end in (a, b):
            if end not in as_set:
                out.append(Finding("UnknownAS", l.id, f"endpoint {end} is not an AS"))
        for i, c in enumerate(l.cost.coefficients):
            if not math.isfinite(c):
                out.append(Finding("NonFiniteCoefficient", l.id, f"coefficient[{i}] = {c}"))
            elif c < 0:
                out.append(Finding("NegativeCoefficient", l.id, f"coefficient[{i}] = {c} < 0"))

    hosts = set()
    for h in net.endhosts:
        if h.id in hosts:
            out.append(Finding("DuplicateEndHost", h.id, "end-host id not unique"))
        hosts.add(h.id)
        if h.home_as not in as_set:
            out.append(Finding("UnknownAS", h.id, f"home AS {h.home_as} does not exist"))

    pairs = set()
    for dem in net.demands:
        subject = f"{dem.origin}->{dem.destination}"
        if dem.od in pairs:
            out.append(Finding("DuplicateDemand", subject, "OD pair listed twice"))
        pairs.add(dem.od)
        missing = [e for e in dem.od if e not in hosts]
        for e in missing:
            out.append(Finding("UnknownEndHost", subject, f"end-host {e} does not exist"))
        if dem.origin == dem.destination:
            out.append(Finding("SelfDemand", subject, "origin equals destination"))
        if not math.isfinite(dem.volume) or dem.volume < 0:
            out.append(Finding("NegativeDemand", subject, f"volume {dem.volume} is not a non-negative number"))
        if missing or dem.origin == dem.destination:
            continue
        src = net.host(dem.origin).home_as
        dst = net.host(dem.destination).home_as
        if src in as_set and dst in as_set and not _connected(net, src, dst):
            out.append(Finding("NoPath", subject, f"{src} and {dst} are disconnected"))
    return ValidationReport(tuple(out))


def _connected(net: Network, src: str, dst: str) -> bool:
    stack, seen = [src], {src}
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        for _, nxt in net.neighbors(node):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


class PathUniverse:
    """The fixed, ordered set of end-host paths a flow pattern lives on.

    Paths are stored contiguously per OD pair; ``od_ptr[i]:od_ptr[i+1]`` is the
    slice of OD ``i``.  Zero-volume demands are dropped.
    """

    def __init__(self, net: Network, paths_by_od: Mapping[tuple[str, str], Sequence[Path]], volumes: Mapping[tuple[str, str], float]):
        self.net = net
        self.ods: tuple[tuple[str, str], ...] = tuple(paths_by_od)
        self.volumes = np.array([volumes[od] for od in self.ods], dtype=float)
        paths: list[Path] = []
        ptr = [0]
        for od in self.ods:
            paths.extend(paths_by_od[od])
            ptr.append(len(paths))
        self.paths: tuple[Path, ...] = tuple(paths)
        self.od_ptr = np.array(ptr, dtype=np.int64)
        self.od_of_path = np.repeat(np.arange(len(self.ods)), np.diff(self.od_ptr))
        self._od_index = {od: i for i, od in enumerate(self.ods)}
        self._path_index = {p.key: i for i, p in enumerate(self.paths)}

        n_links = len(net.links)
        self.incidence = np.zeros((len(self.paths), n_links))
        path_links = []
        path_ptr = [0]
        for i, p in enumerate(self.paths):
            idx = [net.link_position(l) for l in p.links]
            self.incidence[i, idx] = 1.0
            path_links.extend(idx)
            path_ptr.append(len(path_links))
        self.path_ptr = np.array(path_ptr, dtype=np.int64)
        self.path_links = np.array(path_links, dtype=np.int64)

        # ODs grouped by owning (origin) end-host, in end-host id order
        owners = sorted({od[0] for od in self.ods})
        self.hosts: tuple[str, ...] = tuple(owners)
        host_ods: list[int] = []
        host_ptr = [0]
        for h in owners:
            host_ods.extend(i for i, od in enumerate(self.ods) if od[0] == h)
            host_ptr.append(len(host_ods))
        self.host_ptr = np.array(host_ptr, dtype=np.int64)
        self.host_ods = np.array(host_ods, dtype=np.int64)

    def __len__(self):
        return len(self.paths)

    def __repr__(self):
        return f"PathUniverse({len(self.ods)} ODs, {len(self.paths)} paths)"

    def od_index(self, od: tuple[str, str]) -> int:
        return self._od_index[tuple(od)]

    def od_slice(self, od: tuple[str, str] | int) -> slice:
        i = od if isinstance(od, (int, np.integer)) else self.od_index(od)
        return slice(int(self.od_ptr[i]), int(self.od_ptr[i + 1]))

    def path_index(self, path: Path | tuple) -> int:
        key = path.key if isinstance(path, Path) else (path[0], path[1], tuple(path[2]))
        return self._path_index[key]

    def paths_of(self, od: tuple[str, str]) -> tuple[Path, ...]:
        return self.paths[self.od_slice(od)]

    def host_mask(self, host: str) -> np.ndarray:
        """Boolean mask over paths whose OD originates at ``host``."""
        return np.array([od[0] == host for od in self.ods])[self.od_of_path]

    def coefficient_matrix(self) -> np.ndarray:
        width = self.net.max_degree() + 1
        out = np.zeros((len(self.net.links), width))
        for i, l in enumerate(self.net.links):
            out[i, : len(l.cost.coefficients)] = l.cost.coefficients
        return out


def build_universe(net: Network, k: int | None = None) -> PathUniverse:
    """Enumerate paths (at most ``k`` per OD) for every positive demand."""
    paths_by_od: dict[tuple[str, str], list[Path]] = {}
    volumes = {}
    for dem in net.demands:
        if dem.volume <= 0:
            continue
        paths_by_od[dem.od] = enumerate_paths(net, dem.od, k)
        volumes[dem.od] = dem.volume
    return PathUniverse(net, paths_by_od, volumes)


# -- topology documents ------------------------------------------------------

def network_to_dict(net: Network, coordinates: Mapping[str, tuple[float, float]] | None = None) -> dict:
    ases = []
    for a in net.ases:
        entry: dict = {"id": a}
        if coordinates and a in coordinates:
            entry["lat"], entry["lon"] = coordinates[a]
        ases.append(entry)
    return {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "ases": ases,
        "links": [
            {"id": l.id, "endpoints": list(l.endpoints), "coefficients": list(l.cost.coefficients)}
            for l in net.links
        ],
        "endhosts": [{"id": h.id, "home_as": h.home_as} for h in net.endhosts],
        "demands": [
            {"origin": d.origin, "destination": d.destination, "volume": d.volume} for d in net.demands
        ],
    }


def network_from_dict(doc: Mapping, source="<memory>") -> Network:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(source, None, f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        ases = [a["id"] if isinstance(a, Mapping) else a for a in doc.get("ases", [])]
        links = []
        for l in doc.get("links", []):
            coeffs = l.get("coefficients", [0.0])
            links.append(Link(l["id"], tuple(l["endpoints"]), CostPolynomial(tuple(coeffs))))
        hosts = [EndHost(h["id"], h["home_as"]) for h in doc.get("endhosts", [])]
        demands = [Demand(d["origin"], d["destination"], d["volume"]) for d in doc.get("demands", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(source, None, f"malformed topology document: {exc!r}") from exc
    return Network(tuple(ases), tuple(links), tuple(hosts), tuple(demands), str(doc.get("name", "")))


def read_topology_document(path) -> dict:
    path = FilePath(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from exc


def read_network(path) -> Network:
    return network_from_dict(read_topology_document(path), source=path)


def write_network(net: Network, path, coordinates=None) -> None:
    FilePath(path).write_text(json.dumps(network_to_dict(net, coordinates), indent=2, sort_keys=False) + "\n")
