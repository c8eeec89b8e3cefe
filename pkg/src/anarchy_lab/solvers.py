"""Social optima, latency-information (LI) and perfect-information (PI) equilibria.

* ``solve_social_optimum`` minimizes the end-host cost C* or the operator cost
  C# over the product of per-OD simplices.
* ``solve_li_equilibrium`` minimizes the Beckmann potential, whose minimizers
  are exactly the Wardrop (equal-latency) patterns.
* ``solve_pi_equilibrium`` runs round-robin best-response dynamics where each
  end-host exactly minimizes its own selfish cost.

The convex solves use a path-based conditional gradient: within an OD pair,
flow moves from the most expensive used path to the cheapest path (an edge of
the simplex) with an exact line search, sweeping Gauss-Seidel over OD pairs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from . import _kernels as K
from .flows import PathFlowPattern, gradient, objective_value
from .network import InvalidNetwork, PathUniverse, validate

log = logging.getLogger(__name__)

BOX_TOL = 1e-6


class NotConverged(RuntimeError):
    """Iteration budget exhausted; ``result`` holds the best iterate."""

    def __init__(self, message, result: "EquilibriumResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200_000
    step_rule: Literal["exact-line-search", "diminishing"] = "exact-line-search"
    grad_tolerance: float = 1e-8
    br_sweep_tolerance: float = 1e-10
    seed: int = 0
    order: Literal["round-robin", "random"] = "round-robin"
    br_inner_tolerance: float = 1e-13
    inner_max: int = 500
    oscillation_window: int = 50

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.grad_tolerance <= 0 or self.br_sweep_tolerance <= 0 or self.br_inner_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        if self.step_rule not in ("exact-line-search", "diminishing"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.order not in ("round-robin", "random"):
            raise ValueError(f"unknown best-response order {self.order!r}")


@dataclass(frozen=True)
class ConditionEntry:
    od: tuple[str, str]
    level: float  # marginal of the cheapest used path
    spread: float  # max - min marginal over used paths
    slack: float  # min unused marginal - level (inf if every path is used)
    ok: bool


@dataclass(frozen=True)
class ConditionReport:
    """Per-OD check of an optimality / equilibrium box."""

    kind: str
    entries: tuple[ConditionEntry, ...]
    tolerance: float = BOX_TOL

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def violations(self) -> tuple[ConditionEntry, ...]:
        return tuple(e for e in self.entries if not e.ok)

    def worst_spread(self) -> float:
        return max((e.spread / (1 + abs(e.level)) for e in self.entries), default=0.0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tolerance": self.tolerance,
            "ok": self.ok,
            "entries": [
                {"origin": e.od[0], "destination": e.od[1], "level": e.level, "spread": e.spread,
                 "slack": e.slack if np.isfinite(e.slack) else None, "ok": e.ok}
                for e in self.entries
            ],
        }


@dataclass(frozen=True)
class EquilibriumResult:
    kind: str
    pattern: PathFlowPattern
    iterations: int
    residual: float
    condition_report: ConditionReport
    converged: bool
    oscillation: bool = False
    trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "not-converged"


# -- condition boxes ---------------------------------------------------------

def _box(F: PathFlowPattern, kind: str, marginals_for_od, tol: float) -> ConditionReport:
    U = F.universe
    entries = []
    for i, od in enumerate(U.ods):
        sl = U.od_slice(i)
        m = marginals_for_od(i)
        used = F.flows[sl] > 0
        level = float(m[used].min())
        spread = float(m[used].max() - level)
        slack = float(m[~used].min() - level) if (~used).any() else float("inf")
        ok = spread <= tol * (1 + abs(level)) and slack >= -tol
        entries.append(ConditionEntry(od, level, spread, slack, ok))
    return ConditionReport(kind, tuple(entries), tol)


def check_optimum(F: PathFlowPattern, objective: str, tol: float = BOX_TOL) -> ConditionReport:
    """Marginal-cost box: used paths share the least marginal cost of their OD."""
    g = gradient(F, objective)
    return _box(F, f"optimum-{objective}", lambda i: g[F.universe.od_slice(i)], tol)


def check_li(F: PathFlowPattern, tol: float = BOX_TOL) -> ConditionReport:
    """Wardrop box: used paths share the least latency of their OD."""
    g = gradient(F, "beckmann")
    return _box(F, "li", lambda i: g[F.universe.od_slice(i)], tol)


def check_pi(F: PathFlowPattern, tol: float = BOX_TOL) -> ConditionReport:
    """Selfish marginal-cost box, evaluated for each OD's origin end-host."""
    U = F.universe
    grads = {h: gradient(F, "selfish", host=h) for h in U.hosts}
    return _box(F, "pi", lambda i: grads[U.ods[i][0]][U.od_slice(i)], tol)


# -- helpers -------------------------------------------------------------------

def _ensure_valid(U: PathUniverse):
    report = validate(U.net)
    if not report.ok:
        raise InvalidNetwork(report)


def _initial(U: PathUniverse, init: PathFlowPattern | None, default: str) -> np.ndarray:
    if init is not None:
        if init.universe is not U and len(init) != len(U):
            raise ValueError("initial pattern belongs to a different path universe")
        return np.array(init.flows, dtype=float)
    if default == "equal":
        return np.array(PathFlowPattern.equal_split(U).flows)
    return np.array(PathFlowPattern.all_or_nothing(U).flows)


def _frozen_ods(U: PathUniverse, frozen: Iterable[str]) -> np.ndarray:
    frozen = set(frozen)
    for h in frozen:
        U.net.host(h)
    return np.array([od[0] not in frozen for od in U.ods], dtype=np.bool_)


def _finish(U, kind, x, iterations, residual, report, converged, oscillation=False, trace=()):
    result = EquilibriumResult(kind, PathFlowPattern(U, x), iterations, float(residual), report,
                               converged, oscillation, tuple(trace))
    if not converged:
        raise NotConverged(f"{kind}: no convergence after {iterations} iterations "
                           f"(residual {residual:.3g})", result)
    return result


def _convex_solve(U: PathUniverse, kind: str, cfg: SolverConfig, init, frozen, check):
    _ensure_valid(U)
    code = K.KIND[kind]
    coeffs = U.coefficient_matrix()
    x = _initial(U, init, "aon")
    active = _frozen_ods(U, frozen)
    if cfg.step_rule == "diminishing":
        return _diminishing(U, kind, cfg, x, active, check)

    trace = []
    converged = False
    it = 0
    gap = np.inf
    for it in range(1, cfg.max_iters + 1):
        f = U.incidence.T @ x
        gap = K.social_sweep(code, coeffs, U.path_ptr, U.path_links, U.od_ptr, active, x, f,
                             cfg.grad_tolerance, cfg.inner_max)
        trace.append(objective_value(PathFlowPattern(U, x), kind))
        if gap <= cfg.grad_tolerance:
            converged = True
            break
    F = PathFlowPattern(U, x)
    return _finish(U, kind, x, it, gap, check(F), converged, trace=trace)


def _diminishing(U, kind, cfg, x, active, check):
    """Plain Frank-Wolfe with the 2/(k+2) step: all-or-nothing targets per OD."""
    trace = []
    gap = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        F = PathFlowPattern(U, x)
        g = gradient(F, kind)
        y = x.copy()
        gap = 0.0
        for i in range(len(U.ods)):
            if not active[i]:
                continue
            sl = U.od_slice(i)
            gi = g[sl]
            used = x[sl] > 0
            gap = max(gap, float((gi[used].max() - gi.min()) / (1 + abs(gi.min()))))
            y[sl] = 0.0
            y[sl.start + int(np.argmin(gi))] = U.volumes[i]
        trace.append(objective_value(F, kind))
        if gap <= cfg.grad_tolerance:
            converged = True
            break
        x = x + 2.0 / (it + 2.0) * (y - x)
    return _finish(U, kind, x, it, gap, check(PathFlowPattern(U, x)), converged, trace=trace)


# -- public solvers ------------------------------------------------------------

def solve_social_optimum(U: PathUniverse, objective: str = "endhost", cfg: SolverConfig | None = None,
                         init: PathFlowPattern | None = None, frozen: Iterable[str] = ()) -> EquilibriumResult:
    """End-host optimum F* (``objective="endhost"``) or operator optimum F# (``"operator"``)."""
    if objective not in ("endhost", "operator"):
        raise ValueError(f"social objective must be 'endhost' or 'operator', got {objective!r}")
    cfg = cfg or SolverConfig()
    return _convex_solve(U, objective, cfg, init, frozen, lambda F: check_optimum(F, objective))


def solve_li_equilibrium(U: PathUniverse, cfg: SolverConfig | None = None,
                         init: PathFlowPattern | None = None, frozen: Iterable[str] = ()) -> EquilibriumResult:
    cfg = cfg or SolverConfig()
    res = _convex_solve(U, "beckmann", cfg, init, frozen, check_li)
    return EquilibriumResult("li", res.pattern, res.iterations, res.residual, res.condition_report,
                             res.converged, res.oscillation, res.trace)


def best_response(F: PathFlowPattern, host: str, cfg: SolverConfig | None = None) -> PathFlowPattern:
    """``host``'s exact best response with everyone else's flows held fixed."""
    cfg = cfg or SolverConfig()
    U = F.universe
    h = U.hosts.index(host) if host in U.hosts else None
    if h is None:
        U.net.host(host)
        return F
    x = np.array(F.flows)
    f = U.incidence.T @ x
    own = np.zeros(len(U.net.links))
    K.best_response(U.coefficient_matrix(), U.path_ptr, U.path_links, U.od_ptr, U.host_ptr, U.host_ods,
                    h, x, f, own, cfg.br_inner_tolerance, cfg.inner_max)
    return PathFlowPattern(U, x)


def solve_pi_equilibrium(U: PathUniverse, cfg: SolverConfig | None = None,
                         init: PathFlowPattern | None = None, frozen: Iterable[str] = ()) -> EquilibriumResult:
    """Round-robin best-response dynamics until a sweep moves less than the tolerance.

    End-hosts act in id order, or in a fresh seeded permutation each sweep with
    ``cfg.order == "random"``.  A sweep-change that fails to decrease over
    ``cfg.oscillation_window`` sweeps sets ``oscillation`` on the result.
    """
    cfg = cfg or SolverConfig()
    _ensure_valid(U)
    coeffs = U.coefficient_matrix()
    x = _initial(U, init, "equal")
    frozen = set(frozen)
    for h in frozen:
        U.net.host(h)
    active = np.array([h not in frozen for h in U.hosts], dtype=np.bool_)
    own = np.zeros(len(U.net.links))
    rng = np.random.default_rng(cfg.seed)
    base = np.arange(len(U.hosts), dtype=np.int64)

    changes: list[float] = []
    oscillation = False
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        order = rng.permutation(base) if cfg.order == "random" else base
        f = U.incidence.T @ x
        change = K.pi_sweep(coeffs, U.path_ptr, U.path_links, U.od_ptr, U.host_ptr, U.host_ods,
                            order, active, x, f, own, cfg.br_inner_tolerance, cfg.inner_max)
        changes.append(change)
        w = cfg.oscillation_window
        if not oscillation and len(changes) > w and changes[-1] >= changes[-1 - w] and change > cfg.br_sweep_tolerance:
            oscillation = True
            log.warning("best-response sweep change stopped decreasing after %d sweeps (%.3g)", it, change)
        if change < cfg.br_sweep_tolerance:
            converged = True
            break
    F = PathFlowPattern(U, x)
    report = check_pi(F)
    residual = changes[-1] if changes else 0.0
    return _finish(U, "pi", x, it, residual, report, converged, oscillation, changes)
