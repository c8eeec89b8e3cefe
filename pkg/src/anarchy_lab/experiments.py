"""Prices of Anarchy, Value of Information, and the multipath-degree sweep."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .flows import PathFlowPattern, endhost_cost, operator_cost, transfer_pattern
from .network import Network, PathUniverse, build_universe
from .solvers import (
    EquilibriumResult,
    NotConverged,
    SolverConfig,
    solve_li_equilibrium,
    solve_pi_equilibrium,
    solve_social_optimum,
)

RATIO_EPS = 1e-300


def compute_voi(poa_li: float, poa_pi: float) -> float:
    """Relative PoA improvement of PI over LI; negative means information hurts."""
    if not poa_li >= 1 - 1e-9:
        raise ValueError(f"LI Price of Anarchy must be >= 1, got {poa_li!r}")
    return (poa_li - poa_pi) / poa_li


def _ratio(num: float, den: float) -> tuple[float, bool]:
    """``num/den`` with 0/0 read as 1; the flag marks that guard."""
    if abs(den) <= RATIO_EPS:
        if abs(num) <= RATIO_EPS:
            return 1.0, True
        return float("inf"), True
    return num / den, False


@dataclass(frozen=True)
class PoAReport:
    poa_star_0: float
    poa_star_plus: float
    poa_hash_0: float
    poa_hash_plus: float
    degenerate: bool = False
    provenance: dict = field(default_factory=dict, compare=False)

    # VoIs are derived on access so they can never drift from the stored PoAs.
    @property
    def voi_star(self) -> float:
        return compute_voi(self.poa_star_0, self.poa_star_plus)

    @property
    def voi_hash(self) -> float:
        return compute_voi(self.poa_hash_0, self.poa_hash_plus)

    def as_dict(self) -> dict:
        return {
            "poa_star_0": self.poa_star_0,
            "poa_star_plus": self.poa_star_plus,
            "poa_hash_0": self.poa_hash_0,
            "poa_hash_plus": self.poa_hash_plus,
            "voi_star": self.voi_star,
            "voi_hash": self.voi_hash,
            "degenerate": self.degenerate,
            "provenance": self.provenance,
        }


class PoANotConverged(NotConverged):
    """A solver gave up; ``report`` is formed from the best iterates."""

    def __init__(self, message, report: PoAReport, results: dict):
        super().__init__(message, None)
        self.report = report
        self.results = results


@dataclass(frozen=True)
class Optima:
    """End-host and operator optima, shared as fixed denominators."""

    star: EquilibriumResult
    hash: EquilibriumResult

    @property
    def endhost_cost(self) -> float:
        return endhost_cost(self.star.pattern)

    @property
    def operator_cost(self) -> float:
        return operator_cost(self.hash.pattern)


def _run(solver, *args, **kwargs) -> tuple[EquilibriumResult, bool]:
    try:
        return solver(*args, **kwargs), True
    except NotConverged as exc:
        return exc.result, False


def compute_optima(U: PathUniverse, cfg: SolverConfig | None = None) -> Optima:
    star, ok1 = _run(solve_social_optimum, U, "endhost", cfg)
    hash_, ok2 = _run(solve_social_optimum, U, "operator", cfg)
    if not (ok1 and ok2):
        raise NotConverged("social optimum did not converge", star if not ok1 else hash_)
    return Optima(star, hash_)


def _summary(res: EquilibriumResult) -> dict:
    return {"iterations": res.iterations, "residual": res.residual, "converged": res.converged,
            "conditions_ok": res.condition_report.ok, "oscillation": res.oscillation}


def compute_poa(U: PathUniverse, cfg: SolverConfig | None = None, optima: Optima | None = None,
                init: PathFlowPattern | None = None, frozen=()) -> PoAReport:
    """Run the four solvers on ``U`` and form the Price-of-Anarchy matrix.

    ``optima`` pins the denominators (e.g. to an unrestricted path set).
    ``init`` seeds both equilibrium solvers.  Any non-converged solver raises
    :class:`PoANotConverged` carrying the report built from the best iterates.
    """
    return compute_poa_with_results(U, cfg, optima, init, frozen)[0]


def compute_poa_with_results(U: PathUniverse, cfg: SolverConfig | None = None, optima: Optima | None = None,
                             init: PathFlowPattern | None = None, frozen=()):
    """As :func:`compute_poa`, also returning the solver results keyed
    ``opt_star``, ``opt_hash``, ``li`` and ``pi``."""
    cfg = cfg or SolverConfig()
    results, ok = {}, {}
    if optima is None:
        results["opt_star"], ok["opt_star"] = _run(solve_social_optimum, U, "endhost", cfg, frozen=frozen)
        results["opt_hash"], ok["opt_hash"] = _run(solve_social_optimum, U, "operator", cfg, frozen=frozen)
        optima = Optima(results["opt_star"], results["opt_hash"])
    else:
        results["opt_star"], results["opt_hash"] = optima.star, optima.hash
        ok["opt_star"], ok["opt_hash"] = optima.star.converged, optima.hash.converged
    results["li"], ok["li"] = _run(solve_li_equilibrium, U, cfg, init=init, frozen=frozen)
    results["pi"], ok["pi"] = _run(solve_pi_equilibrium, U, cfg, init=init, frozen=frozen)

    cs, ch = optima.endhost_cost, optima.operator_cost
    li, pi = results["li"].pattern, results["pi"].pattern
    entries = [_ratio(endhost_cost(li), cs), _ratio(endhost_cost(pi), cs),
               _ratio(operator_cost(li), ch), _ratio(operator_cost(pi), ch)]
    provenance = {
        "network": U.net.name,
        "paths": len(U),
        "od_pairs": len(U.ods),
        "solvers": {name: _summary(r) for name, r in results.items()},
    }
    report = PoAReport(*(v for v, _ in entries), degenerate=any(flag for _, flag in entries),
                       provenance=provenance)
    failed = [name for name, good in ok.items() if not good]
    if failed:
        raise PoANotConverged(f"not converged: {', '.join(failed)}", report, results)
    return report, results


# -- multipath sweep -----------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    k: int
    report: PoAReport | None
    runtime_s: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _sweep_point(net: Network, k: int, cfg: SolverConfig, optima: Optima, warm: dict | None):
    t0 = time.perf_counter()
    try:
        U = build_universe(net, k)
        init = None
        if warm is not None:
            init = transfer_pattern(PathFlowPattern.from_mapping(optima.star.pattern.universe, warm), U)
        report = compute_poa(U, cfg, optima=optima, init=init)
        report.provenance["k"] = k
        return SweepPoint(k, report, time.perf_counter() - t0)
    except PoANotConverged as exc:
        exc.report.provenance["k"] = k
        return SweepPoint(k, exc.report, time.perf_counter() - t0, str(exc))
    except Exception as exc:  # recorded per k, the sweep carries on
        return SweepPoint(k, None, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")


def run_multipath_sweep(net: Network, k_values, cfg: SolverConfig | None = None, jobs: int = 1,
                        warm_start: bool = True) -> list[SweepPoint]:
    """Recompute LI and PI equilibria with at most k paths per OD for each k.

    The optima are solved once on the unrestricted path set, so every point
    shares the same denominators.  With ``warm_start`` each equilibrium solve
    starts from the unrestricted end-host optimum projected onto the k-path
    set, which keeps points independent of each other and of ``jobs``.
    """
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ValueError("k_values must be non-empty")
    if any(k < 1 for k in k_values):
        raise ValueError("every k must be >= 1")
    cfg = cfg or SolverConfig()
    optima = compute_optima(build_universe(net), cfg)
    warm = optima.star.pattern.entries() if warm_start else None
    if jobs <= 1 or len(k_values) == 1:
        return [_sweep_point(net, k, cfg, optima, warm) for k in k_values]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_sweep_point, net, k, cfg, optima, warm) for k in k_values]
        return [f.result() for f in futures]


SWEEP_COLUMNS = ("k", "poa_star_0", "poa_star_plus", "poa_hash_0", "poa_hash_plus", "voi_star", "voi_hash",
                 "residual_opt_star", "residual_opt_hash", "residual_li", "residual_pi", "runtime_s", "status")


def sweep_rows(points, runtimes: bool = True) -> list[dict]:
    rows = []
    for pt in points:
        row = {c: "" for c in SWEEP_COLUMNS}
        row["k"] = pt.k
        row["runtime_s"] = f"{pt.runtime_s:.6f}" if runtimes else "0.0"
        row["status"] = "ok" if pt.ok else pt.error
        if pt.report is not None:
            r = pt.report
            for name in SWEEP_COLUMNS[1:7]:
                row[name] = repr(float(getattr(r, name)))
            for name in ("opt_star", "opt_hash", "li", "pi"):
                row[f"residual_{name}"] = repr(float(r.provenance["solvers"][name]["residual"]))
        rows.append(row)
    return rows


def sweep_csv(points, runtimes: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(sweep_rows(points, runtimes))
    return buf.getvalue()


def sweep_provenance(net: Network, k_values, cfg: SolverConfig, points, extra: dict | None = None) -> dict:
    return {
        "network": net.name,
        "k_values": [int(k) for k in k_values],
        "solver_config": asdict(cfg),
        "optima_on": "unrestricted path set",
        "points": [{"k": p.k, "error": p.error,
                    "solvers": p.report.provenance.get("solvers") if p.report else None} for p in points],
        **(extra or {}),
    }


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, float):
        return repr(obj)
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")
