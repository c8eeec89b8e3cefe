"""Command-line entry point: ``anarchy-lab <command> ...``.

Every command writes its outputs plus a ``manifest.json`` into
``<root>/<command>/<label>/`` where the root is ``out`` (or ``$ANARCHY_LAB_OUT``)
and the label defaults to a UTC timestamp.

Exit codes: 0 success, 2 usage or invalid parameters, 3 solver did not
converge (partial results are still written), 4 input/output failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import closed_form as cf
from .experiments import PoANotConverged, dumps_json, run_multipath_sweep, sweep_csv, sweep_provenance, compute_poa
from .flows import link_flows, pattern_to_dict, endhost_cost, operator_cost
from .network import InvalidNetwork, NoPath, ParseError, build_universe, network_to_dict, read_network
from .solvers import NotConverged, SolverConfig, solve_li_equilibrium, solve_pi_equilibrium, solve_social_optimum
from .topologies import AbileneConfig, MissingCoordinates, fig1_network, fig2_network, gen_ladder, \
    gen_parallel_links, resolve_abilene, vendored_abilene_paths

log = logging.getLogger("anarchy_lab")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- output layout -------------------------------------------------------------

def _epoch() -> float | None:
    value = os.environ.get("SOURCE_DATE_EPOCH")
    return float(value) if value else None


def _now() -> datetime:
    fixed = _epoch()
    return datetime.fromtimestamp(fixed if fixed is not None else time.time(), tz=timezone.utc)


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """One command invocation: output directory, manifest and file bookkeeping."""

    def __init__(self, command: str, args: argparse.Namespace, inputs=()):
        self.command = command
        self.started = _now()
        root = Path(os.environ.get("ANARCHY_LAB_OUT", "out"))
        label = args.label or self.started.strftime("%Y%m%dT%H%M%SZ")
        self.dir = root / command / label
        self.config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
        self.inputs = {str(p): _digest(p) for p in inputs}
        self.outputs: dict[str, str] = {}

    def write(self, name: str, text: str):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        path.write_text(text)
        self.outputs[name] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def finish(self, status: str, extra: dict | None = None):
        manifest = {
            "command": self.command,
            "version": __version__,
            "status": status,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started": self.started.isoformat(),
            "finished": _now().isoformat(),
            **(extra or {}),
        }
        self.write("manifest.json", dumps_json(manifest))
        print(str(self.dir), file=sys.stderr)


# -- argument helpers ----------------------------------------------------------

def _k_value(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return int(text)


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k-list must be comma-separated integers, got {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("--k-list needs integers >= 1")
    return ks


def _solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(max_iters=args.max_iters, step_rule=args.step_rule, grad_tolerance=args.grad_tol,
                            br_sweep_tolerance=args.br_tol, seed=args.seed, order=args.order)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _input_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _frozen(args) -> list[str]:
    return [h for h in (args.frozen or "").split(",") if h]


# -- commands ------------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        if args.kind == "parallel":
            spec = cf.ParallelLinksSpec(args.m, args.p, args.d, args.K)
            net = gen_parallel_links(spec)
        elif args.kind == "ladder":
            net = gen_ladder(cf.LadderSpec(args.H, args.p, args.d, args.t))
        elif args.kind == "fig1":
            net = fig1_network()
        else:
            net = fig2_network()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    run = Run("generate", args)
    run.write("topology.json", json.dumps(network_to_dict(net), indent=2) + "\n")
    run.finish("ok", {"network": net.name})
    return EXIT_OK


_WHICH = {
    "opt-star": lambda U, cfg, fr: solve_social_optimum(U, "endhost", cfg, frozen=fr),
    "opt-hash": lambda U, cfg, fr: solve_social_optimum(U, "operator", cfg, frozen=fr),
    "li": lambda U, cfg, fr: solve_li_equilibrium(U, cfg, frozen=fr),
    "pi": lambda U, cfg, fr: solve_pi_equilibrium(U, cfg, frozen=fr),
}


def _result_doc(res) -> dict:
    F = res.pattern
    return {
        "kind": res.kind,
        "status": res.status,
        "iterations": res.iterations,
        "residual": res.residual,
        "oscillation": res.oscillation,
        "endhost_cost": endhost_cost(F),
        "operator_cost": operator_cost(F),
        "link_flows": link_flows(F).as_dict(),
        "pattern": pattern_to_dict(F),
        "condition_report": res.condition_report.to_dict(),
    }


def cmd_solve(args) -> int:
    path = _input_file(args.topology)
    cfg = _solver_config(args)
    net = read_network(path)
    U = build_universe(net, args.k)
    run = Run("solve", args, inputs=[path])
    code, status = EXIT_OK, "ok"
    try:
        res = _WHICH[args.which](U, cfg, _frozen(args))
    except NotConverged as exc:
        res, code, status = exc.result, EXIT_NOT_CONVERGED, "not-converged"
        log.error("%s", exc)
    doc = _result_doc(res)
    run.write("result.json", dumps_json(doc))
    run.finish(status)
    print(dumps_json({"which": args.which, "status": res.status, "link_flows": doc["link_flows"]}), end="")
    return code


def cmd_poa(args) -> int:
    path = _input_file(args.topology)
    cfg = _solver_config(args)
    net = read_network(path)
    U = build_universe(net, args.k)
    run = Run("poa", args, inputs=[path])
    code, status = EXIT_OK, "ok"
    try:
        report = compute_poa(U, cfg, frozen=_frozen(args))
    except PoANotConverged as exc:
        report, code, status = exc.report, EXIT_NOT_CONVERGED, "not-converged"
        log.error("%s", exc)
    run.write("poa.json", dumps_json(report.as_dict()))
    run.finish(status)
    doc = report.as_dict()
    doc.pop("provenance")
    print(dumps_json(doc), end="")
    return code


def cmd_sweep(args) -> int:
    cfg = _solver_config(args)
    inputs, extra = [], {}
    if args.topology in (None, "abilene") or args.traffic_matrix:
        topo = None if args.topology in (None, "abilene") else str(_input_file(args.topology))
        tm = str(_input_file(args.traffic_matrix)) if args.traffic_matrix else None
        try:
            acfg = AbileneConfig(topo, tm, args.delta_scale, args.demand_scale, args.hosts_per_pop)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        load = resolve_abilene(acfg, cfg)
        net = load.network
        default_topo, default_tm = vendored_abilene_paths()
        inputs = [topo or default_topo, tm or default_tm]
        extra["abilene"] = load.config_echo()
    else:
        path = _input_file(args.topology)
        net = read_network(path)
        inputs = [path]
    run = Run("sweep", args, inputs=inputs)
    points = run_multipath_sweep(net, args.k_list, cfg, jobs=args.jobs)
    run.write("sweep.csv", sweep_csv(points, runtimes=_epoch() is None))
    run.write("provenance.json", dumps_json(sweep_provenance(net, args.k_list, cfg, points, extra)))
    failed = [p for p in points if not p.ok]
    run.finish("ok" if not failed else "partial", extra)
    print(sweep_csv(points, runtimes=_epoch() is None), end="")
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def cmd_closed_form(args) -> int:
    try:
        value = _CLOSED_FORM[args.which](args)
    except (ValueError, cf.SingularSystem) as exc:
        raise UsageError(str(exc)) from exc
    run = Run("closed-form", args)
    run.write(f"{args.which}.json", dumps_json(value))
    run.finish("ok")
    print(dumps_json(value), end="")
    return EXIT_OK


def _cf_parallel_optimum(a):
    spec = cf.ParallelLinksSpec(a.m, a.p, a.d, 1)  # the optimum does not depend on K
    return cf.parallel_optimum_flows(spec)._asdict()


def _cf_parallel_poa(a):
    spec = cf.ParallelLinksSpec(a.m, a.p, a.d, a.K)
    out = cf.parallel_poa_table(spec)._asdict()
    out["f_beta_plus"] = cf.parallel_pi_flow(spec)
    return out


def _cf_ladder_h2(a):
    return cf.ladder_pi_h2(cf.LadderSpec(2, a.p, a.d, a.t), worst_case=a.worst_case)._asdict()


def _cf_ladder_system(a):
    spec = cf.LadderSpec(a.H, a.p, a.d, a.t)
    system = cf.ladder_equation_system(spec)
    sol = cf.ladder_solve_system(spec)
    return {
        "rows": [asdict(r) for r in system.rows],
        "F": list(sol.F),
        "F_V": sol.F_V,
        "f_V": sol.f_V,
    }


def _cf_ladder_bound(a):
    bound, limit = cf.ladder_poa_bound(a.H, a.p)
    return {"bound_H": bound, "bound_inf": limit}


_CLOSED_FORM = {
    "parallel-optimum": _cf_parallel_optimum,
    "parallel-poa": _cf_parallel_poa,
    "ladder-h2": _cf_ladder_h2,
    "ladder-system": _cf_ladder_system,
    "ladder-bound": _cf_ladder_bound,
}


# -- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    g.add_argument("--step-rule", choices=("exact-line-search", "diminishing"), default=SolverConfig.step_rule)
    g.add_argument("--grad-tol", type=float, default=SolverConfig.grad_tolerance)
    g.add_argument("--br-tol", type=float, default=SolverConfig.br_sweep_tolerance)
    g.add_argument("--order", choices=("round-robin", "random"), default=SolverConfig.order)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every randomized choice (default 0)")
    common.add_argument("--label", help="output directory name instead of a timestamp")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="anarchy-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a synthetic topology document")
    gsub = gen.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    par = gsub.add_parser("parallel", parents=[common])
    par.add_argument("--m", type=int, required=True)
    par.add_argument("--p", type=int, required=True)
    par.add_argument("--d", type=float, required=True)
    par.add_argument("--K", type=int, required=True)
    lad = gsub.add_parser("ladder", parents=[common])
    lad.add_argument("--H", type=int, required=True)
    lad.add_argument("--p", type=int, required=True)
    lad.add_argument("--d", type=float, required=True)
    lad.add_argument("--t", type=float, required=True)
    gsub.add_parser("fig1", parents=[common])
    gsub.add_parser("fig2", parents=[common])
    gen.set_defaults(func=cmd_generate)

    solve = sub.add_parser("solve", parents=[common], help="compute one optimum or equilibrium")
    solve.add_argument("topology")
    solve.add_argument("--which", choices=tuple(_WHICH), required=True)
    solve.add_argument("--k", type=int, help="at most k paths per OD pair")
    solve.add_argument("--frozen", help="comma-separated end-hosts whose flows stay fixed")
    _solver_flags(solve)
    solve.set_defaults(func=cmd_solve)

    poa = sub.add_parser("poa", parents=[common], help="four Prices of Anarchy and both VoIs")
    poa.add_argument("topology")
    poa.add_argument("--k", type=int)
    poa.add_argument("--frozen")
    _solver_flags(poa)
    poa.set_defaults(func=cmd_poa)

    sweep = sub.add_parser("sweep", parents=[common], help="multipath-degree sweep (default: Abilene)")
    sweep.add_argument("topology", nargs="?", help="topology file or 'abilene' (default)")
    sweep.add_argument("--k-list", type=_k_list, required=True)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--traffic-matrix")
    sweep.add_argument("--delta-scale", type=float)
    sweep.add_argument("--demand-scale", type=float)
    sweep.add_argument("--hosts-per-pop", type=int, default=1)
    _solver_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)

    cfp = sub.add_parser("closed-form", help="evaluate analytic results")
    csub = cfp.add_subparsers(dest="which", required=True, parser_class=_Parser)
    c = csub.add_parser("parallel-optimum", parents=[common])
    c.add_argument("--m", type=int, default=1)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--d", type=float, required=True)
    c = csub.add_parser("parallel-poa", parents=[common])
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--d", type=float, default=1.0)
    c.add_argument("--K", type=_k_value, required=True, help="end-host count, or 'inf'")
    c = csub.add_parser("ladder-h2", parents=[common])
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--d", type=float, default=1.0)
    c.add_argument("--t", type=float, default=1.0)
    c.add_argument("--worst-case", action="store_true")
    c = csub.add_parser("ladder-system", parents=[common])
    c.add_argument("--H", type=int, required=True)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--d", type=float, required=True)
    c.add_argument("--t", type=float, required=True)
    c = csub.add_parser("ladder-bound", parents=[common])
    c.add_argument("--H", type=int, required=True)
    c.add_argument("--p", type=float, required=True)
    cfp.set_defaults(func=cmd_closed_form)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"anarchy-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, MissingCoordinates, InvalidNetwork, NoPath, OSError) as exc:
        print(f"anarchy-lab: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
