"""Locate, per (H, p, d), the rail slope t above which the linear ladder system matches best response.

For each t on a geometric grid the script runs best-response dynamics, checks
the one-level-deviation structure (no path spanning two or more rung levels
carries more than 1e-7), and compares link flows with the flows implied by the
linear system.  The printed threshold is the smallest grid t from which on
every larger grid t agrees within the tolerance.

    python3 scripts/ladder_threshold.py [--tol 1e-5] [--t-max 1e5]
"""
import argparse
import itertools

import numpy as np

from anarchy_lab.closed_form import LadderSpec, ladder_implied_link_flows, ladder_solve_system
from anarchy_lab.flows import link_flows
from anarchy_lab.network import build_universe
from anarchy_lab.solvers import solve_pi_equilibrium
from anarchy_lab.topologies import gen_ladder

STRUCTURE_TOL = 1e-7


def rung_span(path) -> int:
    return sum(1 for l in path.links if l.startswith("v")) // 2


def agreement(spec: LadderSpec):
    """(deepest deviating path flow, max relative link-flow mismatch)."""
    U = build_universe(gen_ladder(spec))
    res = solve_pi_equilibrium(U)
    deep = max((x for x, p in zip(res.pattern.flows, U.paths) if rung_span(p) >= 2), default=0.0)
    solver = link_flows(res.pattern).as_dict()
    implied = ladder_implied_link_flows(spec, ladder_solve_system(spec).F)
    mismatch = max(abs(solver[l] - implied[l]) / max(1.0, abs(solver[l])) for l in solver)
    return deep, mismatch


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tol", type=float, default=1e-5)
    ap.add_argument("--t-max", type=float, default=1e5)
    ap.add_argument("--H", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--p", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--d", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    args = ap.parse_args()

    grid = np.geomspace(0.5, args.t_max, int(round(4 * np.log10(args.t_max / 0.5))) + 1)
    print("H,p,d,t_structure,t_agreement")
    for H, p, d in itertools.product(args.H, args.p, args.d):
        rows = [(t, *agreement(LadderSpec(H, p, d, float(t)))) for t in grid]
        structure = next((t for t, deep, _ in rows if deep < STRUCTURE_TOL), None)
        agree = None
        for t, deep, err in reversed(rows):
            if deep >= STRUCTURE_TOL or err > args.tol:
                break
            agree = t
        fmt = lambda v: "none" if v is None else f"{v:.4g}"
        print(f"{H},{p},{d:g},{fmt(structure)},{fmt(agree)}")


if __name__ == "__main__":
    main()
