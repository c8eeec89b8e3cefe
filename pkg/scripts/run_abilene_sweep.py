"""Multipath-degree sweep on the vendored Abilene snapshot; prints the results table.

    python3 scripts/run_abilene_sweep.py [--k-max 8] [--hosts-per-pop 1] [--jobs 1]
"""
import argparse
import sys

from anarchy_lab.experiments import run_multipath_sweep, sweep_csv
from anarchy_lab.solvers import SolverConfig
from anarchy_lab.topologies import AbileneConfig, resolve_abilene


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k-max", type=int, default=8)
    ap.add_argument("--hosts-per-pop", type=int, default=1)
    ap.add_argument("--demand-scale", type=float)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = SolverConfig()
    load = resolve_abilene(AbileneConfig(hosts_per_pop=args.hosts_per_pop, demand_scale=args.demand_scale), cfg)
    print("# " + ", ".join(f"{k}={v}" for k, v in load.config_echo().items()), file=sys.stderr)
    points = run_multipath_sweep(load.network, range(1, args.k_max + 1), cfg, jobs=args.jobs)
    sys.stdout.write(sweep_csv(points))


if __name__ == "__main__":
    main()
