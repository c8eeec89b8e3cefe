"""PI Prices of Anarchy on Abilene for k = 1..8 under scaled delay and demand knobs."""
import itertools

from anarchy_lab.experiments import run_multipath_sweep
from anarchy_lab.topologies import AbileneConfig, resolve_abilene


def main():
    base = resolve_abilene()
    print(f"# default delta_scale={base.delta_scale!r} demand_scale={base.demand_scale!r}")
    print("delta_mult,demand_mult,metric," + ",".join(f"k{k}" for k in range(1, 9)))
    for dm, qm in itertools.product((0.25, 1.0, 4.0), (0.1, 1.0, 3.0)):
        cfg = AbileneConfig(delta_scale=base.delta_scale * dm, demand_scale=base.demand_scale * qm)
        points = run_multipath_sweep(resolve_abilene(cfg).network, range(1, 9))
        for metric in ("poa_star_0", "poa_star_plus", "poa_hash_0", "poa_hash_plus"):
            vals = ",".join(f"{getattr(p.report, metric):.6f}" for p in points)
            print(f"{dm},{qm},{metric},{vals}")


if __name__ == "__main__":
    main()
