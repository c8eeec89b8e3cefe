"""Regenerate the vendored Abilene snapshot: PoP topology with coordinates and a gravity traffic matrix.

Traffic between PoPs i and j is proportional to the product of the metro
populations served by each PoP, scaled so the busiest pair carries 1000 units.
The result is symmetric with an empty diagonal.

    python3 scripts/make_abilene_tm.py [output-dir]
"""
import csv
import json
import sys
from pathlib import Path

import numpy as np

# PoP: (lat, lon, metro population in millions)
POPS = {
    "STTL": (47.6062, -122.3321, 3.8),
    "SNVA": (37.3688, -122.0363, 7.7),
    "LOSA": (34.0522, -118.2437, 13.2),
    "DNVR": (39.7392, -104.9903, 2.9),
    "KSCY": (39.0997, -94.5786, 2.1),
    "HSTN": (29.7604, -95.3698, 6.9),
    "CHIN": (41.8781, -87.6298, 9.5),
    "IPLS": (39.7684, -86.1581, 2.0),
    "ATLA": (33.7490, -84.3880, 5.9),
    "WASH": (38.9072, -77.0369, 6.2),
    "NYCM": (40.7128, -74.0060, 19.8),
}

LINKS = [
    ("NYCM", "CHIN"), ("NYCM", "WASH"), ("CHIN", "IPLS"), ("WASH", "ATLA"),
    ("IPLS", "ATLA"), ("IPLS", "KSCY"), ("ATLA", "HSTN"), ("KSCY", "HSTN"),
    ("KSCY", "DNVR"), ("HSTN", "LOSA"), ("DNVR", "SNVA"), ("DNVR", "STTL"),
    ("STTL", "SNVA"), ("SNVA", "LOSA"),
]


def topology_document() -> dict:
    return {
        "format_version": 1,
        "name": "abilene",
        "ases": [{"id": pop, "lat": lat, "lon": lon} for pop, (lat, lon, _) in POPS.items()],
        "links": [{"id": f"{a}-{b}", "endpoints": [a, b], "coefficients": [0.0, 0.0, 1.0]} for a, b in LINKS],
        "endhosts": [],
        "demands": [],
    }


def gravity_matrix() -> np.ndarray:
    pop = np.array([v[2] for v in POPS.values()])
    M = np.outer(pop, pop)
    np.fill_diagonal(M, 0.0)
    return np.round(1000.0 * M / M.max(), 3)


def main(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "abilene_topology.json").write_text(json.dumps(topology_document(), indent=2) + "\n")
    with (out_dir / "abilene_tm.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POPS)
        for row in gravity_matrix():
            w.writerow([f"{v:g}" for v in row])


if __name__ == "__main__":
    default = Path(__file__).resolve().parent.parent / "src" / "anarchy_lab" / "data"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
