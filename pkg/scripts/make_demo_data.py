#!/usr/bin/env python3
"""Generate the bundled synthetic demo dataset and a matching config.

Writes incidents.csv, areas.geojson, weather.csv, covariates.csv,
scenario.json and a ready-to-run config.json into the output directory:

    python3 scripts/make_demo_data.py --out demo_data
    stdemand pipeline --config demo_data/config.json
"""

import argparse
import json
from pathlib import Path

from stdemand import oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_data")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the scenario seed")
    args = ap.parse_args()

    scenario = oracle.demo_scenario()
    if args.seed is not None:
        scenario.seed = args.seed
    outdir = Path(args.out)
    paths = oracle.dump_dataset(scenario, outdir)

    config = {
        "inputs": {k: paths[k] for k in
                   ("incidents", "areas", "weather", "covariates")},
        "out": str(outdir / "results"),
        "seed": 42,
        "bucket": "week",
        "sarimax": {"p_max": 1, "q_max": 1, "d_set": [0],
                    "seasonal": False, "s": 0},
        "n_perm": 999,
        "kde_bandwidth": 0.08,
        "kde_grid": 100,
        "comap_dims": ["month"],
        "comap_bins": 3,
        "stl_period": 12,
    }
    cfg_path = outdir / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {len(paths)} input files and {cfg_path}")


if __name__ == "__main__":
    main()
