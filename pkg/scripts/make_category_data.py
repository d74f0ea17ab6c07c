#!/usr/bin/env python3
"""Regenerate the synthetic category data shipped under dualarm/data.

Writes canonical/training/test clouds, canonical grasp annotations and
per-instance ground-truth grasps for the can and drill families.
"""

import sys
from pathlib import Path

import numpy as np
import yaml

from dualarm.shapespace import save_xyz
from dualarm.shapespace import synthetic as syn
from dualarm.shapespace.grasps import grasps_to_dict

DATA = Path(__file__).resolve().parents[1] / "src" / "dualarm" / "data" / "categories"

FAMILIES = {
    "cans": dict(sample=syn.sample_can, grasps=syn.can_grasps,
                 random=syn.random_can_params, canonical=syn.CANONICAL_CAN,
                 train_seed=7, test_seed=100),
    "drills": dict(sample=syn.sample_drill, grasps=syn.drill_grasps,
                   random=syn.random_drill_params, canonical=syn.CANONICAL_DRILL,
                   train_seed=8, test_seed=101),
}


def main():
    for name, fam in FAMILIES.items():
        out = DATA / name
        out.mkdir(parents=True, exist_ok=True)
        save_xyz(out / "canonical.xyz", fam["sample"](fam["canonical"]).points)
        with open(out / "grasps.yaml", "w") as fh:
            yaml.safe_dump(grasps_to_dict(fam["grasps"](fam["canonical"])), fh,
                           sort_keys=False)
        rng = np.random.default_rng(fam["train_seed"])
        for i in range(8):
            params = fam["random"](rng)
            save_xyz(out / f"train_{i:02d}.xyz", fam["sample"](params).points)
        rng = np.random.default_rng(fam["test_seed"])
        instances = {}
        for i in range(3):
            params = fam["random"](rng)
            fname = f"test_{i:02d}.xyz"
            save_xyz(out / fname, fam["sample"](params).points)
            instances[fname] = {
                "params": {k: float(v) for k, v in vars(params).items()},
                "grasps": grasps_to_dict(fam["grasps"](params)),
            }
        with open(out / "instances.yaml", "w") as fh:
            yaml.safe_dump({"instances": instances}, fh, sort_keys=False)
        print(f"{name}: wrote canonical + 8 training + 3 test instances to {out}")


if __name__ == "__main__":
    sys.exit(main())
