"""Per-seed dB gaps between schemes at desk scale, with medians.

Each seed draws its own evaluation users and its own statistical-design
realizations. Gaps are ratios of per-seed mean powers.

    python3 scripts/desk_trends.py --seeds 20 --eval 5
"""
import argparse
import dataclasses

import numpy as np

from clma.config import load_config
from clma.experiment import OperatingPoint, run_point

GAPS = {
    "inst-bound": ("cl_ma_instantaneous", "lower_bound"),
    "inst-elementwise": ("cl_ma_instantaneous", "element_wise_ma"),
    "dense-inst": ("dense_upa", "cl_ma_instantaneous"),
    "stat-inst": ("cl_ma_statistical", "cl_ma_instantaneous"),
    "sparse-stat": ("sparse_upa", "cl_ma_statistical"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/desk.toml")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--eval", type=int, default=5, help="evaluation draws per seed")
    ap.add_argument("--users", type=int, help="override the number of users")
    args = ap.parse_args()
    cfg = load_config(args.config)
    if args.users:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario,
                                                                    n_users=args.users))
    table = []
    print("seed " + " ".join(f"{k:>17}" for k in GAPS))
    for seed in range(args.seeds):
        run = dataclasses.replace(cfg.run, seed=seed, s_eval=args.eval)
        res = run_point(OperatingPoint(dataclasses.replace(cfg, run=run)))
        p = {r.scheme: r.mean_power for r in res.schemes}
        p["lower_bound"] = res.bound
        row = [10 * np.log10(p[a] / p[b]) for a, b in GAPS.values()]
        table.append(row)
        print(f"{seed:4d} " + " ".join(f"{v:17.2f}" for v in row))
    print("med  " + " ".join(f"{v:17.2f}" for v in np.median(table, axis=0)))


if __name__ == "__main__":
    main()
