"""Instantaneous CL-MA against the dense UPA as the user count grows.

    python3 scripts/user_sweep.py --users 4 8 12 14 --seeds 20
"""
import argparse

import numpy as np

from clma.baselines import baseline_upa
from clma.channel import channel_matrix
from clma.config import load_config
from clma.experiment import OperatingPoint
from clma.optimizer import optimize_positions
from clma.receiver import total_power_lower_bound, total_power_zf



def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/desk.toml")
    ap.add_argument("--users", type=int, nargs="+", default=[4, 8, 10, 12, 14])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    base = load_config(args.config)
    a = base.array
    print(f"{'K':>3} {'dense-inst dB':>14} {'inst-bound dB':>14}")
    for K in args.users:
        dense_gap, bound_gap = [], []
        for seed in range(args.seeds):
            point = OperatingPoint.from_sweep(base.with_seed(seed), "K", K)
            lam, om = point.wavelength, point.omega()
            users = list(point.eval_set().realizations[0])
            r = optimize_positions(users, point.grid(), a.M, a.N, om, point.optimizer_config())
            dense = total_power_zf(channel_matrix(baseline_upa("dense_upa", a.M, a.N, lam),
                                                  users), om)
            sc = point.cfg.scenario
            bound = total_power_lower_bound(users, a.M * a.N, sc.noise_power, sc.rates)
            dense_gap.append(10 * np.log10(dense / r.objective))
            bound_gap.append(10 * np.log10(r.objective / bound))
        print(f"{K:3d} {np.median(dense_gap):14.2f} {np.median(bound_gap):14.2f}")


if __name__ == "__main__":
    main()
