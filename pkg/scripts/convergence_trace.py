"""Objective trajectory of elimination and refinement for one scenario draw.

Writes ``iteration,phase,feasible,objective_dbm`` rows to stdout (or a file).

    python3 scripts/convergence_trace.py --config configs/default.toml --seed 1
"""
import argparse
import csv
import sys

from clma.config import RunConfig, load_config
from clma.experiment import OperatingPoint, watts_to_dbm
from clma.optimizer import optimize_positions


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV path; stdout if omitted")
    args = ap.parse_args()
    cfg = (load_config(args.config) if args.config else RunConfig()).with_seed(args.seed)
    point = OperatingPoint(cfg)
    users = list(point.eval_set().realizations[0])
    a = cfg.array
    r = optimize_positions(users, point.grid(), a.M, a.N, point.omega(), point.optimizer_config())
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["iteration", "phase", "feasible", "objective_dbm"])
    for p in r.trajectory:
        w.writerow([p.iteration, p.phase, int(p.feasible), f"{watts_to_dbm(p.objective):.4f}"])
    if args.out:
        fh.close()
    print(f"{r.iterations} steps, {r.sweeps} refinement sweeps, "
          f"final {watts_to_dbm(r.objective):.2f} dBm", file=sys.stderr)


if __name__ == "__main__":
    main()
