"""Command-line batch runner.

Exit codes: 0 success, 1 configuration error, 2 infeasible instance,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import (CLMA_INSTANTANEOUS, CLMA_STATISTICAL, DENSE_UPA, ELEMENT_WISE_MA,
                        SCHEMES, SPARSE_UPA, baseline_upa, beam_pattern, element_wise_optimize,
                        virtual_angles)
from .channel import UserPathSet, channel_matrix
from .closed_form import construct_optimal_apvs, tightness_check, verify_cvo
from .config import SWEEP_PARAMS, RunConfig, load_config
from .errors import ConfigError, InfeasibleError, SingularChannelError
from .experiment import (LOWER_BOUND, OperatingPoint, PointResult, format_dbm, run_point,
                         sweep_points)
from .optimizer import optimize_positions, optimize_selection
from .receiver import rate_weights, total_power_lower_bound, total_power_zf
from .statistical import candidate_channel_stack

logger = logging.getLogger("clma")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3

RESULTS_HEADER = ("scheme", "K", "rate", "region_lambda", "delta_lambda", "seed",
                  "total_power_dbm", "bound_dbm", "iterations", "wall_time_s")
TRAJECTORY_HEADER = ("scheme", "iteration", "objective_dbm")
BEAM_HEADER = ("theta_deg", "phi_deg", "magnitude_db")
SINGLE_ANTENNA = "single_antenna"

RATIO_TOL = 1e-6
CVO_TOL = 1e-9


def _num(v: float) -> str:
    return f"{v:.12g}"


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be non-negative")
        cfg = cfg.with_seed(args.seed)
    return cfg


def result_rows(res: PointResult, timing: bool) -> list[list[str]]:
    cfg = res.point.cfg
    a, sc = cfg.array, cfg.scenario
    common = [str(sc.n_users), _num(sc.rate), _num(a.x_max_lambda), _num(a.grid_delta_lambda),
              str(cfg.run.seed)]
    bound = format_dbm(res.bound)
    rows = []
    for r in res.schemes:
        wall = f"{r.wall_time:.3f}" if timing else "nan"
        rows.append([r.scheme, *common, format_dbm(r.mean_power), bound, str(r.iterations), wall])
    rows.append([LOWER_BOUND, *common, bound, bound, "0", "nan" if not timing else "0.000"])
    return rows


def trajectory_rows(res: PointResult) -> list[list[str]]:
    return [[r.scheme, str(p.iteration), format_dbm(p.objective)]
            for r in res.schemes for p in r.trajectory]


def cmd_run(cfg: RunConfig, out: Path, threads: int = 1, timing: bool = False,
            param: str | None = None, values=None) -> int:
    points = sweep_points(cfg, param, values)
    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_point, points))
    else:
        results = [run_point(p) for p in points]
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULTS_HEADER,
               [row for res in results for row in result_rows(res, timing)])
    # Convergence traces are kept for the first operating point only.
    _write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, trajectory_rows(results[0]))
    logger.info("wrote %s and %s", out / "results.csv", out / "trajectory.csv")
    return EXIT_OK


def _verify_instance(users, cfg: RunConfig) -> tuple[float, float, object]:
    a, sc = cfg.array, cfg.scenario
    lam = sc.wavelength
    d = a.d_min_lambda * lam
    sol = construct_optimal_apvs(users, a.M, a.N, d, d, lam)
    H = channel_matrix(sol.apv, users)
    rates = np.full(len(users), sc.rate)
    achieved = total_power_zf(H, rate_weights(sc.noise_power, rates))
    ratio = achieved / total_power_lower_bound(users, a.M * a.N, sc.noise_power, rates)
    return ratio, verify_cvo(H), sol


def cmd_verify_bound(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    a, v = cfg.array, cfg.verify
    lam = cfg.scenario.wavelength
    sizes = [len(v.users)] if v.users else []
    if v.random_instances:
        sizes.append(v.n_users)
    for K in sizes:
        if not tightness_check(K, a.M, a.N):
            print(f"K={K} users need {K * (K - 1) // 2} orthogonal pairs, more than the prime "
                  f"factors of M={a.M} and N={a.N} provide; the bound is not achievable",
                  file=stream)
            return EXIT_INFEASIBLE
    ok = True
    if v.users:
        users = [UserPathSet.single(u[0], u[1], u[2] if len(u) > 2 else 1.0) for u in v.users]
        ratio, cvo, sol = _verify_instance(users, cfg)
        print(f"x/lambda = {np.array2string(sol.apv.x / lam, precision=6)}", file=stream)
        print(f"y/lambda = {np.array2string(sol.apv.y / lam, precision=6)}", file=stream)
        print(f"max CVO correlation = {cvo:.3e}", file=stream)
        print(f"power / bound = {ratio:.12f}", file=stream)
        ok &= ratio <= 1 + RATIO_TOL and cvo < CVO_TOL
    if v.random_instances:
        rng = np.random.default_rng(cfg.run.seed)
        worst_ratio, worst_cvo = 0.0, 0.0
        for _ in range(v.random_instances):
            h = rng.uniform(-1, 1, v.n_users)
            t = rng.uniform(-1, 1, v.n_users)
            b = rng.uniform(0.5, 1.5, v.n_users) * np.exp(2j * np.pi * rng.uniform(size=v.n_users))
            users = [UserPathSet.single(h[k], t[k], b[k]) for k in range(v.n_users)]
            ratio, cvo, _ = _verify_instance(users, cfg)
            worst_ratio, worst_cvo = max(worst_ratio, ratio), max(worst_cvo, cvo)
        print(f"{v.random_instances} random instances: worst power/bound = {worst_ratio:.12f}, "
              f"worst CVO = {worst_cvo:.3e}", file=stream)
        ok &= worst_ratio <= 1 + RATIO_TOL and worst_cvo < CVO_TOL
    print("PASS" if ok else "FAIL", file=stream)
    return EXIT_OK if ok else EXIT_NUMERICAL


def beam_points(cfg: RunConfig, scheme: str) -> np.ndarray:
    """Element coordinates (A, 2) of the array a scheme would deploy."""
    a = cfg.array
    point = OperatingPoint(cfg)
    lam = point.wavelength
    if scheme == SINGLE_ANTENNA:
        return np.zeros((1, 2))
    if scheme in (DENSE_UPA, SPARSE_UPA):
        spacing = a.dense_spacing_lambda if scheme == DENSE_UPA else a.sparse_spacing()
        return baseline_upa(scheme, a.M, a.N, lam, spacing * lam).positions()
    grid, omega = point.grid(), point.omega()
    if scheme == CLMA_STATISTICAL:
        r = optimize_selection(candidate_channel_stack(grid, point.opt_set()), grid, a.M, a.N,
                               omega, point.optimizer_config())
        return r.apv.positions()
    users = list(point.eval_set().realizations[0])
    if scheme == CLMA_INSTANTANEOUS:
        return optimize_positions(users, grid, a.M, a.N, omega,
                                  point.optimizer_config()).apv.positions()
    if scheme == ELEMENT_WISE_MA:
        return element_wise_optimize(users, grid, a.M * a.N, omega, a.d_min_lambda * lam,
                                     cfg.run.tol, cfg.run.max_sweeps).positions
    raise ConfigError(f"unknown scheme {scheme!r}; choose from {(SINGLE_ANTENNA,) + SCHEMES}")


def beampattern_rows(cfg: RunConfig, points: np.ndarray) -> list[list[str]]:
    b = cfg.beampattern
    theta = np.linspace(b.theta_deg[0], b.theta_deg[1], b.theta_deg[2])
    phi = np.linspace(b.phi_deg[0], b.phi_deg[1], b.phi_deg[2])
    T, P = np.meshgrid(theta, phi, indexing="ij")
    vh, vv = virtual_angles(np.deg2rad(T), np.deg2rad(P))
    mag = beam_pattern(points, cfg.scenario.wavelength, vh, vv)
    rows = []
    for t, p, m in zip(T.ravel(), P.ravel(), mag.ravel()):
        db = 20 * math.log10(m) if m > 0 else -math.inf
        rows.append([_num(t), _num(p), "-inf" if db == -math.inf else f"{db:.4f}"])
    return rows


def cmd_beampattern(cfg: RunConfig, scheme: str, out: Path) -> int:
    rows = beampattern_rows(cfg, beam_points(cfg, scheme))
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / f"beampattern_{scheme}.csv", BEAM_HEADER, rows)
    return EXIT_OK


def _parse_values(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"--values: cannot parse {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clma", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override run.seed")
        if out:
            p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
        # also accepted after the subcommand; SUPPRESS keeps the top-level value otherwise
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    run = sub.add_parser("run", help="compare schemes (and the config's sweep, if any)")
    common(run)
    run.add_argument("--timing", action="store_true",
                     help="record wall-clock times (makes results.csv non-reproducible)")
    sw = sub.add_parser("sweep", help="run a parameter sweep")
    common(sw)
    sw.add_argument("--param", choices=SWEEP_PARAMS)
    sw.add_argument("--values", help="comma-separated sweep values")
    sw.add_argument("--timing", action="store_true")
    vb = sub.add_parser("verify-bound", help="check the closed-form construction attains the bound")
    common(vb, out=False)
    bp = sub.add_parser("beampattern", help="export a beam pattern grid")
    common(bp)
    bp.add_argument("--scheme", required=True)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which would read as "infeasible"
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        cfg = _load(args)
        if args.command == "run":
            return cmd_run(cfg, args.out, args.threads, args.timing)
        if args.command == "sweep":
            param = args.param
            values = _parse_values(args.values) if args.values else None
            if param is None and cfg.run.sweep is None:
                raise ConfigError("sweep: give --param/--values or a run.sweep table")
            if param is not None and not values:
                raise ConfigError("--values: required with --param")
            if param is None and values:
                param = cfg.run.sweep.param
            return cmd_run(cfg, args.out, args.threads, args.timing, param, values)
        if args.command == "verify-bound":
            return cmd_verify_bound(cfg)
        if args.command == "beampattern":
            return cmd_beampattern(cfg, args.scheme, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SingularChannelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
