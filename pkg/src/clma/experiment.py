"""Scheme comparison at one operating point, shared by the CLI and the scripts."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (CLMA_INSTANTANEOUS, CLMA_STATISTICAL, DENSE_UPA, ELEMENT_WISE_MA,
                        SPARSE_UPA, baseline_upa, element_wise_optimize)
from .config import RunConfig
from .errors import ConfigError
from .optimizer import (CandidateGrid, OptimizerConfig, TrajectoryPoint, grid_from_resolution,
                        optimize_positions, optimize_selection)
from .receiver import rate_weights, total_power_lower_bound
from .statistical import RealizationSet, candidate_channel_stack, power_per_realization, \
    sample_realizations

logger = logging.getLogger(__name__)

LOWER_BOUND = "lower_bound"


def watts_to_dbm(p: float) -> float:
    """``10 log10(p) + 30``; zero maps to ``-inf``."""
    if p < 0 or math.isnan(p):
        raise ValueError(f"power must be non-negative, got {p}")
    return -math.inf if p == 0 else 10 * math.log10(p) + 30


def format_dbm(p: float) -> str:
    v = watts_to_dbm(p)
    return "-inf" if v == -math.inf else ("inf" if v == math.inf else f"{v:.4f}")


@dataclass(frozen=True)
class OperatingPoint:
    """A run configuration with any sweep override applied."""

    cfg: RunConfig

    @classmethod
    def from_sweep(cls, cfg: RunConfig, param: str | None, value: float | None) -> "OperatingPoint":
        if param is None:
            return cls(cfg)
        a, sc = cfg.array, cfg.scenario
        if param == "K":
            if value != int(value) or value < 1:
                raise ConfigError(f"run.sweep.values: K must be a positive integer, got {value}")
            sc = replace(sc, n_users=int(value))
        elif param == "rate":
            sc = replace(sc, rate=float(value))
        elif param == "region":
            a = replace(a, x_max_lambda=float(value), y_max_lambda=float(value))
        elif param == "delta":
            a = replace(a, grid_delta_lambda=float(value))
        else:
            raise ConfigError(f"run.sweep.param: unknown parameter {param!r}")
        return cls(replace(cfg, array=a, scenario=sc))

    @property
    def wavelength(self) -> float:
        return self.cfg.scenario.wavelength

    def grid(self) -> CandidateGrid:
        a, lam = self.cfg.array, self.wavelength
        return grid_from_resolution(a.x_max_lambda * lam, a.y_max_lambda * lam,
                                    a.grid_delta_lambda * lam, lam, a.M, a.N)

    def optimizer_config(self) -> OptimizerConfig:
        d = self.cfg.array.d_min_lambda * self.wavelength
        return OptimizerConfig(d, d, self.cfg.run.tol, self.cfg.run.max_sweeps)

    def omega(self) -> np.ndarray:
        sc = self.cfg.scenario
        return rate_weights(sc.noise_power, sc.rates)

    def eval_set(self) -> RealizationSet:
        # Even/odd seeds keep the evaluation and optimization streams disjoint.
        return sample_realizations(self.cfg.scenario, self.cfg.run.s_eval, 2 * self.cfg.run.seed)

    def opt_set(self) -> RealizationSet:
        return sample_realizations(self.cfg.scenario, self.cfg.run.s_opt, 2 * self.cfg.run.seed + 1)


@dataclass
class SchemeResult:
    scheme: str
    mean_power: float
    iterations: int
    wall_time: float
    trajectory: list[TrajectoryPoint] = field(default_factory=list)


@dataclass
class PointResult:
    point: OperatingPoint
    bound: float
    schemes: list[SchemeResult]


def _instantaneous(point, grid, realizations, omega, run_one):
    powers, iters, traj = [], [], []
    for s, users in enumerate(realizations):
        value, n_iter, trajectory = run_one(list(users))
        powers.append(value)
        iters.append(n_iter)
        if s == 0:
            traj = trajectory
    return float(np.mean(powers)), int(round(np.mean(iters))), traj


def run_scheme(scheme: str, point: OperatingPoint, realizations: RealizationSet,
               opt_realizations: RealizationSet | None = None) -> SchemeResult:
    """Mean minimum ZF power of one scheme over the evaluation realizations."""
    a, lam = point.cfg.array, point.wavelength
    omega = point.omega()
    t0 = time.perf_counter()
    traj: list[TrajectoryPoint] = []
    iterations = 0
    if scheme in (DENSE_UPA, SPARSE_UPA):
        spacing = a.dense_spacing_lambda if scheme == DENSE_UPA else a.sparse_spacing()
        apv = baseline_upa(scheme, a.M, a.N, lam, spacing * lam)
        mean = float(power_per_realization(apv, realizations, omega).mean())
    elif scheme == CLMA_INSTANTANEOUS:
        grid, ocfg = point.grid(), point.optimizer_config()

        def one(users):
            r = optimize_positions(users, grid, a.M, a.N, omega, ocfg)
            return r.objective, r.iterations, r.trajectory

        mean, iterations, traj = _instantaneous(point, grid, realizations, omega, one)
    elif scheme == ELEMENT_WISE_MA:
        grid = point.grid()
        d_min = a.d_min_lambda * lam

        def one(users):
            r = element_wise_optimize(users, grid, a.M * a.N, omega, d_min,
                                      point.cfg.run.tol, point.cfg.run.max_sweeps)
            return r.objective, len(r.trajectory), r.trajectory

        mean, iterations, traj = _instantaneous(point, grid, realizations, omega, one)
    elif scheme == CLMA_STATISTICAL:
        grid = point.grid()
        opt = opt_realizations if opt_realizations is not None else point.opt_set()
        r = optimize_selection(candidate_channel_stack(grid, opt), grid, a.M, a.N, omega,
                               point.optimizer_config())
        mean = float(power_per_realization(r.apv, realizations, omega).mean())
        iterations, traj = r.iterations, r.trajectory
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return SchemeResult(scheme, mean, iterations, time.perf_counter() - t0, traj)


def mean_lower_bound(point: OperatingPoint, realizations: RealizationSet) -> float:
    sc, a = point.cfg.scenario, point.cfg.array
    return float(np.mean([total_power_lower_bound(list(u), a.M * a.N, sc.noise_power, sc.rates)
                          for u in realizations]))


def run_point(point: OperatingPoint) -> PointResult:
    """Evaluate every configured scheme on a common set of user drops."""
    realizations = point.eval_set()
    needs_opt = CLMA_STATISTICAL in point.cfg.run.schemes
    opt = point.opt_set() if needs_opt else None
    results = [run_scheme(s, point, realizations, opt) for s in point.cfg.run.schemes]
    bound = mean_lower_bound(point, realizations)
    logger.info("K=%d: %s", point.cfg.scenario.n_users,
                ", ".join(f"{r.scheme}={format_dbm(r.mean_power)} dBm" for r in results))
    return PointResult(point, bound, results)


def sweep_points(cfg: RunConfig, param: str | None = None,
                 values=None) -> list[OperatingPoint]:
    if param is None and cfg.run.sweep is not None:
        param, values = cfg.run.sweep.param, cfg.run.sweep.values
    if param is None:
        return [OperatingPoint(cfg)]
    return [OperatingPoint.from_sweep(cfg, param, v) for v in values]
