"""Two-timescale design: APVs chosen for the channel distribution.

The expected total power over random user drops is approximated by the
sample mean over S channel realizations and minimized with the same
elimination/refinement search used for instantaneous channels. Power control
and ZF combining still adapt to each realization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .channel import ApvPair, UserPathSet, channel_matrix
from .errors import InvalidInputError, SingularChannelError
from .optimizer import (CandidateGrid, OptimizationResult, OptimizerConfig, SelectionPair,
                        candidate_channel_matrix, objective, optimize_selection)
from .receiver import rate_weights, total_power_zf
from .scenario import ScenarioConfig, path_sets, sample_users

logger = logging.getLogger(__name__)

#: Two users closer than this in both virtual AoAs make a realization degenerate.
DEGENERATE_AOA_TOL = 1e-9


@dataclass(frozen=True)
class RealizationSet:
    realizations: tuple[tuple[UserPathSet, ...], ...]
    seed: int
    n_resampled: int = 0

    def __len__(self) -> int:
        return len(self.realizations)

    def __iter__(self):
        return iter(self.realizations)


def _degenerate(users) -> bool:
    h = np.array([u.paths.aoa_h[0] for u in users])
    v = np.array([u.paths.aoa_v[0] for u in users])
    close = (np.abs(h[:, None] - h[None]) < DEGENERATE_AOA_TOL) & \
            (np.abs(v[:, None] - v[None]) < DEGENERATE_AOA_TOL)
    np.fill_diagonal(close, False)
    return bool(close.any())


def sample_realizations(scenario: ScenarioConfig, S: int, seed: int) -> RealizationSet:
    """Draw S independent user drops.

    Realization s uses its own child stream of ``SeedSequence(seed)``, so a
    set of size S is a prefix of any larger set with the same seed.
    Degenerate drops (two users along the same direction) are replaced by a
    fresh draw from the same stream and counted in ``n_resampled``.
    """
    if S < 1:
        raise InvalidInputError("need at least one realization")
    children = np.random.SeedSequence(seed).spawn(S)
    out, resampled = [], 0
    for child in children:
        rng = np.random.default_rng(child)
        users = sample_users(scenario, rng)
        while _degenerate(users):
            resampled += 1
            users = sample_users(scenario, rng)
        out.append(tuple(path_sets(users)))
    if resampled:
        logger.info("resampled %d degenerate realizations", resampled)
    return RealizationSet(tuple(out), int(seed), resampled)


def candidate_channel_stack(grid: CandidateGrid, realizations) -> np.ndarray:
    """Candidate channels of every realization, shape (S, n_x * n_y, K)."""
    return np.stack([candidate_channel_matrix(grid, list(r)) for r in realizations])


def expected_objective(sel: SelectionPair, realizations, omega, grid: CandidateGrid) -> float:
    """Sample mean of the instantaneous objective over the realizations."""
    values = []
    for s, users in enumerate(realizations):
        Hbar = candidate_channel_matrix(grid, list(users))
        try:
            values.append(objective(sel, Hbar, omega, grid.n_y))
        except SingularChannelError as exc:
            raise SingularChannelError(f"realization {s}: {exc}") from exc
    return float(np.mean(values))


def power_per_realization(apv: ApvPair, realizations, omega) -> np.ndarray:
    """Minimum total ZF power of a fixed array for each realization."""
    out = np.empty(len(realizations))
    for s, users in enumerate(realizations):
        try:
            out[s] = total_power_zf(channel_matrix(apv, list(users)), omega)
        except SingularChannelError as exc:
            raise SingularChannelError(f"realization {s}: {exc}") from exc
    return out


def optimize_statistical(scenario: ScenarioConfig | None, grid: CandidateGrid, M: int, N: int,
                         omega, cfg: OptimizerConfig, S: int = 100, seed: int = 0,
                         realizations: RealizationSet | None = None) -> OptimizationResult:
    """APVs minimizing the sample-mean power over S realizations.

    Pass ``realizations`` to optimize over a fixed set instead of drawing one
    from ``scenario``; the returned objective is then the sample mean over it.
    """
    if realizations is None:
        if scenario is None:
            raise InvalidInputError("need a scenario or a realization set")
        realizations = sample_realizations(scenario, S, seed)
    if omega is None:
        omega = rate_weights(scenario.noise_power, scenario.rates)
    return optimize_selection(candidate_channel_stack(grid, realizations), grid, M, N, omega, cfg)


@dataclass(frozen=True)
class UniformSectorDistance:
    """Users uniform in area on a ground annulus, array at ``height``.

    ``D^2`` is then uniform on ``[height^2 + d_min^2, height^2 + d_max^2]``.
    """

    height: float
    d_min: float
    d_max: float

    def __post_init__(self):
        if self.height < 0 or not 0 <= self.d_min <= self.d_max:
            raise InvalidInputError("invalid sector distance model")

    def moment(self, alpha: float) -> float:
        lo = self.height ** 2 + self.d_min ** 2
        hi = self.height ** 2 + self.d_max ** 2
        if hi == lo:
            return lo ** (alpha / 2)
        if alpha == 2:
            return self.height ** 2 + (self.d_min ** 2 + self.d_max ** 2) / 2
        value, _ = integrate.quad(lambda u: u ** (alpha / 2), lo, hi)
        return value / (hi - lo)


@dataclass(frozen=True)
class EmpiricalDistance:
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.size == 0 or np.any(s <= 0):
            raise InvalidInputError("need positive distance samples")
        object.__setattr__(self, "samples", s)

    def moment(self, alpha: float) -> float:
        return float(np.mean(self.samples ** alpha))


def expected_lower_bound(K: int, M: int, N: int, noise_power: float, rates, wavelength: float,
                         alpha: float, distance_model) -> float:
    """Expected value of the summed per-user power bound over user distances.

    With ``|b| = wavelength / (4 pi D^(alpha/2))`` the bound of one user is
    ``D^alpha * 16 pi^2 omega_k / (MN wavelength^2)``.
    """
    if not alpha > 0:
        raise InvalidInputError("path-loss exponent must be positive")
    if not hasattr(distance_model, "moment"):
        raise InvalidInputError(f"invalid distance model {distance_model!r}")
    omega = rate_weights(noise_power, np.broadcast_to(np.asarray(rates, dtype=float), (K,)))
    scale = 16 * np.pi ** 2 / (M * N * wavelength ** 2)
    return float(distance_model.moment(alpha) * scale * omega.sum())
