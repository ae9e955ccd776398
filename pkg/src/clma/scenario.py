"""Sector deployment used in the experiments: user drops and LoS path synthesis.

Coordinates are ``(x, h, z)`` in meters: ``x`` lateral (parallel to the array's
horizontal axis), ``h`` height above ground, ``z`` depth along the sector
bisector. The array sits in the vertical x-h plane at ``(0, bs_height, 0)``
and faces +z. For a unit direction ``u`` from the array to a user, the
horizontal virtual AoA is ``u_x`` (= cos(elev) cos(azimuth from the x axis))
and the vertical one is ``u_h`` (= sin(elev)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import UserPathSet
from .errors import ConfigError, InvalidInputError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Building:
    center_xz: tuple[float, float]
    height: float
    side: float


DEFAULT_BUILDINGS = (
    Building((15.0, 30.0), 30.0, 10.0),
    Building((0.0, 40.0), 30.0, 10.0),
    Building((-15.0, 30.0), 30.0, 10.0),
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Deployment parameters; defaults reproduce the full-scale setup."""

    n_users: int = 18
    bs_height: float = 10.0
    sector_deg: float = 120.0
    ground_range: tuple[float, float] = (5.0, 50.0)
    buildings: tuple[Building, ...] = DEFAULT_BUILDINGS
    fraction_in_buildings: float = 0.5
    carrier_freq: float = 30e9
    noise_power: float = 1e-11
    rate: float = 3.0
    path_loss_exponent: float = 2.0

    def __post_init__(self):
        d_lo, d_hi = self.ground_range
        if self.n_users < 1:
            raise ConfigError("n_users must be positive")
        if not (self.bs_height > 0 and self.carrier_freq > 0 and self.noise_power > 0
                and self.path_loss_exponent > 0):
            raise ConfigError("height, carrier frequency, noise power and path-loss exponent "
                              "must be positive")
        if not 0 < self.sector_deg <= 360:
            raise ConfigError("sector must be in (0, 360] degrees")
        if not 0 <= d_lo <= d_hi:
            raise ConfigError(f"invalid ground range {self.ground_range}")
        if not 0 <= self.fraction_in_buildings <= 1:
            raise ConfigError("fraction_in_buildings must lie in [0, 1]")
        if self.rate < 0:
            raise ConfigError("rate must be non-negative")
        if self.n_building_users > 0 and not self.buildings:
            raise ConfigError("users are assigned to buildings but none are configured")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def bs_position(self) -> np.ndarray:
        return np.array([0.0, self.bs_height, 0.0])

    @property
    def n_building_users(self) -> int:
        return int(round(self.n_users * self.fraction_in_buildings))

    @property
    def rates(self) -> np.ndarray:
        return np.full(self.n_users, float(self.rate))


@dataclass(frozen=True)
class User:
    position: np.ndarray
    paths: UserPathSet
    distance: float
    in_building: bool = field(default=False)


def los_path_from_geometry(bs_pos, user_pos, wavelength: float, alpha: float,
                           rng: np.random.Generator) -> UserPathSet:
    """Single LoS path with amplitude ``wavelength / (4 pi D^(alpha/2))`` and uniform phase."""
    d = np.asarray(user_pos, dtype=float) - np.asarray(bs_pos, dtype=float)
    dist = float(np.linalg.norm(d))
    if dist == 0:
        raise InvalidInputError("user coincides with the array")
    u = d / dist
    amplitude = wavelength / (4 * np.pi * dist ** (alpha / 2))
    phase = rng.uniform(0.0, 2 * np.pi)
    return UserPathSet.single(float(np.clip(u[0], -1, 1)), float(np.clip(u[1], -1, 1)),
                              amplitude * np.exp(1j * phase))


def sample_ground_position(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform (in area) drop on the annular sector at ground level."""
    d_lo, d_hi = cfg.ground_range
    rho = np.sqrt(rng.uniform(d_lo ** 2, d_hi ** 2))
    half = np.deg2rad(cfg.sector_deg) / 2
    psi = rng.uniform(-half, half)
    return np.array([rho * np.sin(psi), 0.0, rho * np.cos(psi)])


def sample_building_position(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    b = cfg.buildings[int(rng.integers(len(cfg.buildings)))]
    cx, cz = b.center_xz
    half = b.side / 2
    return np.array([cx + rng.uniform(-half, half), rng.uniform(0.0, b.height),
                     cz + rng.uniform(-half, half)])


def sample_users(cfg: ScenarioConfig, rng: np.random.Generator) -> list[User]:
    """Drop ``cfg.n_users`` users; the first ones on the ground, the rest in buildings."""
    n_ground = cfg.n_users - cfg.n_building_users
    streams = rng.spawn(cfg.n_users)
    users = []
    for k, child in enumerate(streams):
        in_building = k >= n_ground
        pos = sample_building_position(cfg, child) if in_building else sample_ground_position(cfg, child)
        paths = los_path_from_geometry(cfg.bs_position, pos, cfg.wavelength,
                                       cfg.path_loss_exponent, child)
        users.append(User(pos, paths, float(np.linalg.norm(pos - cfg.bs_position)), in_building))
    return users


def path_sets(users) -> list[UserPathSet]:
    return [u.paths for u in users]
