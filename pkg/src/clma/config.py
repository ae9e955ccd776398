"""TOML run configuration.

Array lengths are given in wavelengths (``*_lambda`` keys). Scenario
distances are in meters. Unknown keys are rejected with their dotted path.
See ``configs/default.toml`` for every key with its default value.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import SCHEMES, UPA_SPACING
from .errors import ConfigError
from .scenario import Building, ScenarioConfig

SWEEP_PARAMS = ("K", "rate", "region", "delta")


@dataclass(frozen=True)
class ArraySettings:
    M: int = 6
    N: int = 6
    x_max_lambda: float = 20.0
    y_max_lambda: float = 20.0
    d_min_lambda: float = 0.5
    grid_delta_lambda: float = 0.25
    dense_spacing_lambda: float = UPA_SPACING["dense_upa"]
    #: None spreads the sparse UPA over the whole region.
    sparse_spacing_lambda: float | None = None

    def sparse_spacing(self) -> float:
        """Sparse-UPA spacing in wavelengths."""
        if self.sparse_spacing_lambda is not None:
            return self.sparse_spacing_lambda
        spans = [v / (n - 1) for v, n in ((self.x_max_lambda, self.M), (self.y_max_lambda, self.N))
                 if n > 1]
        return min(spans) if spans else UPA_SPACING["sparse_upa"]


@dataclass(frozen=True)
class SweepSettings:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    s_opt: int = 100
    s_eval: int = 1000
    tol: float = 1e-9
    max_sweeps: int = 50
    schemes: tuple[str, ...] = SCHEMES
    sweep: SweepSettings | None = None


@dataclass(frozen=True)
class VerifySettings:
    users: tuple[tuple[float, ...], ...] = ()
    random_instances: int = 100
    n_users: int = 3


@dataclass(frozen=True)
class BeamSettings:
    theta_deg: tuple[float, float, int] = (-90.0, 90.0, 91)
    phi_deg: tuple[float, float, int] = (0.0, 180.0, 91)


@dataclass(frozen=True)
class RunConfig:
    array: ArraySettings = field(default_factory=ArraySettings)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    run: RunSettings = field(default_factory=RunSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)
    beampattern: BeamSettings = field(default_factory=BeamSettings)

    @property
    def wavelength(self) -> float:
        return self.scenario.wavelength

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, run=replace(self.run, seed=int(seed)))


def _check_keys(section: dict, allowed, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")


def _typed(value, kind, path: str):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise TypeError(kind)


def _simple_section(cls, raw: dict, path: str, kinds: dict):
    _check_keys(raw, kinds, path)
    return cls(**{k: _typed(v, kinds[k], f"{path}.{k}") for k, v in raw.items()})


def _float_list(value, path: str, length: int | None = None) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected a list")
    out = tuple(_typed(v, float, f"{path}[{i}]") for i, v in enumerate(value))
    if length is not None and len(out) != length:
        raise ConfigError(f"{path}: expected {length} values, got {len(out)}")
    return out


def _parse_array(raw: dict) -> ArraySettings:
    kinds = {f.name: (int if f.name in ("M", "N") else float) for f in fields(ArraySettings)}
    a = _simple_section(ArraySettings, raw, "array", kinds)
    if a.M < 1 or a.N < 1:
        raise ConfigError("array.M/array.N: must be positive")
    for name in ("x_max_lambda", "y_max_lambda", "grid_delta_lambda", "sparse_spacing_lambda",
                 "dense_spacing_lambda"):
        if getattr(a, name) is not None and not getattr(a, name) > 0:
            raise ConfigError(f"array.{name}: must be positive")
    if a.d_min_lambda < 0:
        raise ConfigError("array.d_min_lambda: must be non-negative")
    return a


def _parse_scenario(raw: dict) -> ScenarioConfig:
    kinds = {"n_users": int, "bs_height": float, "sector_deg": float, "fraction_in_buildings": float,
             "carrier_freq_hz": float, "noise_power_dbm": float, "rate": float,
             "path_loss_exponent": float, "ground_range": list, "buildings": list}
    _check_keys(raw, kinds, "scenario")
    kw = {}
    for key, value in raw.items():
        path = f"scenario.{key}"
        if key == "ground_range":
            kw["ground_range"] = _float_list(value, path, 2)
        elif key == "buildings":
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected an array of tables")
            blds = []
            for i, b in enumerate(value):
                bpath = f"{path}[{i}]"
                if not isinstance(b, dict):
                    raise ConfigError(f"{bpath}: expected a table")
                _check_keys(b, ("center_xz", "height", "side"), bpath)
                try:
                    blds.append(Building(_float_list(b["center_xz"], f"{bpath}.center_xz", 2),
                                         _typed(b["height"], float, f"{bpath}.height"),
                                         _typed(b["side"], float, f"{bpath}.side")))
                except KeyError as exc:
                    raise ConfigError(f"{bpath}: missing key {exc.args[0]}") from None
            kw["buildings"] = tuple(blds)
        elif key == "carrier_freq_hz":
            kw["carrier_freq"] = _typed(value, float, path)
        elif key == "noise_power_dbm":
            kw["noise_power"] = 10 ** ((_typed(value, float, path) - 30) / 10)
        else:
            kw[key] = _typed(value, kinds[key], path)
    try:
        return ScenarioConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"scenario: {exc}") from None


def _parse_run(raw: dict) -> RunSettings:
    kinds = {"seed": int, "s_opt": int, "s_eval": int, "tol": float, "max_sweeps": int,
             "schemes": list, "sweep": dict}
    _check_keys(raw, kinds, "run")
    kw = {}
    for key, value in raw.items():
        path = f"run.{key}"
        if key == "schemes":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}: expected a non-empty list of scheme names")
            for i, s in enumerate(value):
                if s not in SCHEMES:
                    raise ConfigError(f"{path}[{i}]: unknown scheme {s!r}; choose from {SCHEMES}")
            kw["schemes"] = tuple(value)
        elif key == "sweep":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a table")
            _check_keys(value, ("param", "values"), path)
            param = _typed(value.get("param"), str, f"{path}.param")
            if param not in SWEEP_PARAMS:
                raise ConfigError(f"{path}.param: must be one of {SWEEP_PARAMS}")
            values = _float_list(value.get("values"), f"{path}.values")
            if not values:
                raise ConfigError(f"{path}.values: empty")
            kw["sweep"] = SweepSettings(param, values)
        else:
            kw[key] = _typed(value, kinds[key], path)
    r = RunSettings(**kw)
    if r.s_opt < 1 or r.s_eval < 1:
        raise ConfigError("run.s_opt/run.s_eval: must be positive")
    if not r.tol > 0 or r.max_sweeps < 1:
        raise ConfigError("run.tol/run.max_sweeps: must be positive")
    if r.seed < 0:
        raise ConfigError("run.seed: must be non-negative")
    return r


def _parse_verify(raw: dict) -> VerifySettings:
    _check_keys(raw, ("users", "random_instances", "n_users"), "verify")
    kw = {}
    if "users" in raw:
        users = raw["users"]
        if not isinstance(users, list):
            raise ConfigError("verify.users: expected a list of [aoa_h, aoa_v] or [aoa_h, aoa_v, |b|]")
        parsed = []
        for i, u in enumerate(users):
            vals = _float_list(u, f"verify.users[{i}]")
            if len(vals) not in (2, 3):
                raise ConfigError(f"verify.users[{i}]: expected 2 or 3 numbers")
            if abs(vals[0]) > 1 or abs(vals[1]) > 1:
                raise ConfigError(f"verify.users[{i}]: virtual AoAs must lie in [-1, 1]")
            parsed.append(vals)
        kw["users"] = tuple(parsed)
    for key in ("random_instances", "n_users"):
        if key in raw:
            kw[key] = _typed(raw[key], int, f"verify.{key}")
            if kw[key] < 0:
                raise ConfigError(f"verify.{key}: must be non-negative")
    return VerifySettings(**kw)


def _parse_beam(raw: dict) -> BeamSettings:
    _check_keys(raw, ("theta_deg", "phi_deg"), "beampattern")
    kw = {}
    for key in ("theta_deg", "phi_deg"):
        if key in raw:
            lo, hi, num = _float_list(raw[key], f"beampattern.{key}", 3)
            if num < 1 or num != int(num) or hi < lo:
                raise ConfigError(f"beampattern.{key}: expected [start, stop, count]")
            kw[key] = (lo, hi, int(num))
    return BeamSettings(**kw)


def parse_config(raw: dict) -> RunConfig:
    _check_keys(raw, ("array", "scenario", "run", "verify", "beampattern"), "")
    for key, value in raw.items():
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a table")
    return RunConfig(
        array=_parse_array(raw.get("array", {})),
        scenario=_parse_scenario(raw.get("scenario", {})),
        run=_parse_run(raw.get("run", {})),
        verify=_parse_verify(raw.get("verify", {})),
        beampattern=_parse_beam(raw.get("beampattern", {})),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)
