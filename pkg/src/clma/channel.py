"""Field-response channel model for a cross-linked movable antenna array.

Antenna (column m, row n) of an M x N array maps to flat index ``m * N + n``
(0-based, horizontal index outer). This matches ``kron(a_hor, a_ver)`` and the
row ordering of ``kron(B_x, B_y)`` used by the discrete optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class UserPathSet:
    """Multipath description of one user as seen from the array reference point.

    Parameters
    ----------
    aoa_h : array_like, shape (L,)
        Horizontal virtual AoAs, ``cos(elevation) * cos(azimuth)``.
    aoa_v : array_like, shape (L,)
        Vertical virtual AoAs, ``sin(elevation)``.
    coeffs : array_like, shape (L,)
        Complex path coefficients (path loss included).
    """

    aoa_h: np.ndarray
    aoa_v: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.aoa_h, dtype=float))
        v = np.atleast_1d(np.asarray(self.aoa_v, dtype=float))
        b = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if h.ndim != 1 or not (h.shape == v.shape == b.shape):
            raise InvalidInputError(
                f"path arrays must be 1-D with equal length, got {h.shape}, {v.shape}, {b.shape}")
        if h.size == 0:
            raise InvalidInputError("a user needs at least one path")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(v)) and np.all(np.isfinite(b))):
            raise InvalidInputError("path parameters must be finite")
        if np.any(np.abs(h) > 1) or np.any(np.abs(v) > 1):
            raise InvalidInputError("virtual AoAs must lie in [-1, 1]")
        object.__setattr__(self, "aoa_h", _readonly(h))
        object.__setattr__(self, "aoa_v", _readonly(v))
        object.__setattr__(self, "coeffs", _readonly(b))

    @classmethod
    def single(cls, aoa_h: float, aoa_v: float, coeff: complex = 1.0) -> "UserPathSet":
        return cls([aoa_h], [aoa_v], [coeff])

    @property
    def n_paths(self) -> int:
        return self.aoa_h.size

    def aoas(self, axis: str) -> np.ndarray:
        if axis == HORIZONTAL:
            return self.aoa_h
        if axis == VERTICAL:
            return self.aoa_v
        raise InvalidInputError(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class ApvPair:
    """Horizontal (x) and vertical (y) antenna position vectors, in meters."""

    x: np.ndarray
    y: np.ndarray
    wavelength: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or y.ndim != 1 or x.size == 0 or y.size == 0:
            raise InvalidInputError("APVs must be non-empty 1-D vectors")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("APVs must be finite")
        if not np.isfinite(self.wavelength) or self.wavelength <= 0:
            raise InvalidInputError(f"wavelength must be positive, got {self.wavelength}")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise InvalidInputError("APVs must be strictly increasing")
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.size, self.y.size

    @property
    def n_antennas(self) -> int:
        return self.x.size * self.y.size

    def satisfies_spacing(self, d_min_x: float, d_min_y: float, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.x) >= d_min_x - tol)
                    and np.all(np.diff(self.y) >= d_min_y - tol))

    def positions(self) -> np.ndarray:
        """All MN antenna coordinates, shape (MN, 2), in flat-index order."""
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


def flat_index(m, n, n_rows: int):
    """Flat antenna index of column ``m`` and row ``n`` (0-based)."""
    return np.asarray(m) * n_rows + np.asarray(n)


def _check_wavelength(wavelength: float) -> None:
    if not np.isfinite(wavelength) or wavelength <= 0:
        raise InvalidInputError(f"wavelength must be positive and finite, got {wavelength}")


def field_response_vector(pos: float, aoas, wavelength: float) -> np.ndarray:
    """Per-path phase response ``exp(+j 2 pi / wavelength * pos * aoa)`` at one position."""
    _check_wavelength(wavelength)
    if not np.isfinite(pos):
        raise InvalidInputError(f"position must be finite, got {pos}")
    aoas = np.atleast_1d(np.asarray(aoas, dtype=float))
    if np.any(np.abs(aoas) > 1):
        raise InvalidInputError("virtual AoAs must lie in [-1, 1]")
    return np.exp(1j * ((2 * np.pi / wavelength) * (pos * aoas)))


def field_response_matrix(positions, paths: UserPathSet, wavelength: float,
                          axis: str = HORIZONTAL) -> np.ndarray:
    """Stack field-response vectors for ``positions`` column-wise, shape (L, len(positions))."""
    _check_wavelength(wavelength)
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    if positions.size == 0:
        raise InvalidInputError("need at least one position")
    if not np.all(np.isfinite(positions)):
        raise InvalidInputError("positions must be finite")
    aoas = paths.aoas(axis)
    return np.exp(1j * ((2 * np.pi / wavelength) * np.outer(aoas, positions)))


def _khatri_rao_apply(f_hor: np.ndarray, f_ver: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (F_hor^H kr F_ver^H) b, row (m, n) -> m * N + n
    a_hor = f_hor.conj().T
    a_ver = f_ver.conj().T
    if a_hor.shape[1] != b.size or a_ver.shape[1] != b.size:
        raise InvalidInputError("field-response matrices and path coefficients disagree on L")
    kr = (a_hor[:, None, :] * a_ver[None, :, :]).reshape(-1, b.size)
    return kr @ b


def channel_vector(apv: ApvPair, paths: UserPathSet) -> np.ndarray:
    """Channel of one user at every antenna of the array, length MN."""
    f_hor = field_response_matrix(apv.x, paths, apv.wavelength, HORIZONTAL)
    f_ver = field_response_matrix(apv.y, paths, apv.wavelength, VERTICAL)
    return _khatri_rao_apply(f_hor, f_ver, paths.coeffs)


def steering_vector(positions, aoa: float, wavelength: float) -> np.ndarray:
    """Single-path array response ``exp(-j 2 pi / wavelength * pos * aoa)``."""
    _check_wavelength(wavelength)
    if abs(aoa) > 1:
        raise InvalidInputError("virtual AoA must lie in [-1, 1]")
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    return np.exp(-1j * ((2 * np.pi / wavelength) * positions * aoa))


def single_path_channel(apv: ApvPair, aoa_h: float, aoa_v: float, coeff: complex) -> np.ndarray:
    """Closed-form channel ``b * kron(a_hor(x), a_ver(y))`` of a single-path user."""
    a_hor = steering_vector(apv.x, aoa_h, apv.wavelength)
    a_ver = steering_vector(apv.y, aoa_v, apv.wavelength)
    return (a_hor[:, None] * a_ver[None, :]).reshape(-1) * complex(coeff)


def channel_matrix(apv: ApvPair, users: Sequence[UserPathSet]) -> np.ndarray:
    """Channel matrix H, shape (MN, K), column k belonging to ``users[k]``."""
    if len(users) == 0:
        raise InvalidInputError("need at least one user")
    return np.column_stack([channel_vector(apv, u) for u in users])
