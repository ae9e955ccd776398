"""Reference arrays: fixed UPAs, element-wise movable antennas, and beam patterns."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ApvPair
from .errors import InfeasibleError, InvalidInputError, SingularChannelError
from .optimizer import SPACING_TOL, CandidateGrid, TrajectoryPoint, candidate_channel_matrix
from .receiver import weighted_trace_inverse

logger = logging.getLogger(__name__)

DENSE_UPA = "dense_upa"
SPARSE_UPA = "sparse_upa"
ELEMENT_WISE_MA = "element_wise_ma"
CLMA_INSTANTANEOUS = "cl_ma_instantaneous"
CLMA_STATISTICAL = "cl_ma_statistical"
SCHEMES = (DENSE_UPA, SPARSE_UPA, ELEMENT_WISE_MA, CLMA_INSTANTANEOUS, CLMA_STATISTICAL)

#: Default spacing of the UPA baselines, in wavelengths.
UPA_SPACING = {DENSE_UPA: 0.5, SPARSE_UPA: 4.0}


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    spacing: float | None = None  # meters; UPA kinds only

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if self.spacing is not None and not self.spacing > 0:
            raise InvalidInputError("UPA spacing must be positive")


def baseline_upa(kind: str, M: int, N: int, wavelength: float,
                 spacing: float | None = None) -> ApvPair:
    """Uniform planar array anchored at the origin."""
    if kind not in UPA_SPACING:
        raise InvalidInputError(f"{kind!r} is not a UPA baseline")
    s = UPA_SPACING[kind] * wavelength if spacing is None else spacing
    if not s > 0:
        raise InvalidInputError("spacing must be positive")
    return ApvPair(np.arange(M) * s, np.arange(N) * s, wavelength)


@dataclass
class ElementWiseResult:
    positions: np.ndarray
    indices: tuple[int, ...]
    objective: float
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    sweeps: int = 0


def _gram_stack(cells: np.ndarray, idx) -> np.ndarray:
    sub = cells[:, list(idx)]
    return np.einsum("spk,spl->skl", sub.conj(), sub)


def _rank_one_removal(Z: np.ndarray, rows: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """``tr(inv(Z - g g^H) Omega)`` for each channel row, ``g = conj(row)``; rows is (S, P, K)."""
    h = rows.conj()
    Zinv = np.linalg.inv(Z)
    base = np.real(np.einsum("skk,k->s", Zinv, omega))
    q = np.einsum("skl,spl->spk", Zinv, h)
    denom = 1.0 - np.real(np.einsum("spk,spk->sp", h.conj(), q))
    num = np.einsum("spk,k->sp", np.abs(q) ** 2, omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = base[:, None] + num / denom
    out[~(denom > 1e-12)] = np.inf
    return out


def element_wise_optimize(users, grid: CandidateGrid, n_antennas: int, omega, d_min: float,
                          tol: float = 1e-9, max_sweeps: int = 50,
                          recompute_every: int = 64) -> ElementWiseResult:
    """Independent 2-D placement of ``n_antennas`` elements on the grid points.

    Same two phases as the cross-linked search, but each grid point is its own
    candidate: eliminate one point at a time from the full grid, then move
    each element to its best point at Euclidean distance >= ``d_min`` from
    every other element. ``users`` may be path sets or a candidate channel
    (stack) from :func:`clma.optimizer.candidate_channel_matrix`.
    """
    H = users if isinstance(users, np.ndarray) else candidate_channel_matrix(grid, users)
    H = np.asarray(H, dtype=complex)
    cells = H[None] if H.ndim == 2 else H
    omega = np.asarray(omega, dtype=float)
    points = grid.points()
    P = points.shape[0]
    if cells.shape[1] != P:
        raise InvalidInputError("candidate channel does not match the grid")
    if n_antennas < 1 or n_antennas > P:
        raise InfeasibleError(f"cannot place {n_antennas} elements on {P} grid points")
    trajectory: list[TrajectoryPoint] = []

    def record(phase, value, feasible):
        trajectory.append(TrajectoryPoint(phase, len(trajectory) + 1, float(value), feasible))

    def feasible(idx):
        pts = points[list(idx)]
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        return bool(d.min() >= d_min - SPACING_TOL) if len(idx) > 1 else True

    selected = list(range(P))
    Z = _gram_stack(cells, selected)
    for step in range(P - n_antennas):
        if step % recompute_every == 0:
            Z = _gram_stack(cells, selected)
        values = _rank_one_removal(Z, cells[:, selected], omega).mean(axis=0)
        j = int(np.argmin(values))
        if not np.isfinite(values[j]):
            raise SingularChannelError("every element removal leaves a singular Gram matrix")
        h = cells[:, selected[j]]
        Z = Z - np.einsum("sk,sl->skl", h.conj(), h)
        del selected[j]
        record("elimination", values[j], False)

    slots = list(selected)
    previous = np.inf
    value = np.inf
    ok = False
    for sweep in range(1, max_sweeps + 1):
        for i in range(len(slots)):
            others = slots[:i] + slots[i + 1:]
            base = _gram_stack(cells, others)
            grams = base[:, None] + np.einsum("spk,spl->spkl", cells.conj(), cells)
            values = weighted_trace_inverse(grams, omega).mean(axis=0)
            if others:
                gaps = np.linalg.norm(points[:, None] - points[others][None], axis=-1).min(axis=1)
                values[gaps < d_min - SPACING_TOL] = np.inf
                values[others] = np.inf
            j = int(np.argmin(values))
            if np.isfinite(values[j]):
                slots[i] = j
                record("refinement", values[j], feasible(slots))
        value = float(weighted_trace_inverse(_gram_stack(cells, slots), omega).mean())
        ok = feasible(slots)
        if ok and abs(previous - value) < tol:
            break
        previous = value if ok else np.inf
    if not ok:
        raise InfeasibleError("element-wise placement could not meet the minimum spacing")
    order = sorted(slots)
    return ElementWiseResult(points[order], tuple(order), value, trajectory, sweep)


def virtual_angles(theta, phi):
    """Virtual AoAs ``(cos(theta) cos(phi), sin(theta))`` from elevation/azimuth in radians."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.cos(theta) * np.cos(phi), np.sin(theta)


def beam_pattern(array, wavelength: float, aoa_h, aoa_v) -> np.ndarray:
    """Normalized array-factor magnitude at the given virtual AoAs.

    ``array`` is an :class:`ApvPair` or an (A, 2) array of element coordinates.
    ``aoa_h`` and ``aoa_v`` broadcast against each other; the result has their
    broadcast shape and peaks at 1 for ``(0, 0)``.
    """
    pts = array.positions() if isinstance(array, ApvPair) else np.asarray(array, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise InvalidInputError("need at least one 2-D element position")
    aoa_h, aoa_v = np.broadcast_arrays(np.asarray(aoa_h, dtype=float),
                                       np.asarray(aoa_v, dtype=float))
    if aoa_h.size == 0:
        raise InvalidInputError("empty angle grid")
    k = 2 * np.pi / wavelength
    phase = k * (np.multiply.outer(aoa_h, pts[:, 0]) + np.multiply.outer(aoa_v, pts[:, 1]))
    return np.abs(np.exp(1j * phase).sum(axis=-1)) / pts.shape[0]
