"""Discrete position optimization on a candidate grid.

The moving region is discretized into ``n_x`` column positions and ``n_y`` row
positions. A selection picks M of the column positions and N of the row
positions; the objective is the minimum total ZF transmit power
``tr(inv(H^H H) Omega)`` of the selected sub-array.

The search starts from the full grid, greedily eliminates one column or row
position at a time (the one whose removal costs least), then refines each
selected position in turn under the minimum-spacing constraint until the
objective settles.

Every routine here also accepts a stack of S candidate channel matrices,
shape (S, n_x * n_y, K), in which case the objective is the average over the
stack. That is how the statistical design reuses the same search.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from .channel import ApvPair, UserPathSet, channel_matrix
from .errors import InfeasibleError, InvalidInputError, SingularChannelError
from .receiver import total_power_zf, weighted_trace_inverse

logger = logging.getLogger(__name__)

SPACING_TOL = 1e-12
#: Relative margin a refinement candidate needs to displace the incumbent.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class CandidateGrid:
    """Cell-centered candidate coordinates over ``[0, x_max] x [0, y_max]``."""

    x: np.ndarray
    y: np.ndarray
    x_max: float
    y_max: float
    wavelength: float

    @property
    def n_x(self) -> int:
        return self.x.size

    @property
    def n_y(self) -> int:
        return self.y.size

    @property
    def resolution(self) -> tuple[float, float]:
        return self.x_max / self.n_x, self.y_max / self.n_y

    def apv(self, selection: "SelectionPair") -> ApvPair:
        return ApvPair(self.x[list(selection.x_idx)], self.y[list(selection.y_idx)],
                       self.wavelength)

    def points(self) -> np.ndarray:
        """All candidate 2-D points, shape (n_x * n_y, 2), in flat-index order."""
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


def make_candidate_grid(x_max: float, y_max: float, n_x: int, n_y: int, wavelength: float,
                        M: int | None = None, N: int | None = None) -> CandidateGrid:
    if not (x_max > 0 and y_max > 0 and wavelength > 0):
        raise InvalidInputError("region sizes and wavelength must be positive")
    if n_x < 1 or n_y < 1:
        raise InvalidInputError("grid needs at least one point per axis")
    if (M is not None and n_x < M) or (N is not None and n_y < N):
        raise InfeasibleError(f"grid {n_x}x{n_y} has fewer points than the {M}x{N} array")
    x = (np.arange(1, n_x + 1) - 0.5) * x_max / n_x
    y = (np.arange(1, n_y + 1) - 0.5) * y_max / n_y
    return CandidateGrid(x, y, float(x_max), float(y_max), float(wavelength))


def grid_from_resolution(x_max: float, y_max: float, delta: float, wavelength: float,
                         M: int | None = None, N: int | None = None) -> CandidateGrid:
    """Grid with spacing ``delta``; e.g. a 20-wavelength region at a quarter wavelength gives 80 points."""
    n_x = int(round(x_max / delta))
    n_y = int(round(y_max / delta))
    return make_candidate_grid(x_max, y_max, n_x, n_y, wavelength, M, N)


@dataclass(frozen=True)
class SelectionPair:
    """Selected candidate indices (0-based, strictly increasing) per axis."""

    x_idx: tuple[int, ...]
    y_idx: tuple[int, ...]

    def __post_init__(self):
        xi = tuple(int(i) for i in self.x_idx)
        yi = tuple(int(i) for i in self.y_idx)
        if not xi or not yi:
            raise InvalidInputError("selection must pick at least one position per axis")
        if any(b <= a for a, b in zip(xi, xi[1:])) or any(b <= a for a, b in zip(yi, yi[1:])):
            raise InvalidInputError("selected indices must be strictly increasing")
        if min(xi) < 0 or min(yi) < 0:
            raise InvalidInputError("selected indices must be non-negative")
        object.__setattr__(self, "x_idx", xi)
        object.__setattr__(self, "y_idx", yi)

    @classmethod
    def full(cls, n_x: int, n_y: int) -> "SelectionPair":
        return cls(tuple(range(n_x)), tuple(range(n_y)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.x_idx), len(self.y_idx)

    def flat_rows(self, n_y: int) -> np.ndarray:
        """Rows of the candidate channel picked by ``kron(B_x, B_y)``."""
        return (np.asarray(self.x_idx)[:, None] * n_y + np.asarray(self.y_idx)[None, :]).ravel()

    def matrices(self, n_x: int, n_y: int) -> tuple[np.ndarray, np.ndarray]:
        """Binary selection matrices ``B_x`` (M x n_x) and ``B_y`` (N x n_y)."""
        Bx = np.zeros((len(self.x_idx), n_x), dtype=np.int8)
        By = np.zeros((len(self.y_idx), n_y), dtype=np.int8)
        Bx[np.arange(len(self.x_idx)), self.x_idx] = 1
        By[np.arange(len(self.y_idx)), self.y_idx] = 1
        return Bx, By

    def is_feasible(self, grid: CandidateGrid, d_min_x: float, d_min_y: float) -> bool:
        dx = np.diff(grid.x[list(self.x_idx)])
        dy = np.diff(grid.y[list(self.y_idx)])
        return bool(np.all(dx >= d_min_x - SPACING_TOL) and np.all(dy >= d_min_y - SPACING_TOL))


@dataclass(frozen=True)
class OptimizerConfig:
    d_min_x: float
    d_min_y: float
    tol: float = 1e-9
    max_sweeps: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError("refinement threshold must be positive")
        if self.max_sweeps < 1:
            raise InvalidInputError("need at least one refinement sweep")
        if self.d_min_x < 0 or self.d_min_y < 0:
            raise InvalidInputError("minimum spacings must be non-negative")


@dataclass(frozen=True)
class TrajectoryPoint:
    phase: str
    iteration: int
    objective: float
    feasible: bool


@dataclass
class OptimizationResult:
    apv: ApvPair
    selection: SelectionPair
    objective: float
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    evaluations: int = 0
    sweeps: int = 0

    @property
    def iterations(self) -> int:
        return len(self.trajectory)


def candidate_channel_matrix(grid: CandidateGrid, users: Sequence[UserPathSet]) -> np.ndarray:
    """Channel of every user at every grid point, shape (n_x * n_y, K)."""
    return channel_matrix(ApvPair(grid.x, grid.y, grid.wavelength), users)


def selected_channel(sel: SelectionPair, Hbar: np.ndarray, n_y: int) -> np.ndarray:
    Hbar = np.asarray(Hbar)
    n_rows = Hbar.shape[-2]
    if n_rows % n_y:
        raise InvalidInputError("candidate channel rows are not a multiple of n_y")
    if max(sel.x_idx) >= n_rows // n_y or max(sel.y_idx) >= n_y:
        raise InvalidInputError("selection index outside the candidate grid")
    return Hbar[..., sel.flat_rows(n_y), :]


def objective(sel: SelectionPair, Hbar: np.ndarray, omega, n_y: int) -> float:
    """Total minimum ZF power of the selected sub-array (averaged over a stack)."""
    H = selected_channel(sel, Hbar, n_y)
    if H.ndim == 2:
        return total_power_zf(H, omega)
    return float(np.mean([total_power_zf(h, omega) for h in H]))


def incremental_objective(gram: np.ndarray, delta_rows: np.ndarray, sign: str, omega) -> float:
    """Objective after adding or removing a block of channel rows from a Gram matrix.

    ``delta_rows`` holds the rows (one per antenna, K columns) that a single
    column or row position contributes; the updated Gram matrix is
    ``gram +/- delta_rows^H delta_rows``.
    """
    if sign not in ("add", "remove"):
        raise InvalidInputError(f"sign must be 'add' or 'remove', got {sign!r}")
    delta_rows = np.atleast_2d(np.asarray(delta_rows, dtype=complex))
    update = delta_rows.conj().T @ delta_rows
    new = gram + update if sign == "add" else gram - update
    value = float(weighted_trace_inverse(new, omega))
    if not np.isfinite(value):
        raise SingularChannelError("Gram matrix is not positive definite after the update")
    return value


class _Search:
    """State shared by the elimination and refinement phases."""

    def __init__(self, Hbar: np.ndarray, grid: CandidateGrid, omega):
        Hbar = np.asarray(Hbar, dtype=complex)
        if Hbar.ndim == 2:
            Hbar = Hbar[None]
        S, rows, K = Hbar.shape
        if rows != grid.n_x * grid.n_y:
            raise InvalidInputError(
                f"candidate channel has {rows} rows, grid has {grid.n_x * grid.n_y} points")
        self.grid = grid
        self.cells = Hbar.reshape(S, grid.n_x, grid.n_y, K)
        self.omega = np.asarray(omega, dtype=float)
        if self.omega.shape != (K,):
            raise InvalidInputError("omega length must equal the number of users")
        self.evaluations = 0
        self.trajectory: list[TrajectoryPoint] = []

    def x_blocks(self, x_idx, y_idx) -> np.ndarray:
        # Gram contribution of each column position given the selected rows: (S, len(x_idx), K, K)
        sub = self.cells[:, x_idx][:, :, y_idx]
        return np.einsum("sayk,sayl->sakl", sub.conj(), sub, optimize=True)

    def y_blocks(self, x_idx, y_idx) -> np.ndarray:
        sub = self.cells[:, x_idx][:, :, y_idx]
        return np.einsum("saxk,saxl->sxkl", sub.conj(), sub, optimize=True)

    def evaluate(self, grams: np.ndarray) -> np.ndarray:
        """Stack-averaged objective per candidate; grams has shape (S, J, K, K)."""
        self.evaluations += grams.shape[1]
        return weighted_trace_inverse(grams, self.omega).mean(axis=0)

    def value(self, x_idx, y_idx) -> float:
        blocks = self.x_blocks(list(x_idx), list(y_idx))
        return float(weighted_trace_inverse(blocks.sum(axis=1), self.omega).mean())

    def record(self, phase: str, value: float, feasible: bool) -> None:
        self.trajectory.append(TrajectoryPoint(phase, len(self.trajectory) + 1, value, feasible))


def _check_sizes(grid: CandidateGrid, M: int, N: int) -> None:
    if M < 1 or N < 1:
        raise InvalidInputError("array dimensions must be positive")
    if grid.n_x < M or grid.n_y < N:
        raise InfeasibleError(f"grid {grid.n_x}x{grid.n_y} is smaller than the {M}x{N} array")


def _eliminate(search: _Search, M: int, N: int) -> SelectionPair:
    grid = search.grid
    _check_sizes(grid, M, N)
    X = list(range(grid.n_x))
    Y = list(range(grid.n_y))
    for i in range(max(grid.n_x - M, grid.n_y - N)):
        for axis in ("x", "y"):
            if axis == "x" and i >= grid.n_x - M or axis == "y" and i >= grid.n_y - N:
                continue
            blocks = search.x_blocks(X, Y) if axis == "x" else search.y_blocks(X, Y)
            total = blocks.sum(axis=1, keepdims=True)
            values = search.evaluate(total - blocks)
            # argmin returns the first minimizer, i.e. a strict "<" scan
            j = int(np.argmin(values))
            if not np.isfinite(values[j]):
                raise SingularChannelError(
                    f"every {axis}-elimination at step {i + 1} leaves a singular Gram matrix")
            del (X if axis == "x" else Y)[j]
            search.record("elimination", float(values[j]), False)
    return SelectionPair(tuple(X), tuple(Y))


def _spacing_mask(coords: np.ndarray, others: np.ndarray, d_min: float) -> np.ndarray:
    if others.size == 0:
        return np.ones(coords.size, dtype=bool)
    gaps = np.abs(coords[:, None] - coords[others][None, :]).min(axis=1)
    mask = gaps >= d_min - SPACING_TOL
    mask[others] = False
    return mask


def _refine(search: _Search, sel: SelectionPair, cfg: OptimizerConfig) -> tuple[SelectionPair, int]:
    grid = search.grid
    X = list(sel.x_idx)
    Y = list(sel.y_idx)
    M, N = len(X), len(Y)
    all_x = list(range(grid.n_x))
    all_y = list(range(grid.n_y))
    previous = np.inf
    for sweep in range(1, cfg.max_sweeps + 1):
        for i in range(max(M, N)):
            for axis in ("x", "y"):
                if axis == "x" and i >= M or axis == "y" and i >= N:
                    continue
                slots = X if axis == "x" else Y
                others = np.array(slots[:i] + slots[i + 1:], dtype=int)
                if axis == "x":
                    blocks = search.x_blocks(all_x, Y)
                    mask = _spacing_mask(grid.x, others, cfg.d_min_x)
                else:
                    blocks = search.y_blocks(X, all_y)
                    mask = _spacing_mask(grid.y, others, cfg.d_min_y)
                base = blocks[:, others].sum(axis=1, keepdims=True)
                values = search.evaluate(base + blocks)
                values[~mask] = np.inf
                j = int(np.argmin(values))
                cur = slots[i]
                # keep an admissible incumbent unless beaten beyond rounding noise
                if mask[cur] and values[j] >= values[cur] * (1 - TIE_RTOL):
                    j = cur
                if np.isfinite(values[j]):
                    slots[i] = j
                    current = SelectionPair(tuple(sorted(X)), tuple(sorted(Y)))
                    search.record("refinement", float(values[j]),
                                  current.is_feasible(grid, cfg.d_min_x, cfg.d_min_y))
        current = SelectionPair(tuple(sorted(X)), tuple(sorted(Y)))
        value = search.value(current.x_idx, current.y_idx)
        feasible = current.is_feasible(grid, cfg.d_min_x, cfg.d_min_y)
        logger.debug("refinement sweep %d: objective %.6e feasible=%s", sweep, value, feasible)
        if feasible and abs(previous - value) < cfg.tol:
            return current, sweep
        previous = value if feasible else np.inf
    if not feasible:
        raise InfeasibleError(
            f"no spacing-feasible selection after {cfg.max_sweeps} sweeps; "
            "the grid is too coarse or the region too small for the minimum spacing")
    return current, cfg.max_sweeps


def sequential_elimination(Hbar: np.ndarray, grid: CandidateGrid, M: int, N: int,
                           omega) -> SelectionPair:
    """Greedy removal of column/row positions from the full grid down to M x N."""
    return _eliminate(_Search(Hbar, grid, omega), M, N)


def successive_refinement(sel: SelectionPair, Hbar: np.ndarray, grid: CandidateGrid, omega,
                          cfg: OptimizerConfig) -> SelectionPair:
    """Per-position local search under the minimum-spacing constraint."""
    return _refine(_Search(Hbar, grid, omega), sel, cfg)[0]


def optimize_selection(Hbar: np.ndarray, grid: CandidateGrid, M: int, N: int, omega,
                       cfg: OptimizerConfig) -> OptimizationResult:
    """Elimination followed by refinement on a (stack of) candidate channel(s)."""
    search = _Search(Hbar, grid, omega)
    sel = _eliminate(search, M, N)
    sel, sweeps = _refine(search, sel, cfg)
    value = search.value(sel.x_idx, sel.y_idx)
    return OptimizationResult(grid.apv(sel), sel, value, search.trajectory,
                              search.evaluations, sweeps)


def optimize_positions(users: Sequence[UserPathSet], grid: CandidateGrid, M: int, N: int,
                       omega, cfg: OptimizerConfig) -> OptimizationResult:
    """Optimize the APVs for one instantaneous channel."""
    return optimize_selection(candidate_channel_matrix(grid, users), grid, M, N, omega, cfg)


def complexity_model(grid: CandidateGrid, M: int, N: int, sweeps: int) -> int:
    """Objective-evaluation count predicted by ``n_x^2 + n_y^2 + T (n_x M + n_y N)``."""
    return grid.n_x ** 2 + grid.n_y ** 2 + sweeps * (grid.n_x * M + grid.n_y * N)


def _feasible_subsets(coords: np.ndarray, size: int, d_min: float) -> np.ndarray:
    out = [c for c in combinations(range(coords.size), size)
           if np.all(np.diff(coords[list(c)]) >= d_min - SPACING_TOL)]
    return np.array(out, dtype=int).reshape(len(out), size)


def exhaustive_search(users, grid: CandidateGrid, M: int, N: int, omega,
                      cfg: OptimizerConfig, max_combinations: int = 10 ** 6
                      ) -> tuple[SelectionPair, float]:
    """Global optimum by enumerating every spacing-feasible selection.

    ``users`` is either a list of path sets or a precomputed candidate
    channel (or stack of them).
    """
    _check_sizes(grid, M, N)
    Hbar = users if isinstance(users, np.ndarray) else candidate_channel_matrix(grid, users)
    total = comb(grid.n_x, M) * comb(grid.n_y, N)
    if total > max_combinations:
        raise InvalidInputError(f"{total} selections exceed the limit of {max_combinations}")
    search = _Search(Hbar, grid, omega)
    xs = _feasible_subsets(grid.x, M, cfg.d_min_x)
    ys = _feasible_subsets(grid.y, N, cfg.d_min_y)
    if len(xs) == 0 or len(ys) == 0:
        raise InfeasibleError("no spacing-feasible selection exists on this grid")
    cells = search.cells
    outer = np.einsum("sabk,sabl->sabkl", cells.conj(), cells)
    best, best_sel = np.inf, None
    for xsel in xs:
        per_row = outer[:, xsel].sum(axis=1)
        grams = per_row[:, ys].sum(axis=2)
        values = search.evaluate(grams)
        j = int(np.argmin(values))
        if values[j] < best:
            best, best_sel = float(values[j]), (tuple(xsel), tuple(ys[j]))
    if best_sel is None:
        raise SingularChannelError("every feasible selection has a singular Gram matrix")
    return SelectionPair(*best_sel), best
