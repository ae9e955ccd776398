"""Closed-form optimal APVs for single-path users.

When every user has one path and ``K(K-1)/2 <= I_M + I_N`` (I_M, I_N being
the number of prime factors of M and N, with multiplicity), user pairs can be
split between the two axes and each axis APV built so that the steering
vectors of its assigned pairs are orthogonal. The resulting channels are
mutually orthogonal and the per-user power lower bound is met with equality.

User indices are 0-based throughout this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .channel import ApvPair, UserPathSet
from .errors import DegenerateAnglesError, InfeasibleError, InvalidInputError

#: Virtual-AoA differences below this are treated as a collision.
AOA_COLLISION_TOL = 1e-12


def prime_factorization(n: int) -> list[int]:
    """Prime factors of ``n`` in non-decreasing order (``[]`` for 1)."""
    if int(n) != n or n < 1:
        raise InvalidInputError(f"need a positive integer, got {n}")
    n = int(n)
    factors = []
    p = 2
    while p * p <= n:
        while n % p == 0:
            factors.append(p)
            n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors


@dataclass(frozen=True)
class FactorizationPlan:
    """Mixed-radix digit expansion of the indices 1..n.

    ``coeff_matrix[:, j]`` holds the digits of index ``j + 1``, so that
    ``coeff_matrix[:, j] @ cumprods + 1 == j + 1``.
    """

    n: int
    factors: tuple[int, ...]
    cumprods: np.ndarray
    coeff_matrix: np.ndarray

    @property
    def count(self) -> int:
        return len(self.factors)

    def coefficients(self, index: int) -> np.ndarray:
        """Digit vector of 1-based ``index``."""
        return self.coeff_matrix[:, index - 1]


def factorization_plan(n: int) -> FactorizationPlan:
    factors = prime_factorization(n)
    cumprods = np.ones(len(factors), dtype=np.int64)
    for i in range(1, len(factors)):
        cumprods[i] = cumprods[i - 1] * factors[i - 1]
    U = np.zeros((len(factors), n), dtype=np.int64)
    for j in range(n):
        rem = j
        # divide the remainder by the place values from back to front
        for i in range(len(factors) - 1, -1, -1):
            U[i, j], rem = divmod(rem, int(cumprods[i]))
    return FactorizationPlan(n, tuple(factors), cumprods, U)


def tightness_check(K: int, M: int, N: int) -> bool:
    """True when the per-user power bound is attainable for single-path users."""
    if K < 1 or M < 1 or N < 1:
        raise InvalidInputError("K, M and N must be positive")
    return K * (K - 1) // 2 <= len(prime_factorization(M)) + len(prime_factorization(N))


@dataclass(frozen=True)
class PairPartition:
    horizontal: tuple[tuple[int, int], ...]
    vertical: tuple[tuple[int, int], ...]


def partition_pairs(K: int, count_x: int, count_y: int, aoa_h=None, aoa_v=None) -> PairPartition:
    """Split all user pairs between the horizontal and vertical axis.

    Pairs are taken in lexicographic order and the horizontal set is filled
    first. If AoAs are given, a pair whose horizontal (vertical) AoAs coincide
    can only be separated vertically (horizontally); those forced pairs are
    placed first and the free ones fill the remaining capacity in order.
    """
    pairs = list(combinations(range(K), 2))
    if len(pairs) > count_x + count_y:
        raise InfeasibleError(
            f"{len(pairs)} user pairs exceed the {count_x}+{count_y} available prime factors")
    can_x = [True] * len(pairs)
    can_y = [True] * len(pairs)
    if aoa_h is not None:
        can_x = [abs(aoa_h[k] - aoa_h[q]) > AOA_COLLISION_TOL for k, q in pairs]
    if aoa_v is not None:
        can_y = [abs(aoa_v[k] - aoa_v[q]) > AOA_COLLISION_TOL for k, q in pairs]
    for (k, q), cx, cy in zip(pairs, can_x, can_y):
        if not (cx or cy):
            raise DegenerateAnglesError(f"users {k} and {q} share both virtual AoAs")
    only_y = sum(1 for cx in can_x if not cx)
    only_x = sum(1 for cy in can_y if not cy)
    if only_x > count_x or only_y > count_y:
        raise InfeasibleError(
            f"AoA collisions force {only_x} pairs onto {count_x} horizontal and "
            f"{only_y} pairs onto {count_y} vertical factors")
    free_x = count_x - only_x
    horizontal, vertical = [], []
    for pair, cx, cy in zip(pairs, can_x, can_y):
        if cx and cy:
            if free_x > 0:
                horizontal.append(pair)
                free_x -= 1
            else:
                vertical.append(pair)
        elif cx:
            horizontal.append(pair)
        else:
            vertical.append(pair)
    return PairPartition(tuple(horizontal), tuple(vertical))


def _axis_steps(plan: FactorizationPlan, pairs, aoas, d_min: float, wavelength: float):
    """Step sizes for one axis and the integer offsets chosen for assigned pairs."""
    steps = np.zeros(plan.count)
    offsets = []
    for i, m_i in enumerate(plan.factors):
        fill = float(np.dot(np.asarray(plan.factors[:i]) - 1, steps[:i])) + d_min
        if i < len(pairs):
            k, q = pairs[i]
            diff = abs(aoas[k] - aoas[q])
            rho = 0
            while True:
                d = (rho + 1.0 / m_i) * wavelength / diff
                if d >= fill * (1 - 1e-12):
                    break
                rho += 1
            steps[i] = d
            offsets.append(rho)
        else:
            steps[i] = fill
    return steps, offsets


@dataclass(frozen=True)
class ClosedFormSolution:
    apv: ApvPair
    partition: PairPartition
    steps_x: np.ndarray
    steps_y: np.ndarray
    offsets_x: tuple[int, ...]
    offsets_y: tuple[int, ...]
    plan_x: FactorizationPlan
    plan_y: FactorizationPlan

    @property
    def region(self) -> tuple[float, float]:
        """Extent of the moving region the construction needs, (width, height)."""
        return float(self.apv.x[-1] - self.apv.x[0]), float(self.apv.y[-1] - self.apv.y[0])


def construct_optimal_apvs(users: Sequence[UserPathSet], M: int, N: int, d_min_x: float,
                           d_min_y: float, wavelength: float) -> ClosedFormSolution:
    """Build APVs whose single-path channels are mutually orthogonal.

    The moving-region bounds are not enforced; check ``solution.region``.
    """
    if any(u.n_paths != 1 for u in users):
        raise InvalidInputError("the closed-form construction needs single-path users")
    if not d_min_x > 0 or not d_min_y > 0:
        raise InvalidInputError("minimum spacings must be positive")
    K = len(users)
    if K < 1:
        raise InvalidInputError("need at least one user")
    if not tightness_check(K, M, N):
        raise InfeasibleError(
            f"K={K} users need {K * (K - 1) // 2} pairs but M={M}, N={N} "
            f"offer only {len(prime_factorization(M)) + len(prime_factorization(N))} prime factors")
    aoa_h = np.array([u.aoa_h[0] for u in users])
    aoa_v = np.array([u.aoa_v[0] for u in users])
    plan_x = factorization_plan(M)
    plan_y = factorization_plan(N)
    partition = partition_pairs(K, plan_x.count, plan_y.count, aoa_h, aoa_v)
    steps_x, rho = _axis_steps(plan_x, partition.horizontal, aoa_h, d_min_x, wavelength)
    steps_y, tau = _axis_steps(plan_y, partition.vertical, aoa_v, d_min_y, wavelength)
    x = plan_x.coeff_matrix.T @ steps_x if plan_x.count else np.zeros(1)
    y = plan_y.coeff_matrix.T @ steps_y if plan_y.count else np.zeros(1)
    return ClosedFormSolution(ApvPair(x, y, wavelength), partition, steps_x, steps_y,
                              tuple(rho), tuple(tau), plan_x, plan_y)


def verify_cvo(H) -> float:
    """Largest normalized cross-correlation ``|h_k^H h_q| / (|h_k| |h_q|)`` over user pairs."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[1] < 2:
        raise InvalidInputError("need a channel matrix with at least two users")
    norms = np.linalg.norm(H, axis=0)
    if np.any(norms == 0):
        raise InvalidInputError("zero channel column")
    C = np.abs(H.conj().T @ H) / np.outer(norms, norms)
    iu = np.triu_indices(H.shape[1], 1)
    return float(C[iu].max())
