"""SINR, receive combining and minimum-power evaluation for the uplink.

All power quantities are in watts. Rates are in bits/s/Hz, and the per-user
SINR target for rate ``r`` is ``2**r - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, SingularChannelError

#: Gram matrices with a larger 2-norm condition number are treated as singular.
MAX_GRAM_CONDITION = 1e12


def sinr_targets(rates) -> np.ndarray:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if np.any(rates < 0):
        raise InvalidInputError("rates must be non-negative")
    return np.exp2(rates) - 1.0


def rate_weights(noise_power: float, rates) -> np.ndarray:
    """Diagonal of the rate-weight matrix, ``noise_power * (2**r_k - 1)``."""
    if not noise_power > 0:
        raise InvalidInputError(f"noise power must be positive, got {noise_power}")
    return noise_power * sinr_targets(rates)


@dataclass(frozen=True)
class RateWeights:
    noise_power: float
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rates", np.atleast_1d(np.asarray(self.rates, dtype=float)))
        rate_weights(self.noise_power, self.rates)

    @property
    def omega(self) -> np.ndarray:
        return rate_weights(self.noise_power, self.rates)


@dataclass(frozen=True)
class PowerReport:
    per_user_power: np.ndarray
    total_power: float
    combiner: np.ndarray


def _as_channel(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[1] == 0:
        raise InvalidInputError(f"channel matrix must be 2-D with K >= 1 columns, got {H.shape}")
    return H


def gram(H) -> np.ndarray:
    H = _as_channel(H)
    return H.conj().T @ H


def _gram_cholesky(G: np.ndarray):
    G = 0.5 * (G + G.conj().T)
    eig = np.linalg.eigvalsh(G)
    if eig[0] <= 0 or eig[-1] > MAX_GRAM_CONDITION * eig[0]:
        cond = np.inf if eig[0] <= 0 else eig[-1] / eig[0]
        raise SingularChannelError(f"Gram matrix is singular or ill-conditioned (cond={cond:.3e})")
    try:
        return scipy.linalg.cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError(str(exc)) from exc


def gram_inverse(H) -> np.ndarray:
    """``inv(H^H H)`` via a Cholesky factorization of the K x K Gram matrix."""
    G = gram(H)
    factor = _gram_cholesky(G)
    return scipy.linalg.cho_solve(factor, np.eye(G.shape[0], dtype=complex))


def zf_combiner(H) -> np.ndarray:
    """Zero-forcing combiner ``W = H inv(H^H H)``, so that ``W^H H = I``.

    Computed as ``Q inv(R)^H`` from a thin QR of ``H``; this avoids forming
    the Gram matrix, whose condition number is the square of ``H``'s.
    """
    H = _as_channel(H)
    Q, R = np.linalg.qr(H)
    s = np.linalg.svd(R, compute_uv=False)
    if s[-1] <= 0 or (s[0] / s[-1]) ** 2 > MAX_GRAM_CONDITION:
        cond = np.inf if s[-1] <= 0 else (s[0] / s[-1]) ** 2
        raise SingularChannelError(f"Gram matrix is singular or ill-conditioned (cond={cond:.3e})")
    return scipy.linalg.solve_triangular(R, Q.conj().T).conj().T


def mrc_combiner(H) -> np.ndarray:
    """Maximal-ratio combiner, ``W = H``."""
    return _as_channel(H).copy()


def sinr(W, H, p, noise_power: float, k: int) -> float:
    """SINR of user ``k`` under combiner ``W`` and transmit powers ``p``."""
    H = _as_channel(H)
    W = np.asarray(W, dtype=complex)
    p = np.asarray(p, dtype=float)
    if W.shape != H.shape or p.shape != (H.shape[1],):
        raise InvalidInputError("combiner, channel and power dimensions disagree")
    if np.any(p < 0):
        raise InvalidInputError("powers must be non-negative")
    if not noise_power > 0:
        raise InvalidInputError("noise power must be positive")
    w = W[:, k]
    w_norm2 = np.vdot(w, w).real
    if w_norm2 == 0:
        raise InvalidInputError(f"combiner column {k} is zero")
    gains = np.abs(w.conj() @ H) ** 2 * p
    interference = gains.sum() - gains[k]
    return float(gains[k] / (interference + w_norm2 * noise_power))


def min_power_per_user(H, omega) -> np.ndarray:
    """Per-user minimum transmit power under ZF combining.

    User k needs ``||H inv(H^H H)[:, k]||^2 * omega_k``; since
    ``inv(H^H H) H^H H inv(H^H H) = inv(H^H H)`` the squared norm is the k-th
    diagonal entry of the inverse Gram matrix.
    """
    H = _as_channel(H)
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (H.shape[1],):
        raise InvalidInputError("omega length must equal the number of users")
    inv = gram_inverse(H)
    return np.real(np.diag(inv)) * omega


def total_power_zf(H, omega) -> float:
    """Minimum total transmit power ``tr(inv(H^H H) Omega)``."""
    return float(np.sum(min_power_per_user(H, omega)))


def zf_power_report(H, omega) -> PowerReport:
    per_user = min_power_per_user(H, omega)
    return PowerReport(per_user, float(per_user.sum()), zf_combiner(H))


def per_user_power_lower_bound(coeffs, n_antennas: int, noise_power: float, rate: float) -> float:
    """Lower bound ``noise_power (2**r - 1) / (MN ||b||_1^2)`` on one user's power."""
    if n_antennas < 1:
        raise InvalidInputError("need at least one antenna")
    l1 = np.sum(np.abs(np.atleast_1d(np.asarray(coeffs, dtype=complex))))
    if l1 == 0:
        raise InvalidInputError("path coefficients are all zero")
    return float(rate_weights(noise_power, [rate])[0] / (n_antennas * l1 ** 2))


def total_power_lower_bound(users, n_antennas: int, noise_power: float, rates) -> float:
    rates = np.broadcast_to(np.asarray(rates, dtype=float), (len(users),))
    return float(sum(per_user_power_lower_bound(u.coeffs, n_antennas, noise_power, r)
                     for u, r in zip(users, rates)))


def weighted_trace_inverse(grams: np.ndarray, omega) -> np.ndarray:
    """``tr(inv(G) Omega)`` for a stack of Hermitian matrices, shape (..., K, K).

    Entries whose matrix is not numerically positive definite evaluate to
    ``inf`` instead of raising, which is what the discrete search wants when
    it scans candidates that would make the Gram matrix singular.
    """
    grams = np.asarray(grams, dtype=complex)
    omega = np.asarray(omega, dtype=float)
    batch = grams.shape[:-2]
    K = grams.shape[-1]
    flat = grams.reshape(-1, K, K)
    out = np.full(flat.shape[0], np.inf)
    sqrt_w = np.diag(np.sqrt(omega)).astype(complex)
    try:
        L = np.linalg.cholesky(flat)
        ok = np.ones(flat.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        L = np.zeros_like(flat)
        ok = np.zeros(flat.shape[0], dtype=bool)
        for i, g in enumerate(flat):
            try:
                L[i] = np.linalg.cholesky(g)
                ok[i] = True
            except np.linalg.LinAlgError:
                pass
    if ok.any():
        # tr(inv(L L^H) Omega) = ||inv(L) Omega^(1/2)||_F^2
        X = np.linalg.solve(L[ok], np.broadcast_to(sqrt_w, (int(ok.sum()), K, K)))
        out[ok] = np.sum(np.abs(X) ** 2, axis=(-2, -1))
    out[~np.isfinite(out)] = np.inf
    return out.reshape(batch)
