"""Multi-user detectors for spread or sparse-coded uplink signals.

Received chips follow ``y = H x + n`` per symbol, where column ``k`` of ``H``
is user ``k``'s signature scaled by its fading coefficient.  Every detector
accepts a single chip vector ``(L,)`` or a block of symbols ``(N, L)`` that
share one channel.
"""
from dataclasses import dataclass
from itertools import product
import math
from typing import List, Optional

import numpy as np

from .errors import ComplexityGuardError, DomainError
from .phy import QPSK_BITS, QPSK_POINTS, qpsk_demod_hard

ML_MAX_BITS = 16
TINY_NOISE = 1e-12


@dataclass
class EffectiveChannel:
    matrix: np.ndarray  # (L, K)
    noise_var: float

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.complex128))
        if self.noise_var < 0:
            raise DomainError("noise variance must be nonnegative")

    @property
    def L(self) -> int:
        return self.matrix.shape[0]

    @property
    def K(self) -> int:
        return self.matrix.shape[1]

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.linalg.matrix_rank(self.matrix, tol=tol))

    @property
    def rank_deficient(self) -> bool:
        return self.rank() < min(self.L, self.K)


@dataclass
class InterferenceModel:
    """Inter-cell interference covariance in the chip (spreading-code) domain."""

    covariance: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.covariance, dtype=np.complex128)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DomainError("interference covariance must be square")
        if np.max(np.abs(C - C.conj().T)) > 1e-10:
            raise DomainError("interference covariance must be Hermitian")
        if np.linalg.eigvalsh(C).min() < -1e-10:
            raise DomainError("interference covariance must be positive semidefinite")
        self.covariance = C


def interference_covariance(signatures, powers, floor: float = 0.0) -> InterferenceModel:
    """``sum_i p_i c_i c_i^H + floor * I`` from ``r`` dominant interferers (columns)."""
    S = np.atleast_2d(np.asarray(signatures, dtype=np.complex128))
    p = np.broadcast_to(np.asarray(powers, dtype=np.float64), (S.shape[1],))
    if np.any(p < 0) or floor < 0:
        raise DomainError("interferer powers and floor must be nonnegative")
    C = (S * p) @ S.conj().T + floor * np.eye(S.shape[0])
    return InterferenceModel(0.5 * (C + C.conj().T))


def build_effective_channel(signatures, coeffs, noise_var: float) -> EffectiveChannel:
    """Stack ``h_k * c_k`` as columns.  ``signatures`` is a list of chip vectors."""
    sigs = [np.asarray(c, dtype=np.complex128).ravel() for c in signatures]
    h = np.asarray(coeffs, dtype=np.complex128).ravel()
    if len(sigs) != h.size:
        raise DomainError(f"{len(sigs)} signatures but {h.size} coefficients")
    if len({c.size for c in sigs}) > 1:
        raise DomainError("signatures differ in length")
    return EffectiveChannel(np.stack(sigs, axis=1) * h[None, :], noise_var)


def _noise_cov(ch: EffectiveChannel, interf: Optional[InterferenceModel]) -> np.ndarray:
    if ch.noise_var <= 0:
        raise DomainError("MMSE detection needs a positive noise variance")
    S = ch.noise_var * np.eye(ch.L, dtype=np.complex128)
    if interf is not None:
        if interf.covariance.shape != (ch.L, ch.L):
            raise DomainError("interference covariance does not match the chip length")
        S = S + interf.covariance
    return S


def mmse_filter(ch: EffectiveChannel, interf: Optional[InterferenceModel] = None):
    """MMSE filter ``W`` (K x L) and the post-filter SINR of each user.

    Uses the K-dimensional form ``(H^H S^-1 H + I)^-1 H^H S^-1``, equal to
    ``H^H (H H^H + S)^-1`` but well conditioned when ``K < L`` and noise is tiny.
    """
    H = ch.matrix
    Sinv_H = np.linalg.solve(_noise_cov(ch, interf), H)
    E = np.linalg.inv(H.conj().T @ Sinv_H + np.eye(ch.K))
    W = E @ Sinv_H.conj().T
    mse = np.clip(np.real(np.diag(E)), 1e-300, 1.0)
    return W, 1.0 / mse - 1.0


def mmse_detect(y, ch: EffectiveChannel, interf: Optional[InterferenceModel] = None):
    """Soft symbol estimates ``H^H (H H^H + s2 I + C)^-1 y``; shape ``(K,)`` or ``(N, K)``."""
    W, _ = mmse_filter(ch, interf)
    y = np.asarray(y, dtype=np.complex128)
    return y @ W.T


def _qpsk_hard(x):
    return np.where(x.real < 0, -1.0, 1.0) * (1 / math.sqrt(2)) \
        + 1j * np.where(x.imag < 0, -1.0, 1.0) * (1 / math.sqrt(2))


@dataclass
class SicResult:
    bits: np.ndarray      # (K, 2N)
    symbols: np.ndarray   # (N, K) hard decisions
    order: List[int]


def hard_sic(y, ch: EffectiveChannel, max_rounds: int = 1,
             interf: Optional[InterferenceModel] = None) -> SicResult:
    """MMSE detection with hard-decision successive interference cancellation.

    Each step detects the remaining user with the highest post-MMSE SINR (lowest
    index on ties), slices it to QPSK, subtracts its reconstruction and repeats.
    Later rounds re-detect every user in the same order against the other
    users' latest decisions, stopping early once no decision changes.
    """
    if max_rounds < 1:
        raise DomainError("max_rounds must be >= 1")
    Y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
    H = ch.matrix
    K = ch.K
    S = np.zeros((Y.shape[0], K), dtype=np.complex128)
    residual = Y.copy()
    remaining = list(range(K))
    order = []
    while remaining:
        sub = EffectiveChannel(H[:, remaining], ch.noise_var)
        W, sinr = mmse_filter(sub, interf)
        pick = int(np.argmax(sinr))
        k = remaining[pick]
        S[:, k] = _qpsk_hard(residual @ W[pick])
        residual -= np.outer(S[:, k], H[:, k])
        order.append(k)
        remaining.pop(pick)
    for _ in range(max_rounds - 1):
        changed = False
        for k in order:
            others = [j for j in range(K) if j != k]
            r = Y - S[:, others] @ H[:, others].T
            W, _ = mmse_filter(EffectiveChannel(H[:, [k]], ch.noise_var), interf)
            s_new = _qpsk_hard(r @ W[0])
            changed |= bool(np.any(s_new != S[:, k]))
            S[:, k] = s_new
        if not changed:
            break
    bits = np.stack([qpsk_demod_hard(S[:, k]) for k in range(K)])
    if np.ndim(y) == 1:
        S = S[0]
    return SicResult(bits, S, order)


def ml_search(y, candidates) -> np.ndarray:
    """Exhaustive joint search over per-user candidate contributions.

    ``candidates[k]`` is an ``(M_k, L)`` array of user ``k``'s possible received
    chip vectors.  Returns the chosen index per user, shape ``(N, K)``; ties go
    to the lexicographically first tuple (user 0 most significant).
    """
    sizes = [c.shape[0] for c in candidates]
    bits = sum(math.log2(m) for m in sizes)
    if bits > ML_MAX_BITS:
        raise ComplexityGuardError(
            f"joint ML search over {bits:g} bits exceeds the {ML_MAX_BITS}-bit guard")
    Y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
    tuples = np.array(list(product(*[range(m) for m in sizes])), dtype=np.int64)
    Z = np.zeros((len(tuples), Y.shape[1]), dtype=np.complex128)
    for k, c in enumerate(candidates):
        Z += np.asarray(c, dtype=np.complex128)[tuples[:, k]]
    step = max(1, (1 << 22) // (len(tuples) * Y.shape[1]))
    best = np.empty(Y.shape[0], dtype=np.int64)
    for a in range(0, Y.shape[0], step):
        d = np.abs(Y[a:a + step, None, :] - Z[None, :, :]) ** 2
        best[a:a + step] = np.argmin(d.sum(axis=2), axis=1)
    return tuples[best]


def ml_joint_detect(y, ch: EffectiveChannel, constellation=None):
    """Joint ML decisions ``argmin ||y - H x||^2`` over QPSK tuples; bits ``(K, 2N)``."""
    points = QPSK_POINTS if constellation is None else np.asarray(constellation)
    if constellation is not None and not np.allclose(points, QPSK_POINTS):
        raise DomainError("bit labelling is defined for the package QPSK constellation only")
    H = ch.matrix
    idx = ml_search(y, [np.outer(points, H[:, k]) for k in range(ch.K)])
    return np.stack([QPSK_BITS[idx[:, k]].ravel() for k in range(ch.K)])


def ls_channel_estimate(y_pilot, pilot_matrix):
    """Regularised least squares ``(P^H P + d I)^-1 P^H y`` with ``d = 1e-9 tr(P^H P) / K``.

    Returns ``(estimates, rank_deficient)``; a rank-deficient pilot matrix
    (e.g. two users on the same pilot) still yields estimates, but they are
    not identifiable.
    """
    P = np.atleast_2d(np.asarray(pilot_matrix, dtype=np.complex128))
    if P.shape[0] < 1:
        raise DomainError("pilot length must be >= 1")
    K = P.shape[1]
    G = P.conj().T @ P
    delta = 1e-9 * np.real(np.trace(G)) / K
    h = np.linalg.solve(G + delta * np.eye(K), P.conj().T @ np.asarray(y_pilot, dtype=np.complex128))
    deficient = np.linalg.matrix_rank(P, tol=1e-9 * max(1.0, np.abs(P).max())) < K
    return h, bool(deficient)
