"""Monte Carlo outage engine for the independently Rayleigh-faded MAC.

A user is in outage in a given fading realization when some subset of users
containing it asks for more sum rate than the subset's sum capacity
``log2(1 + sum_j snr_j g_j)``.  Rather than re-simulating every SNR point, the
engine computes for each trial the *outage threshold*: the total SNR below
which that trial is in outage.  With the power split held fixed, outage is
monotone in the total SNR, so an outage-probability curve is the empirical
survival function of these thresholds, and every SNR point shares the same
fading draws.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
import math
from typing import Optional, Sequence

import numpy as np

from . import _pykernels
from ._backend import kernels
from .errors import ComplexityGuardError, ConvergenceError, DomainError
from .rng import rng_substream  # noqa: F401  (re-exported)

MAX_SUBSET_USERS = 24
CHUNK = 1 << 16
SNR_BRACKET_DB = (-20.0, 120.0)


@dataclass
class ChannelRealization:
    gains: np.ndarray
    coeffs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.float64)
        if np.any(self.gains < 0):
            raise DomainError("power gains must be nonnegative")
        if self.coeffs is not None and len(self.coeffs) != len(self.gains):
            raise DomainError("coeffs and gains differ in length")

    @property
    def K(self) -> int:
        return len(self.gains)


@dataclass
class OutageQuery:
    """One individual-outage Monte Carlo experiment.

    ``power_split`` defaults to an equal split; per-user rates are
    ``R_sum / K`` unless ``rates`` is given explicitly.
    """

    K: int
    R_sum: float
    total_snr: float
    power_split: Optional[Sequence[float]] = None
    trials: int = 10 ** 6
    seed: int = 0
    rates: Optional[Sequence[float]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.K < 1:
            raise DomainError("K must be >= 1")
        if self.R_sum <= 0:
            raise DomainError("R_sum must be positive")
        if self.total_snr < 0:
            raise DomainError("total_snr must be nonnegative")
        if self.power_split is None:
            self.power_split = np.full(self.K, 1.0 / self.K)
        split = np.asarray(self.power_split, dtype=np.float64)
        if split.shape != (self.K,) or np.any(split < 0):
            raise DomainError("power_split must hold K nonnegative fractions")
        if abs(split.sum() - 1.0) > 1e-12:
            raise DomainError("power_split must sum to 1")
        self.power_split = split
        if self.rates is None:
            self.rates = np.full(self.K, self.R_sum / self.K)
        self.rates = np.asarray(self.rates, dtype=np.float64)
        if self.rates.shape != (self.K,) or np.any(self.rates < 0):
            raise DomainError("rates must hold K nonnegative values")


@dataclass(frozen=True)
class OpEstimate:
    p_hat: float
    half_width_95: float
    trials: int

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "OpEstimate":
        p = hits / trials
        return cls(p, 1.96 * math.sqrt(p * (1.0 - p) / trials), trials)

    @property
    def std_err(self) -> float:
        return self.half_width_95 / 1.96


@dataclass(frozen=True)
class CurvePoint:
    x: float
    p_hat: float
    half_width_95: float
    trials: int


def sample_rayleigh_gains(K: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw unit-variance circularly-symmetric complex Gaussian coefficients."""
    if K < 1:
        raise DomainError("K must be >= 1")
    h = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / math.sqrt(2.0)
    return ChannelRealization(np.abs(h) ** 2, h)


def trial_realization(master_seed: int, trial_index: int, K: int) -> ChannelRealization:
    """The fading draw the Monte Carlo engine uses for one trial index."""
    g = kernels.trial_gains(master_seed, trial_index, 1, K)[0]
    phase = _pykernels.trial_phases(master_seed, trial_index, 1, K)[0]
    return ChannelRealization(g, np.sqrt(g) * np.exp(1j * phase))


def _subset_masks(K: int, family: str, user: Optional[int]) -> np.ndarray:
    if K > MAX_SUBSET_USERS:
        raise ComplexityGuardError(
            f"subset enumeration over K={K} users exceeds the K<={MAX_SUBSET_USERS} guard")
    codes = np.arange(1, 1 << K, dtype=np.int64)
    masks = ((codes[:, None] >> np.arange(K)[None, :]) & 1).astype(bool)
    if family == "all_containing":
        if user is None or not 0 <= user < K:
            raise DomainError("all_containing needs a valid user index")
        masks = masks[masks[:, user]]
    elif family != "all_nonempty":
        raise DomainError(f"unknown subset family {family!r}")
    return masks


def joint_outage(real: ChannelRealization, per_user_snr, rates,
                 subsets: str = "all_containing", user: Optional[int] = None) -> bool:
    """True iff some subset in the family asks for more than its sum capacity.

    Equality between requested rate and capacity is not an outage.
    """
    snr = np.asarray(per_user_snr, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    if not (snr.shape == rates.shape == real.gains.shape):
        raise DomainError("per_user_snr, rates and gains must have equal lengths")
    masks = _subset_masks(real.K, subsets, user)
    need = masks @ rates
    cap = np.log2(1.0 + masks @ (snr * real.gains))
    return bool(np.any(need > cap))


def analytic_op_single_user(R: float, snr: float) -> float:
    """Closed-form Rayleigh outage ``1 - exp(-(2**R - 1) / snr)``."""
    if R <= 0 or snr <= 0:
        raise DomainError("R and snr must be positive")
    return -math.expm1(-math.expm1(R * math.log(2.0)) / snr)


def _thresholds_enumerated(master_seed, start, n, split, user, rates):
    masks = _subset_masks(len(split), "all_containing", user).T.astype(np.float64)
    numer = np.expm1(np.log(2.0) * (rates @ masks))
    out = np.empty(n)
    step = max(1, (1 << 22) // masks.shape[1])
    for a in range(0, n, step):
        b = min(n, a + step)
        w = kernels.trial_gains(master_seed, start + a, b - a, len(split)) * split
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = numer[None, :] / (w @ masks)
        ratio[np.isnan(ratio)] = 0.0  # zero rate over zero power never binds
        out[a:b] = ratio.max(axis=1)
    return out


def _threshold_chunk(master_seed, start, n, split, user, rates):
    if np.all(rates == rates[0]) and rates[0] > 0:
        numer = np.expm1(np.log(2.0) * rates[0] * np.arange(1, len(rates) + 1))
        return kernels.thresholds_equal_rate(master_seed, start, n, split, user, numer)
    return _thresholds_enumerated(master_seed, start, n, split, user, rates)


def _chunks(trials: int):
    return [(a, min(trials, a + CHUNK) - a) for a in range(0, trials, CHUNK)]


def outage_thresholds(K: int, R_sum: float, trials: int, seed: int, user: int = 0,
                      power_split=None, rates=None, threads: int = 1) -> np.ndarray:
    """Per-trial total-SNR thresholds: trial ``t`` is in outage iff ``snr < T[t]``."""
    q = OutageQuery(K, R_sum, 1.0, power_split, trials, seed, rates)
    if not 0 <= user < K:
        raise DomainError("user index out of range")
    if K > MAX_SUBSET_USERS:
        raise ComplexityGuardError(f"K={K} exceeds the K<={MAX_SUBSET_USERS} guard")
    jobs = _chunks(trials)

    def run(job):
        return _threshold_chunk(seed, job[0], job[1], q.power_split, user, q.rates)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts) if parts else np.empty(0)


def individual_outage_prob(q: OutageQuery, user_index: int = 0,
                           early_exit: bool = True, threads: int = 1) -> OpEstimate:
    """Probability that ``user_index`` is in outage (union over its subsets).

    With ``early_exit`` the run stops at the first chunk boundary where the 95%
    half-width drops below a tenth of the estimate.  Chunks are consumed in
    index order, so the stopping point does not depend on ``threads``.
    """
    if not 0 <= user_index < q.K:
        raise DomainError("user index out of range")
    if q.K > MAX_SUBSET_USERS:
        raise ComplexityGuardError(f"K={q.K} exceeds the K<={MAX_SUBSET_USERS} guard")
    jobs = _chunks(q.trials)
    hits = done = 0

    def run(job):
        T = _threshold_chunk(q.seed, job[0], job[1], q.power_split, user_index, q.rates)
        return int(np.count_nonzero(q.total_snr < T))

    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        wave = max(1, threads)
        for w in range(0, len(jobs), wave):
            batch = jobs[w:w + wave]
            counts = list(pool.map(run, batch)) if pool else [run(j) for j in batch]
            for job, c in zip(batch, counts):
                hits += c
                done += job[1]
                if early_exit and hits > 0:
                    est = OpEstimate.from_counts(hits, done)
                    if est.half_width_95 < est.p_hat / 10:
                        return est
    finally:
        if pool:
            pool.shutdown()
    return OpEstimate.from_counts(hits, done)


def joint_op_sum(q: OutageQuery, user_index: int = 0):
    """Union outage count next to the summed per-subset joint outage counts.

    Returns ``(union_estimate, summed_joint_op)``; the sum over overlapping
    subset events is an upper bound on the union and may exceed one.
    """
    masks = _subset_masks(q.K, "all_containing", user_index).T.astype(np.float64)
    need = q.rates @ masks
    snr = q.total_snr * q.power_split
    union = total = 0
    step = max(1, (1 << 22) // masks.shape[1])
    for a in range(0, q.trials, step):
        n = min(q.trials, a + step) - a
        g = kernels.trial_gains(q.seed, a, n, q.K)
        out = need[None, :] > np.log2(1.0 + (g * snr) @ masks)
        union += int(np.count_nonzero(out.any(axis=1)))
        total += int(np.count_nonzero(out))
    return OpEstimate.from_counts(union, q.trials), total / q.trials


def op_from_thresholds(T: np.ndarray, snr_db) -> np.ndarray:
    snr = 10.0 ** (np.asarray(snr_db, dtype=np.float64) / 10.0)
    Ts = np.sort(T)
    # count of thresholds strictly greater than snr
    return (len(Ts) - np.searchsorted(Ts, snr, side="right")) / len(Ts)


def op_curve(K_list, R_sum: float, snr_grid_db, trials: int, seed: int,
             threads: int = 1) -> dict:
    """Individual-outage curves keyed by K, one :class:`CurvePoint` per SNR."""
    grid = np.asarray(snr_grid_db, dtype=np.float64)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise DomainError("SNR grid must be strictly increasing")
    curves = {}
    for K in K_list:
        T = outage_thresholds(K, R_sum, trials, seed, threads=threads)
        p = op_from_thresholds(T, grid)
        curves[K] = [
            CurvePoint(float(x), float(pi), 1.96 * math.sqrt(pi * (1 - pi) / trials), trials)
            for x, pi in zip(grid, p)
        ]
    return curves


def bisect_db(predicate, lo: float, hi: float, tol: float) -> float:
    """Smallest dB value (to ``tol``) where the monotone ``predicate`` holds."""
    if not predicate(hi):
        raise ConvergenceError(f"target not reached inside [{lo}, {hi}] dB")
    if predicate(lo):
        raise ConvergenceError(f"target already met at the lower bracket {lo} dB")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def snr_at_op(K: int, R_sum: float, target_op: float, trials: int, seed: int,
              tol_db: float = 0.1, threads: int = 1, bracket=SNR_BRACKET_DB) -> float:
    """Total SNR (dB) at which the individual outage first drops to ``target_op``."""
    if not 0 < target_op < 1:
        raise DomainError("target_op must lie in (0, 1)")
    T = np.sort(outage_thresholds(K, R_sum, trials, seed, threads=threads))

    def ok(x_db):
        snr = 10.0 ** (x_db / 10.0)
        return (len(T) - np.searchsorted(T, snr, side="right")) / len(T) <= target_op

    return bisect_db(ok, bracket[0], bracket[1], tol_db)


def diversity_gain(K: int, R_sum: float, target_op: float = 0.01, trials: int = 10 ** 6,
                   seed: int = 0, tol_db: float = 0.1, threads: int = 1) -> float:
    """Total-SNR saving (dB) of K users sharing resources over a single user."""
    if K == 1:
        return 0.0
    base = snr_at_op(1, R_sum, target_op, trials, seed, tol_db, threads)
    return base - snr_at_op(K, R_sum, target_op, trials, seed, tol_db, threads)
