"""Shannon and normal-approximation rates, Eb/N0 conversions and load curves.

Rates are in bits per channel use over a complex AWGN channel.  The load
curves answer: at system load ``mu = K / n`` with ``k`` information bits per
user, what total Eb/N0 keeps the per-user Rayleigh outage at ``eps``?
"""
from dataclasses import dataclass, field
import math
from typing import List

import numpy as np
from scipy.special import ndtri

from . import macsim
from .errors import ConvergenceError, DomainError

LOG2E = 1.0 / math.log(2.0)
SNR_OVERFLOW = 1e12
BRACKET_DB = (-20.0, 120.0)


@dataclass(frozen=True)
class RateQuery:
    snr: float
    blocklength_n: int
    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")
        if self.blocklength_n < 1:
            raise DomainError("blocklength_n must be >= 1")
        if self.snr < 0:
            raise DomainError("snr must be nonnegative")


@dataclass(frozen=True)
class RatePoint:
    capacity_C: float
    dispersion_V: float
    rate: float


@dataclass
class LoadCurveSpec:
    info_bits_k: float = 100
    eps: float = 0.01
    mu_grid: List[float] = field(default_factory=lambda: [0.04, 0.08, 0.12, 0.16])
    finite_n: int = 100

    def __post_init__(self):
        if self.info_bits_k <= 0:
            raise DomainError("info_bits_k must be positive")
        if not 0.0 < self.eps < 1.0:
            raise DomainError("eps must lie in (0, 1)")
        if any(mu <= 0 for mu in self.mu_grid):
            raise DomainError("every load mu must be positive")

    def finite_K(self, mu: float) -> int:
        return int(round(mu * self.finite_n))


@dataclass(frozen=True)
class LoadPoint:
    """Required total Eb/N0 at one load; ``flag`` is empty when the solve succeeded."""

    mu: float
    ebn0_db: float
    flag: str = ""


def _check_snr(snr):
    if np.any(np.asarray(snr) < 0):
        raise DomainError("snr must be nonnegative")


def shannon_capacity(snr):
    _check_snr(snr)
    return np.log2(1.0 + np.asarray(snr, dtype=np.float64))[()]


def channel_dispersion(snr):
    """Complex-AWGN dispersion ``(1 - (1+snr)**-2) * log2(e)**2``."""
    _check_snr(snr)
    s = np.asarray(snr, dtype=np.float64)
    return (-np.expm1(-2.0 * np.log1p(s)) * LOG2E ** 2)[()]


def qinv(p):
    """Inverse Gaussian tail function: ``Q(qinv(p)) == p``."""
    a = np.asarray(p, dtype=np.float64)
    if np.any(~((a > 0) & (a < 1))):
        raise DomainError("p must lie in (0, 1)")
    # -ndtri(p) keeps full relative accuracy in the upper tail
    return (-ndtri(a))[()]


def _na_rate(snr, n, eps):
    C = np.log2(1.0 + snr)
    V = -np.expm1(-2.0 * np.log1p(snr)) * LOG2E ** 2
    return np.maximum(C - np.sqrt(V / n) * qinv(eps), 0.0)


def normal_approx_rate(q: RateQuery) -> RatePoint:
    """Normal approximation ``C - sqrt(V/n) Qinv(eps)``, floored at zero.

    The ``log2(n) / (2n)`` third-order term is left out.
    """
    if q.snr <= 0:
        raise DomainError("snr must be positive")
    C = float(shannon_capacity(q.snr))
    V = float(channel_dispersion(q.snr))
    return RatePoint(C, V, float(_na_rate(q.snr, q.blocklength_n, q.eps)))


def ebn0_from_snr(snr, spectral_efficiency):
    if np.any(np.asarray(spectral_efficiency) <= 0):
        raise DomainError("spectral efficiency must be positive")
    return np.asarray(snr, dtype=np.float64)[()] / spectral_efficiency


def snr_from_ebn0(ebn0, spectral_efficiency):
    if np.any(np.asarray(spectral_efficiency) <= 0):
        raise DomainError("spectral efficiency must be positive")
    return np.asarray(ebn0, dtype=np.float64)[()] * spectral_efficiency


def db(x):
    return 10.0 * np.log10(x)


def _min_snr_for_rate(rate_fn, r: float) -> float:
    """Smallest instantaneous SNR ``x`` with ``rate_fn(x) >= r`` (log-domain bisection)."""
    lo, hi = -12.0, 12.0
    if rate_fn(10.0 ** hi) < r:
        return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate_fn(10.0 ** mid) >= r:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13:
            break
    return 10.0 ** hi


def oma_required_total_ebn0(spec: LoadCurveSpec, mu: float,
                            model: str = "asymptotic") -> LoadPoint:
    """TDMA: each user sends ``k`` bits in its own slice of ``1/mu`` channel uses.

    ``asymptotic`` uses Shannon capacity at rate ``k*mu``; ``dispersion_corrected``
    uses the normal approximation at blocklength ``floor(1/mu)`` and the rate
    that slice actually needs.  The Eb/N0 bisection runs to 0.01 dB.
    """
    if mu <= 0:
        raise DomainError("mu must be positive")
    k, eps = spec.info_bits_k, spec.eps
    if model == "asymptotic":
        se = k * mu
        x_star = math.expm1(se * math.log(2.0))
    elif model == "dispersion_corrected":
        n_slot = math.floor(1.0 / mu + 1e-9)
        if n_slot < 1:
            return LoadPoint(mu, math.nan, "infeasible: slot shorter than one channel use")
        se = k / n_slot
        x_star = _min_snr_for_rate(lambda x: _na_rate(x, n_slot, eps), se)
    else:
        raise DomainError(f"unknown model {model!r}")
    if not math.isfinite(x_star):
        return LoadPoint(mu, math.inf, "infeasible: rate unreachable below the SNR guard")

    def meets(snr_db):
        return -math.expm1(-x_star / 10.0 ** (snr_db / 10.0)) <= eps

    try:
        snr_db = macsim.bisect_db(meets, BRACKET_DB[0], BRACKET_DB[1], 0.01)
    except ConvergenceError as exc:
        if meets(BRACKET_DB[1]):
            snr_db = BRACKET_DB[0]
        else:
            return LoadPoint(mu, math.inf, f"infeasible: {exc}")
    if 10.0 ** (snr_db / 10.0) > SNR_OVERFLOW:
        return LoadPoint(mu, math.inf, "infeasible: SNR overflow guard")
    return LoadPoint(mu, float(snr_db - db(se)))


def noma_required_total_ebn0(spec: LoadCurveSpec, mu: float, trials: int = 200_000,
                             seed: int = 0, threads: int = 1) -> LoadPoint:
    """Joint-decoding outage proxy on a finite frame of ``finite_n`` channel uses.

    ``round(mu * finite_n)`` users each send ``k`` bits over the whole frame;
    the total SNR is bisected (0.1 dB) until the individual outage reaches
    ``eps`` and converted with the simulated sum spectral efficiency.
    """
    K = spec.finite_K(mu)
    if K < 1:
        return LoadPoint(mu, math.nan, "infeasible: round(mu*finite_n) < 1")
    if K > macsim.MAX_SUBSET_USERS:
        return LoadPoint(mu, math.nan, f"infeasible: K={K} above subset guard")
    R_sum = K * spec.info_bits_k / spec.finite_n
    try:
        snr_db = macsim.snr_at_op(K, R_sum, spec.eps, trials, seed, tol_db=0.1,
                                  threads=threads, bracket=BRACKET_DB)
    except ConvergenceError as exc:
        return LoadPoint(mu, math.nan, f"nonconvergent: {exc}")
    return LoadPoint(mu, float(snr_db - db(R_sum)))
