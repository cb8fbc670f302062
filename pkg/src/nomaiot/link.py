"""Uncoded uplink link-level simulation of the spreading / SCMA transmitter branch."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import math
from typing import Optional, Sequence

import numpy as np

from . import phy, rx
from .errors import ComplexityGuardError, DomainError, InfeasibleError
from .rng import generator

RECEIVERS = ("mmse", "sic", "ml")
CHUNK = 256


@dataclass
class LinkScenario:
    """One link-level configuration.

    ``csi='ls'`` adds a pilot phase of ``pilot_len`` chips per user before the
    data and detects with the least-squares estimates.  ``signatures`` (an
    ``L x K`` array) overrides the pool.  ``power_db`` gives per-user received
    power offsets.  ``snr_db`` is the per-user average SNR at 0 dB offset.
    """

    users: int = 4
    spread_len: int = 4
    pool_kind: str = "random_qpsk"
    pool_size: Optional[int] = None
    pool_seed: int = 4
    snr_db: float = 10.0
    payload_bits: int = 100
    receiver: str = "mmse"
    csi: str = "perfect"
    pilot_kind: str = "orthogonal"
    pilot_len: int = 8
    trials: int = 1000
    seed: int = 0
    power_db: Optional[Sequence[float]] = None
    scma: bool = False
    signature_pick: str = "fixed"
    sic_rounds: int = 1
    noiseless: bool = False
    signatures: Optional[np.ndarray] = field(default=None, repr=False)
    interference: Optional[rx.InterferenceModel] = field(default=None, repr=False)

    def validate(self):
        if self.users < 1:
            raise DomainError("need at least one user")
        if self.receiver not in RECEIVERS:
            raise DomainError(f"receiver must be one of {RECEIVERS}")
        if self.csi not in ("perfect", "ls"):
            raise DomainError("csi must be 'perfect' or 'ls'")
        if self.pilot_kind not in ("orthogonal", "nonorthogonal"):
            raise DomainError("pilot_kind must be 'orthogonal' or 'nonorthogonal'")
        if self.signature_pick not in ("fixed", "random"):
            raise DomainError("signature_pick must be 'fixed' or 'random'")
        if self.payload_bits < 2 or self.payload_bits % 2:
            raise DomainError("payload_bits must be a positive even number")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.power_db is not None and len(self.power_db) != self.users:
            raise DomainError("power_db needs one entry per user")
        if self.scma:
            if self.receiver != "ml":
                raise InfeasibleError("the SCMA codebook is only detected by the ML receiver")
            if self.users > 6:
                raise InfeasibleError("the default SCMA codebook serves at most 6 users")
        if self.receiver == "ml" and 2 * self.users > rx.ML_MAX_BITS:
            raise ComplexityGuardError(
                f"ML over {self.users} QPSK users is {2 * self.users} bits, "
                f"above the {rx.ML_MAX_BITS}-bit guard")
        if self.csi == "ls" and self.pilot_kind == "orthogonal" and self.users > self.pilot_len:
            raise InfeasibleError(
                f"{self.users} users need more than {self.pilot_len} orthogonal pilots")
        if self.signatures is not None:
            sig = np.asarray(self.signatures)
            if sig.ndim != 2 or sig.shape[1] != self.users:
                raise DomainError("signatures must be an L x users array")

    def manifest(self) -> dict:
        d = asdict(self)
        d.pop("signatures")
        d.pop("interference")
        return d


@dataclass
class LinkResult:
    ber: np.ndarray
    bler: np.ndarray
    ser: np.ndarray
    trials: int
    bits_per_user: int
    symbols_per_user: int
    collision_trials: int
    rank_deficient_trials: int
    pool_digest: str
    trial_symbol_errors: np.ndarray = field(repr=False, default=None)  # (trials,), summed over users


def build_signatures(sc: LinkScenario):
    """The signature pool users pick from (custom columns are renormalised)."""
    if sc.signatures is not None:
        sig = np.asarray(sc.signatures, dtype=np.complex128)
        pool = phy.SequencePool(sig / np.linalg.norm(sig, axis=0), "custom")
        return pool
    M = sc.pool_size or (sc.users if sc.pool_kind != "orthogonal" else sc.spread_len)
    pool = phy.generate_sequence_pool(sc.spread_len, M, sc.pool_kind, sc.pool_seed)
    if sc.signature_pick == "fixed" and pool.M < sc.users:
        raise InfeasibleError(f"fixed signature assignment needs M >= {sc.users}, pool has {pool.M}")
    return pool


def pilot_matrix(kind: str, length: int, K: int, seed: int) -> np.ndarray:
    """Unimodular pilots (``|p| = 1`` per chip); DFT columns when orthogonal."""
    if kind == "orthogonal":
        n = np.arange(length)
        return np.exp(-2j * np.pi * np.outer(n, np.arange(K)) / length)
    pool = phy.generate_sequence_pool(length, K, "random_qpsk", seed)
    return pool.sequences * math.sqrt(length)


def _run_trial(sc: LinkScenario, t: int, pool, cb, pilots, amp, noise_var, det_var):
    rng = generator(sc.seed, t)
    K = sc.users
    bits = rng.integers(0, 2, size=(K, sc.payload_bits), dtype=np.uint8)
    h = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) * math.sqrt(0.5) * amp
    noise_std = math.sqrt(noise_var / 2.0)

    if sc.signature_pick == "random":
        picks = rng.integers(0, pool.M, size=K)
    else:
        picks = np.arange(K)
    collided = len(set(picks.tolist())) < K

    if sc.scma:
        L = cb.resources
        tx = [phy.scma_encode_stream(bits[k], k, cb) for k in range(K)]
        y = sum(h[k] * tx[k] for k in range(K))
    else:
        L = pool.L
        sigs = pool.sequences[:, picks]
        S = np.stack([phy.qpsk_modulate(bits[k]) for k in range(K)], axis=1)
        y = S @ (sigs * h[None, :]).T
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    y = y + noise_std * noise

    h_used = h
    deficient = False
    if sc.csi == "ls":
        pn = rng.standard_normal(pilots.shape[0]) + 1j * rng.standard_normal(pilots.shape[0])
        y_p = pilots @ h + noise_std * pn
        h_used, deficient = rx.ls_channel_estimate(y_p, pilots)

    if sc.scma:
        cands = [h_used[k] * cb.codewords[k] for k in range(K)]
        idx = rx.ml_search(y, cands)
        nb = cb.bits_per_codeword
        weights = 1 << np.arange(nb)[::-1]
        shifts = np.arange(nb)[::-1]
        dec = np.stack([((idx[:, k][:, None] >> shifts) & 1).astype(np.uint8).ravel()
                        for k in range(K)])
        sym_err = np.array([np.count_nonzero(idx[:, k] != bits[k].reshape(-1, nb) @ weights)
                            for k in range(K)])
    else:
        ch = rx.EffectiveChannel(sigs * h_used[None, :], det_var)
        deficient = deficient or ch.rank_deficient
        if sc.receiver == "mmse":
            X = rx.mmse_detect(y, ch, sc.interference)
            dec = np.stack([phy.qpsk_demod_hard(X[:, k]) for k in range(K)])
        elif sc.receiver == "sic":
            dec = rx.hard_sic(y, ch, sc.sic_rounds, sc.interference).bits
        else:
            dec = rx.ml_joint_detect(y, ch)
        pair_err = (dec != bits).reshape(K, -1, 2).any(axis=2)
        sym_err = pair_err.sum(axis=1)

    bit_err = np.count_nonzero(dec != bits, axis=1)
    return bit_err, (bit_err > 0).astype(np.int64), sym_err, int(collided), int(deficient)


def link_level_run(sc: LinkScenario, threads: int = 1) -> LinkResult:
    """Simulate ``sc.trials`` packets; every packet sees fresh block fading.

    Trial ``t`` draws all its randomness from substream ``(sc.seed, t)``, so
    results do not depend on ``threads``.
    """
    sc.validate()
    K = sc.users
    cb = phy.scma_default_codebook() if sc.scma else None
    pool = None if sc.scma else build_signatures(sc)
    digest = pool.digest() if pool is not None else "scma-default"
    pilots = pilot_matrix(sc.pilot_kind, sc.pilot_len, K, sc.pool_seed + 1) \
        if sc.csi == "ls" else None
    offsets = np.zeros(K) if sc.power_db is None else np.asarray(sc.power_db, dtype=float)
    amp = 10.0 ** (offsets / 20.0)
    noise_var = 0.0 if sc.noiseless else 10.0 ** (-sc.snr_db / 10.0)
    det_var = max(noise_var, rx.TINY_NOISE)

    def run(chunk):
        acc = [np.zeros(K, np.int64), np.zeros(K, np.int64), np.zeros(K, np.int64), 0, 0]
        per_trial = np.zeros(len(chunk), np.int64)
        for i, t in enumerate(chunk):
            out = _run_trial(sc, t, pool, cb, pilots, amp, noise_var, det_var)
            for j in range(5):
                acc[j] = acc[j] + out[j]
            per_trial[i] = out[2].sum()
        return acc, per_trial

    chunks = [range(a, min(sc.trials, a + CHUNK)) for a in range(0, sc.trials, CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    tot = [sum(p[0][i] for p in parts) for i in range(5)]
    nsym = sc.payload_bits // 2
    return LinkResult(
        ber=tot[0] / (sc.trials * sc.payload_bits),
        bler=tot[1] / sc.trials,
        ser=tot[2] / (sc.trials * nsym),
        trials=sc.trials,
        bits_per_user=sc.trials * sc.payload_bits,
        symbols_per_user=sc.trials * nsym,
        collision_trials=int(tot[3]),
        rank_deficient_trials=int(tot[4]),
        pool_digest=digest,
        trial_symbol_errors=np.concatenate([p[1] for p in parts]),
    )
