"""Pure numpy implementations of the Monte Carlo hot loops.

Used when the compiled ``_kernels`` extension is not available, and as the
reference the extension is tested against.
"""
import numpy as np

from .rng import substream_array, to_unit_open

PHASE_OFFSET = 1 << 32


def trial_gains(master_seed: int, start: int, n: int, K: int) -> np.ndarray:
    """Exp(1) power gains for trials ``start .. start+n-1``, shape ``(n, K)``."""
    seeds = substream_array(master_seed, np.arange(start, start + n, dtype=np.uint64))
    words = substream_array(seeds[:, None], np.arange(K, dtype=np.uint64)[None, :])
    return -np.log(to_unit_open(words))


def trial_phases(master_seed: int, start: int, n: int, K: int) -> np.ndarray:
    seeds = substream_array(master_seed, np.arange(start, start + n, dtype=np.uint64))
    cols = np.arange(PHASE_OFFSET, PHASE_OFFSET + K, dtype=np.uint64)
    words = substream_array(seeds[:, None], cols[None, :])
    return 2.0 * np.pi * to_unit_open(words)


def thresholds_equal_rate(master_seed, start, n, split, user, numer):
    """Per-trial outage threshold on the total SNR when all rates are equal.

    With equal rates the binding subset of size ``m`` that contains ``user``
    is ``user`` plus the ``m - 1`` other users with the smallest received
    power, so the ``2**(K-1)`` subsets collapse to ``K`` prefix sums.
    ``numer[m-1]`` is ``2**(m*r) - 1``.
    """
    split = np.asarray(split, dtype=np.float64)
    K = split.size
    w = trial_gains(master_seed, start, n, K) * split
    own = w[:, user]
    others = np.sort(np.delete(w, user, axis=1), axis=1)
    # left-to-right accumulation, same order as the compiled loop
    G = np.cumsum(np.concatenate([own[:, None], others], axis=1), axis=1)
    with np.errstate(divide="ignore"):
        return np.max(np.asarray(numer)[None, :] / G, axis=1)
