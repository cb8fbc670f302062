"""Counter-based random substreams.

Every random quantity in the Monte Carlo engines is keyed by
``(master_seed, trial_index[, slot])`` instead of being drawn from a shared
sequential generator.  Results therefore do not depend on evaluation order or
on how trials are split across workers.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U64_GOLDEN = np.uint64(GOLDEN)
_U64_M1 = np.uint64(_M1)
_U64_M2 = np.uint64(_M2)
_TWO_M52 = 2.0 ** -52


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def rng_substream(master_seed: int, trial_index: int) -> int:
    """Derive the 64-bit seed of trial ``trial_index``.

    The counter ``master + (index + 1) * golden`` is injective in the index
    (the increment is odd) and the SplitMix64 finalizer is a bijection on
    64-bit words, so distinct indices never share a seed.
    """
    z = (int(master_seed) + (int(trial_index) + 1) * GOLDEN) & MASK64
    return _finalize(z)


def substream_array(master_seed, indices) -> np.ndarray:
    """Vectorised :func:`rng_substream`; ``master_seed`` may be an array too."""
    idx = np.asarray(indices, dtype=np.uint64)
    master = np.asarray(master_seed, dtype=np.uint64) if isinstance(
        master_seed, np.ndarray) else np.uint64(int(master_seed) & MASK64)
    with np.errstate(over="ignore"):
        z = master + (idx + np.uint64(1)) * _U64_GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _U64_M1
        z = (z ^ (z >> np.uint64(27))) * _U64_M2
    return z ^ (z >> np.uint64(31))


def to_unit_open(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in the open interval (0, 1)."""
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_M52


def generator(master_seed: int, index: int) -> np.random.Generator:
    """A numpy ``Generator`` seeded from one substream (for vector-heavy trials)."""
    return np.random.Generator(np.random.PCG64(rng_substream(master_seed, index)))
