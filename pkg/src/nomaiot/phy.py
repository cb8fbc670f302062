"""Transmitter-side signal construction.

QPSK, symbol-level linear spreading with sequence pools, a small SCMA-style
sparse codebook, and signature-collision arithmetic.
"""
from dataclasses import dataclass
from itertools import combinations
import hashlib
import json
import math
from typing import List, Optional

import numpy as np

from .errors import DomainError, InfeasibleError

SQRT_HALF = 1.0 / math.sqrt(2.0)

# constellation indexed by 2*b0 + b1
QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) * SQRT_HALF
QPSK_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
POOL_KINDS = ("orthogonal", "random_qpsk", "chirp_like")


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        if set(bits) - {"0", "1"}:
            raise DomainError("bit strings may only contain '0' and '1'")
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(bits, dtype=np.uint8).ravel()


def qpsk_modulate(bits) -> np.ndarray:
    """Gray-mapped unit-energy QPSK.

    ``00 -> (+1+j)/sqrt2``, ``01 -> (-1+j)/sqrt2``, ``11 -> (-1-j)/sqrt2``,
    ``10 -> (+1-j)/sqrt2``: the first bit sets the imaginary sign, the second
    the real sign.
    """
    b = _as_bits(bits)
    if b.size % 2:
        raise DomainError("QPSK needs an even number of bits")
    pairs = b.reshape(-1, 2).astype(np.float64)
    return ((1.0 - 2.0 * pairs[:, 1]) + 1j * (1.0 - 2.0 * pairs[:, 0])) * SQRT_HALF


def qpsk_demod_hard(symbols) -> np.ndarray:
    """Nearest-point decisions; zero components resolve to the positive side."""
    s = np.asarray(symbols, dtype=np.complex128).ravel()
    out = np.empty((s.size, 2), dtype=np.uint8)
    out[:, 0] = s.imag < 0
    out[:, 1] = s.real < 0
    return out.ravel()


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


@dataclass
class SequencePool:
    """``M`` unit-norm length-``L`` signatures stored as the columns of ``sequences``."""

    sequences: np.ndarray  # shape (L, M)
    kind: str
    seed: Optional[int] = None

    def __post_init__(self):
        self.sequences = np.asarray(self.sequences, dtype=np.complex128)
        if self.sequences.ndim != 2:
            raise DomainError("sequences must be an L x M array")
        norms = np.sum(np.abs(self.sequences) ** 2, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError("every sequence must have unit norm")

    @property
    def L(self) -> int:
        return self.sequences.shape[0]

    @property
    def M(self) -> int:
        return self.sequences.shape[1]

    def __getitem__(self, i) -> np.ndarray:
        return self.sequences[:, i]

    def gram(self) -> np.ndarray:
        return self.sequences.conj().T @ self.sequences

    @property
    def max_crosscorr(self) -> float:
        if self.M < 2:
            return 0.0
        G = np.abs(self.gram())
        np.fill_diagonal(G, 0.0)
        return float(min(G.max(), 1.0))

    @property
    def mean_sq_crosscorr(self) -> float:
        if self.M < 2:
            return 0.0
        G = np.abs(self.gram()) ** 2
        return float((G.sum() - np.trace(G)) / (self.M * (self.M - 1)))

    def digest(self) -> str:
        """SHA-256 of the chip values, for run manifests."""
        return hashlib.sha256(np.ascontiguousarray(self.sequences).tobytes()).hexdigest()

    def to_json(self) -> str:
        return json.dumps({
            "L": self.L, "M": self.M, "kind": self.kind, "seed": self.seed,
            "sequences": [[[float(c.real), float(c.imag)] for c in self.sequences[:, m]]
                          for m in range(self.M)],
        })

    @classmethod
    def from_json(cls, text: str) -> "SequencePool":
        d = json.loads(text)
        seqs = np.array([[complex(re, im) for re, im in seq] for seq in d["sequences"]]).T
        if seqs.shape != (d["L"], d["M"]):
            raise DomainError("pool JSON shape does not match its L and M fields")
        return cls(seqs, d["kind"], d.get("seed"))


def generate_sequence_pool(L: int, M: int, kind: str = "random_qpsk",
                           seed: int = 0) -> SequencePool:
    """Build a signature pool.

    ``orthogonal`` takes ``M`` columns of the unitary ``L``-point DFT,
    ``random_qpsk`` draws chips from ``{+-1 +- j} / sqrt(2L)`` and
    ``chirp_like`` uses Zadoff-Chu style quadratic-phase chips with a seeded
    root and cyclic shift per sequence.
    """
    if L < 1 or M < 1:
        raise DomainError("L and M must be positive")
    if kind == "orthogonal":
        if M > L:
            raise InfeasibleError(f"only {L} orthogonal sequences exist for L={L}, asked {M}")
        n = np.arange(L)
        F = np.exp(-2j * np.pi * np.outer(n, n) / L) / math.sqrt(L)
        return SequencePool(F[:, :M], kind, seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind == "random_qpsk":
        re = 1.0 - 2.0 * rng.integers(0, 2, size=(L, M))
        im = 1.0 - 2.0 * rng.integers(0, 2, size=(L, M))
        return SequencePool((re + 1j * im) / math.sqrt(2 * L), kind, seed)
    if kind == "chirp_like":
        n = np.arange(L)[:, None]
        roots = rng.integers(1, max(L, 2), size=M)[None, :]
        shifts = rng.integers(0, L, size=M)[None, :]
        phase = np.pi * roots * (n + shifts) * (n + shifts + (L % 2)) / L
        return SequencePool(np.exp(-1j * phase) / math.sqrt(L), kind, seed)
    raise DomainError(f"unknown pool kind {kind!r}; choose from {POOL_KINDS}")


def spread(symbols, seq) -> np.ndarray:
    """Each symbol times the chip vector, blocks concatenated."""
    s = np.asarray(symbols, dtype=np.complex128).ravel()
    c = np.asarray(seq, dtype=np.complex128).ravel()
    return np.outer(s, c).ravel()


def despread(chips, seq) -> np.ndarray:
    """Per-block inner product with the sequence (matched filter)."""
    c = np.asarray(seq, dtype=np.complex128).ravel()
    return np.asarray(chips, dtype=np.complex128).reshape(-1, c.size) @ c.conj()


@dataclass
class ScmaCodebook:
    """Sparse codewords: ``codewords[u]`` is ``(2**b, resources)`` for user ``u``."""

    codewords: List[np.ndarray]
    patterns: List[tuple]

    @property
    def users(self) -> int:
        return len(self.codewords)

    @property
    def resources(self) -> int:
        return self.codewords[0].shape[1]

    @property
    def bits_per_codeword(self) -> int:
        return int(round(math.log2(self.codewords[0].shape[0])))


def scma_default_codebook(users: int = 6, resources: int = 4,
                          points_per_codeword: int = 4) -> ScmaCodebook:
    """6 users on 4 resources, two occupied resources per user.

    Each user's two nonzero entries carry a QPSK point and its Gray mirror,
    the second entry rotated by ``u * pi / 6``; every codeword has energy 1.
    """
    if (users, resources, points_per_codeword) != (6, 4, 4):
        raise DomainError("only the 6-user, 4-resource, 4-point codebook is supported")
    patterns = list(combinations(range(resources), 2))
    base = qpsk_modulate([0, 0, 0, 1, 1, 0, 1, 1])
    mirror = base[[3, 2, 1, 0]]
    codewords = []
    for u, (r1, r2) in enumerate(patterns):
        cw = np.zeros((points_per_codeword, resources), dtype=np.complex128)
        cw[:, r1] = base * SQRT_HALF
        cw[:, r2] = mirror * np.exp(1j * u * np.pi / 6) * SQRT_HALF
        codewords.append(cw)
    return ScmaCodebook(codewords, patterns)


def scma_encode(bits, user_index: int, cb: ScmaCodebook) -> np.ndarray:
    """Codeword for one bit group (first bit most significant)."""
    b = _as_bits(bits)
    if b.size != cb.bits_per_codeword:
        raise DomainError(f"expected {cb.bits_per_codeword} bits, got {b.size}")
    if not 0 <= user_index < cb.users:
        raise DomainError("user index out of range")
    idx = int(np.dot(b, 1 << np.arange(b.size)[::-1]))
    return cb.codewords[user_index][idx].copy()


def scma_encode_stream(bits, user_index: int, cb: ScmaCodebook) -> np.ndarray:
    """Encode a bit stream; returns ``(groups, resources)``."""
    b = _as_bits(bits)
    nb = cb.bits_per_codeword
    if b.size % nb:
        raise DomainError(f"bit count must be a multiple of {nb}")
    idx = b.reshape(-1, nb) @ (1 << np.arange(nb)[::-1])
    return cb.codewords[user_index][idx]


def collision_probability(K: int, M: int) -> float:
    """Probability that ``K`` uniform picks from ``M`` signatures are not all distinct."""
    if K < 0 or M < 1:
        raise DomainError("need K >= 0 and M >= 1")
    if K > M:
        return 1.0
    distinct = 1.0
    for i in range(K):
        distinct *= (M - i) / M
    return 1.0 - distinct
