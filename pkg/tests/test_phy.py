import math
from itertools import product

from hypothesis import given, strategies as st
import numpy as np
import pytest

from nomaiot import phy
from nomaiot.errors import DomainError, InfeasibleError

R2 = math.sqrt(2)


@pytest.mark.parametrize("bits,sym", [("00", (1 + 1j) / R2), ("01", (-1 + 1j) / R2),
                                      ("11", (-1 - 1j) / R2), ("10", (1 - 1j) / R2)])
def test_qpsk_mapping(bits, sym):
    assert phy.qpsk_modulate(bits)[0] == pytest.approx(sym, abs=1e-15)


def test_qpsk_errors_and_energy():
    with pytest.raises(DomainError):
        phy.qpsk_modulate("101")
    s = phy.qpsk_modulate(np.random.default_rng(0).integers(0, 2, 200))
    np.testing.assert_allclose(np.abs(s) ** 2, 1.0, atol=1e-15)


@given(st.lists(st.integers(0, 1), min_size=0, max_size=64).filter(lambda b: len(b) % 2 == 0))
def test_qpsk_roundtrip(bits):
    out = phy.qpsk_demod_hard(phy.qpsk_modulate(np.array(bits, dtype=np.uint8)))
    assert out.tolist() == bits


def test_demod_tiebreak_and_symmetry():
    assert phy.bits_to_str(phy.qpsk_demod_hard([0j])) == "00"
    assert phy.bits_to_str(phy.qpsk_demod_hard([0.3 + 0j])) == "00"
    for b in ("00", "01", "10", "11"):
        s = phy.qpsk_modulate(b)
        flipped = phy.bits_to_str(phy.qpsk_demod_hard(-s))
        assert flipped == "".join("1" if c == "0" else "0" for c in b)


def test_orthogonal_pool():
    pool = phy.generate_sequence_pool(4, 4, "orthogonal")
    assert pool.max_crosscorr < 1e-10
    with pytest.raises(InfeasibleError):
        phy.generate_sequence_pool(4, 5, "orthogonal")


def test_random_pool_statistics():
    pool = phy.generate_sequence_pool(4, 64, "random_qpsk", seed=1)
    assert 0 < pool.max_crosscorr <= 1
    # direct average over all pairs vs the 1/L expectation for unimodular chips
    G = np.abs(pool.sequences.conj().T @ pool.sequences) ** 2
    mean = (G.sum() - np.trace(G)) / (64 * 63)
    assert abs(mean - 0.25) < 0.05
    assert pool.mean_sq_crosscorr == pytest.approx(mean)
    # chips (+-1 +- j) / sqrt(2L) have modulus 1 / sqrt(L)
    np.testing.assert_allclose(np.abs(pool.sequences), 0.5, atol=1e-15)


@pytest.mark.parametrize("kind", ["orthogonal", "random_qpsk", "chirp_like"])
def test_pool_reproducible_and_unit_norm(kind):
    a = phy.generate_sequence_pool(8, 8, kind, seed=7)
    b = phy.generate_sequence_pool(8, 8, kind, seed=7)
    assert a.sequences.tobytes() == b.sequences.tobytes()
    np.testing.assert_allclose(np.linalg.norm(a.sequences, axis=0), 1.0, atol=1e-12)
    assert 0 <= a.max_crosscorr <= 1


def test_pool_json_roundtrip():
    pool = phy.generate_sequence_pool(6, 10, "chirp_like", seed=3)
    back = phy.SequencePool.from_json(pool.to_json())
    np.testing.assert_array_equal(back.sequences, pool.sequences)
    assert (back.kind, back.seed) == ("chirp_like", 3)
    assert back.digest() == pool.digest()


def test_spread_despread():
    c = phy.generate_sequence_pool(4, 1, "random_qpsk", seed=2)[0]
    s = phy.qpsk_modulate("0011100100")
    chips = phy.spread(s, c)
    assert chips.size == s.size * 4
    np.testing.assert_allclose(chips[:4], s[0] * c)
    assert np.sum(np.abs(chips) ** 2) == pytest.approx(np.sum(np.abs(s) ** 2), abs=1e-10)
    np.testing.assert_allclose(phy.despread(chips, c), s, atol=1e-12)


def test_orthogonal_spread_despread_identity_multiuser():
    pool = phy.generate_sequence_pool(4, 4, "orthogonal")
    s = [phy.qpsk_modulate(b) for b in ("0011", "0110", "1100", "1001")]
    y = sum(phy.spread(s[k], pool[k]) for k in range(4))
    for k in range(4):
        np.testing.assert_allclose(phy.despread(y, pool[k]), s[k], atol=1e-12)


def test_scma_codebook_structure():
    cb = phy.scma_default_codebook()
    assert len(set(cb.patterns)) == 6
    per_resource = np.zeros(4, int)
    for u in range(6):
        cw = cb.codewords[u]
        nz = np.abs(cw) > 0
        assert np.all(nz.sum(axis=1) == 2)
        assert all(tuple(np.flatnonzero(row)) == cb.patterns[u] for row in nz)
        assert len({row.tobytes() for row in cw}) == 4
        assert np.mean(np.sum(np.abs(cw) ** 2, axis=1)) == pytest.approx(1.0, abs=1e-10)
        per_resource += nz[0]
    assert per_resource.tolist() == [3, 3, 3, 3]
    with pytest.raises(DomainError):
        phy.scma_default_codebook(users=8)


def test_scma_encode():
    cb = phy.scma_default_codebook()
    for u in range(6):
        words = [phy.scma_encode(b, u, cb) for b in ("00", "01", "10", "11")]
        assert len({w.tobytes() for w in words}) == 4
        for w in words:
            assert tuple(np.flatnonzero(w)) == cb.patterns[u]
        assert np.mean([np.sum(np.abs(w) ** 2) for w in words]) == pytest.approx(1, abs=1e-10)
    with pytest.raises(DomainError):
        phy.scma_encode("011", 0, cb)
    stream = phy.scma_encode_stream("0110", 2, cb)
    np.testing.assert_array_equal(stream[1], phy.scma_encode("10", 2, cb))


def test_scma_superposition_degree():
    cb = phy.scma_default_codebook()
    for idx in product(range(4), repeat=6):
        contrib = np.array([np.abs(cb.codewords[u][i]) > 0 for u, i in enumerate(idx)])
        assert contrib.sum(axis=0).max() <= 3
        break  # pattern is bit-independent; one tuple suffices


def test_collision_probability():
    assert phy.collision_probability(1, 10) == 0
    assert phy.collision_probability(0, 10) == 0
    assert phy.collision_probability(3, 2) == 1
    assert phy.collision_probability(2, 64) == pytest.approx(1 / 64, rel=1e-14)


def test_collision_probability_monte_carlo():
    rng = np.random.default_rng(5)
    K, M, n = 5, 32, 100_000
    picks = rng.integers(0, M, size=(n, K))
    srt = np.sort(picks, axis=1)
    freq = np.mean(np.any(srt[:, 1:] == srt[:, :-1], axis=1))
    p = phy.collision_probability(K, M)
    assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / n)
