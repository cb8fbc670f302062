# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; must match ``_pykernels`` bit-for-bit up to libm rounding."""
import numpy as np
from libc.math cimport log, INFINITY
from libc.stdint cimport uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double TWO_M52 = 1.0 / 4503599627370496.0


cdef inline uint64_t substream(uint64_t master, uint64_t idx) noexcept nogil:
    cdef uint64_t z = master + (idx + 1) * GOLDEN
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline double unit_open(uint64_t w) noexcept nogil:
    return (<double>(w >> 12) + 0.5) * TWO_M52


def trial_gains(master_seed, Py_ssize_t start, Py_ssize_t n, Py_ssize_t K):
    out = np.empty((n, K), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t master = <uint64_t>(int(master_seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t s
    cdef Py_ssize_t t, j
    with nogil:
        for t in range(n):
            s = substream(master, <uint64_t>(start + t))
            for j in range(K):
                o[t, j] = -log(unit_open(substream(s, <uint64_t>j)))
    return out


def thresholds_equal_rate(master_seed, Py_ssize_t start, Py_ssize_t n,
                          split_in, Py_ssize_t user, numer_in):
    cdef double[::1] split = np.ascontiguousarray(split_in, dtype=np.float64)
    cdef double[::1] numer = np.ascontiguousarray(numer_in, dtype=np.float64)
    cdef Py_ssize_t K = split.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    buf_arr = np.empty(max(K, 1), dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef uint64_t master = <uint64_t>(int(master_seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t s
    cdef Py_ssize_t t, j, m, p
    cdef double w, own, G, T, v, x
    with nogil:
        for t in range(n):
            s = substream(master, <uint64_t>(start + t))
            m = 0
            own = 0.0
            for j in range(K):
                w = -log(unit_open(substream(s, <uint64_t>j))) * split[j]
                if j == user:
                    own = w
                    continue
                # insertion sort, ascending
                p = m
                while p > 0 and buf[p - 1] > w:
                    buf[p] = buf[p - 1]
                    p -= 1
                buf[p] = w
                m += 1
            G = own
            T = numer[0] / G if G > 0 else INFINITY
            for j in range(m):
                G = G + buf[j]
                v = numer[j + 1] / G if G > 0 else INFINITY
                if v > T:
                    T = v
            o[t] = T
    return out
