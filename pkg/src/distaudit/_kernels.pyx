# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Sobol Gray-code stepping and block digesting.

Semantics are defined by ``_kernels_py``; both must agree bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, uint8_t

cnp.import_array()

DEF GOLDEN = 0x9E3779B97F4A7C15
DEF FNV_OFFSET = 0xCBF29CE484222325
DEF FNV_PRIME = 0x100000001B3

BACKEND = "cython"


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline int _rightmost_zero(uint64_t n) nogil:
    cdef int c = 0
    while n & 1:
        n >>= 1
        c += 1
    return c


def sobol_points(const uint64_t[:] v, uint64_t first, Py_ssize_t count,
                 uint64_t stride, int shift):
    """Scaled Sobol points for n = first, first+stride, ... (count of them)."""
    out = np.empty(count, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef uint64_t x = 0
    cdef uint64_t g = first ^ (first >> 1)
    cdef int b = 0
    cdef Py_ssize_t j
    cdef uint64_t s, n = first
    with nogil:
        while g:
            if g & 1:
                x ^= v[b]
            g >>= 1
            b += 1
        for j in range(count):
            o[j] = x >> shift
            if j + 1 == count:
                break
            for s in range(stride):
                x ^= v[_rightmost_zero(n)]
                n += 1
    return out


def block_digests(uint64_t key, const uint64_t[:] indices, Py_ssize_t words,
                  const uint8_t[:] flip):
    """FNV-1a/64 digest of each generated block, first byte inverted where flip."""
    cdef Py_ssize_t m = indices.shape[0]
    out = np.empty(m, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef Py_ssize_t j, k
    cdef int byte_i
    cdef uint64_t h, w, base
    cdef uint8_t byte
    with nogil:
        for j in range(m):
            h = FNV_OFFSET
            base = indices[j] * <uint64_t>words
            for k in range(words):
                w = _mix64(key + (base + <uint64_t>k + 1) * <uint64_t>GOLDEN)
                for byte_i in range(8):
                    byte = <uint8_t>((w >> (8 * byte_i)) & 0xFF)
                    if k == 0 and byte_i == 0 and flip[j]:
                        byte = byte ^ 0xFF
                    h = (h ^ byte) * <uint64_t>FNV_PRIME
            o[j] = h
    return out
