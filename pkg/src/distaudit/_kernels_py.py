"""Pure-Python/NumPy reference for the compiled kernels.

Block content model: block ``i`` of a store keyed by ``key`` consists of
``words`` 64-bit little-endian words, word ``k`` being
``mix64(key + (i * words + k + 1) * GOLDEN)`` (SplitMix64 finaliser).
A corrupted block has its first byte inverted.  The digest is FNV-1a/64
over the block bytes; every FNV step is a bijection in the running hash,
so one changed byte always changes the digest.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_CHUNK = 1 << 15


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def sobol_points(v, first: int, count: int, stride: int, shift: int) -> np.ndarray:
    """Scaled Sobol points for n = first, first+stride, ... (count of them).

    The first point is formed directly from the Gray code of ``first``;
    every later point is reached by single Gray-code steps.
    """
    v = [int(t) for t in v]
    x = 0
    g = first ^ (first >> 1)
    b = 0
    while g:
        if g & 1:
            x ^= v[b]
        g >>= 1
        b += 1
    out = np.empty(count, dtype=np.uint64)
    n = first
    for j in range(count):
        out[j] = x >> shift
        if j + 1 == count:
            break
        for _ in range(stride):
            # position of the rightmost zero bit of n
            x ^= v[((~n) & (n + 1)).bit_length() - 1]
            n += 1
    return out


def block_digest(key: int, index: int, words: int, flip: bool = False) -> int:
    """Scalar digest of one block; the spelled-out form of the model."""
    h = FNV_OFFSET
    for k in range(words):
        w = mix64(key + (index * words + k + 1) * GOLDEN)
        for byte_i in range(8):
            byte = (w >> (8 * byte_i)) & 0xFF
            if k == 0 and byte_i == 0 and flip:
                byte ^= 0xFF
            h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def block_digests(key: int, indices, words: int, flip) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.uint64)
    flip = np.asarray(flip, dtype=np.uint8)
    out = np.empty(indices.shape[0], dtype=np.uint64)
    k64 = np.uint64(key & MASK64)
    gold = np.uint64(GOLDEN)
    prime = np.uint64(FNV_PRIME)
    mask = np.uint64(0xFF)
    with np.errstate(over="ignore"):
        for lo in range(0, indices.shape[0], _CHUNK):
            idx = indices[lo:lo + _CHUNK]
            fl = flip[lo:lo + _CHUNK].astype(np.uint64) * mask
            h = np.full(idx.shape[0], FNV_OFFSET, dtype=np.uint64)
            base = idx * np.uint64(words)
            for k in range(words):
                w = _mix64_np(k64 + (base + np.uint64(k + 1)) * gold)
                for byte_i in range(8):
                    byte = (w >> np.uint64(8 * byte_i)) & mask
                    if k == 0 and byte_i == 0:
                        byte = byte ^ fl
                    h = (h ^ byte) * prime
            out[lo:lo + _CHUNK] = h
    return out
