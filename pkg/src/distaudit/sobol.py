"""One-dimensional Sobol sequences of integer block indices.

A :class:`SobolKey` fixes the primitive polynomial, the free initial
direction integers, SKIP/LEAP, the power-of-two block count and the
sequence length.  Points are held as integer numerators over ``2**WORD_BITS``
so scaling to block indices is a right shift and never rounds.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import InvalidKeyError, InvalidParameterError

WORD_BITS = 52
MAX_DEGREE = 32


# -- GF(2)[x] helpers; polynomials are ints with bit i = coefficient of x^i --

def _gf2_mulmod(a: int, b: int, mod: int, deg: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= mod
    return r


def _gf2_powmod(base: int, e: int, mod: int, deg: int) -> int:
    r = 1
    while e:
        if e & 1:
            r = _gf2_mulmod(r, base, mod, deg)
        base = _gf2_mulmod(base, base, mod, deg)
        e >>= 1
    return r


def _prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out.append(n)
    return out


def _totient(n: int) -> int:
    result = n
    for p in _prime_factors(n):
        result -= result // p
    return result


@dataclass(frozen=True, order=True)
class PrimitivePolynomial:
    """Primitive polynomial over GF(2), stored as its coefficient bit pattern.

    ``bits`` has bit ``i`` set when the coefficient of ``x**i`` is one, so
    ``x^3 + x + 1`` is ``0b1011``.
    """

    bits: int

    @property
    def degree(self) -> int:
        return self.bits.bit_length() - 1

    @property
    def coefficients(self) -> tuple[int, ...]:
        """``(a_1, ..., a_{d-1})``: ``a_j`` multiplies ``x**(d - j)``."""
        d = self.degree
        return tuple((self.bits >> (d - j)) & 1 for j in range(1, d))

    @classmethod
    def from_coefficients(cls, degree: int, coefficients: Sequence[int]) -> "PrimitivePolynomial":
        if len(coefficients) != degree - 1:
            raise InvalidParameterError(
                f"degree {degree} needs {degree - 1} middle coefficients, got {len(coefficients)}")
        bits = (1 << degree) | 1
        for j, a in enumerate(coefficients, start=1):
            if a not in (0, 1):
                raise InvalidParameterError("coefficients must be 0 or 1")
            bits |= a << (degree - j)
        poly = cls(bits)
        if not is_primitive(bits):
            raise InvalidParameterError(f"{poly} is not primitive")
        return poly

    def __str__(self) -> str:
        terms = []
        for i in range(self.degree, -1, -1):
            if self.bits >> i & 1:
                terms.append("1" if i == 0 else "x" if i == 1 else f"x^{i}")
        return " + ".join(terms)


def is_primitive(bits: int) -> bool:
    """True when x has multiplicative order 2^d - 1 modulo the polynomial."""
    d = bits.bit_length() - 1
    if d < 1 or not bits & 1:
        return False
    order = (1 << d) - 1
    x = 0b10 if d > 1 else 0b10 ^ bits  # x reduced mod P
    if _gf2_powmod(x, order, bits, d) != 1:
        return False
    return all(_gf2_powmod(x, order // r, bits, d) != 1 for r in _prime_factors(order))


def count_primitive_polynomials(d: int) -> int:
    _check_degree(d)
    return _totient((1 << d) - 1) // d


def _check_degree(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= MAX_DEGREE:
        raise InvalidParameterError(f"degree must be in [1, {MAX_DEGREE}], got {d!r}")


def iter_primitive_polynomials(d: int) -> Iterator[PrimitivePolynomial]:
    """Primitive polynomials of degree ``d`` in ascending bit-pattern order."""
    _check_degree(d)
    top = (1 << d) | 1
    for mid in range(1 << max(d - 1, 0)):
        bits = top | (mid << 1)
        if is_primitive(bits):
            yield PrimitivePolynomial(bits)


@lru_cache(maxsize=64)
def _primitive_table(d: int) -> tuple[PrimitivePolynomial, ...]:
    return tuple(iter_primitive_polynomials(d))


def enumerate_primitive_polynomials(d: int) -> list[PrimitivePolynomial]:
    """All primitive polynomials of degree ``d``.

    The count is phi(2^d - 1)/d.  The search is exhaustive over 2^(d-1)
    candidates, so degrees above ~24 take a long time; use
    :func:`iter_primitive_polynomials` to stream them.
    """
    return list(_primitive_table(d))


def primitive_polynomial(d: int, index: int) -> PrimitivePolynomial:
    table = _primitive_table(d)
    if not 0 <= index < len(table):
        raise InvalidParameterError(f"poly index {index} out of range for degree {d} ({len(table)} polys)")
    return table[index]


@dataclass(frozen=True)
class SobolKey:
    """Sobol random key <P, m_i, SKIP, LEAP, CONSTANT, SeqLen>.

    ``skip`` points are discarded first, then ``leap`` points are dropped
    between consecutive kept points.  ``constant`` is the block count.
    """

    poly: PrimitivePolynomial
    init_m: tuple[int, ...]
    constant: int
    seq_len: int
    skip: int = 0
    leap: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init_m", tuple(int(m) for m in self.init_m))
        d = self.poly.degree
        if len(self.init_m) != d:
            raise InvalidKeyError(f"need {d} initial direction integers, got {len(self.init_m)}")
        for i, m in enumerate(self.init_m, start=1):
            if m % 2 == 0 or not 0 < m < (1 << i):
                raise InvalidKeyError(f"m_{i}={m} must be odd and in (0, 2^{i})")
        c = self.constant
        if c < 1 or c & (c - 1) or c > (1 << WORD_BITS):
            raise InvalidKeyError(f"constant must be a power of two <= 2^{WORD_BITS}, got {c}")
        if self.seq_len < 1 or self.skip < 0 or self.leap < 0:
            raise InvalidKeyError("seq_len must be positive; skip and leap non-negative")
        if self.skip == 0 and self.leap == 0 and self.seq_len > c:
            raise InvalidKeyError(f"seq_len {self.seq_len} exceeds constant {c}; indices would repeat")
        if self.last_point_index >= (1 << WORD_BITS) - 1:
            raise InvalidKeyError(f"key needs more than {WORD_BITS} direction bits")

    @property
    def last_point_index(self) -> int:
        return self.skip + (self.seq_len - 1) * (self.leap + 1)

    @property
    def scale_shift(self) -> int:
        return WORD_BITS - (self.constant.bit_length() - 1)


def direction_integers(poly: PrimitivePolynomial, init_m: Sequence[int], count: int) -> list[int]:
    """m_1..m_count from the XOR recurrence seeded with ``init_m``."""
    d = poly.degree
    a = poly.coefficients
    m = [int(x) for x in init_m[:count]]
    for i in range(d, count):
        new = m[i - d] ^ (m[i - d] << d)
        for k in range(1, d):
            if a[k - 1]:
                new ^= m[i - k] << k
        m.append(new)
    return m


def direction_numbers(key: SobolKey, count: int) -> list[tuple[int, Fraction]]:
    """Pairs ``(m_i, v_i)`` with ``v_i = m_i / 2**i`` for i = 1..count."""
    if count < key.poly.degree:
        raise InvalidParameterError(f"count must be >= degree {key.poly.degree}")
    ms = direction_integers(key.poly, key.init_m, count)
    return [(m, Fraction(m, 1 << i)) for i, m in enumerate(ms, start=1)]


def direction_words(key: SobolKey) -> np.ndarray:
    """v_i as WORD_BITS-bit integer numerators, i = 1..WORD_BITS."""
    ms = direction_integers(key.poly, key.init_m, WORD_BITS)
    return np.array([m << (WORD_BITS - i) for i, m in enumerate(ms, start=1)], dtype=np.uint64)


def generate(key: SobolKey) -> np.ndarray:
    """Block indices for ``key`` by Gray-code stepping (int64 array)."""
    pts = kernels.sobol_points(direction_words(key), key.skip, key.seq_len,
                               key.leap + 1, key.scale_shift)
    return np.asarray(pts).astype(np.int64)


def gray_code_points(key: SobolKey, ns) -> np.ndarray:
    """Unscaled numerators x^n for the given point numbers, formed directly as
    the XOR of v_i over the set bits of the Gray code of n."""
    ns = np.asarray(ns, dtype=np.uint64)
    g = ns ^ (ns >> np.uint64(1))
    v = direction_words(key)
    x = np.zeros_like(ns)
    for b in range(WORD_BITS):
        bit = (g >> np.uint64(b)) & np.uint64(1)
        x ^= bit * v[b]
    return x


def stepped_points(key: SobolKey, count: int) -> list[int]:
    """Unscaled numerators x^0..x^(count-1) by x^(n+1) = x^n xor v_c."""
    v = [int(t) for t in direction_words(key)]
    x, out = 0, []
    for n in range(count):
        out.append(x)
        x ^= v[((~n) & (n + 1)).bit_length() - 1]
    return out


def random_key(rng: np.random.Generator, degree: int, constant: int, seq_len: int,
               skip: int = 0, leap: int = 0) -> SobolKey:
    """Uniformly chosen primitive polynomial and odd initial integers."""
    polys = _primitive_table(degree)
    poly = polys[int(rng.integers(len(polys)))]
    init = tuple(2 * int(rng.integers(0, 1 << (i - 1))) + 1 for i in range(1, degree + 1))
    return SobolKey(poly, init, constant, seq_len, skip, leap)


# -- bitstring form of a key, used as the common string in TDK distribution --

def _field(value: int, width_bits: int = 6) -> str:
    n = value.bit_length()
    return format(n, f"0{width_bits}b") + (format(value, "b") if n else "")


def key_to_bits(key: SobolKey) -> str:
    d = key.poly.degree
    parts = [format(d, "06b"), "".join(str(a) for a in key.poly.coefficients)]
    parts += [format(m, f"0{i}b") for i, m in enumerate(key.init_m, start=1)]
    parts += [format(key.constant.bit_length() - 1, "06b"),
              _field(key.seq_len), _field(key.skip), _field(key.leap)]
    return "".join(parts)


def key_from_bits(bits: str) -> SobolKey:
    pos = 0

    def take(n: int) -> int:
        nonlocal pos
        chunk = bits[pos:pos + n]
        if len(chunk) != n:
            raise InvalidKeyError("truncated key bitstring")
        pos += n
        return int(chunk, 2) if n else 0

    def field() -> int:
        return take(take(6))

    d = take(6)
    coeffs = [take(1) for _ in range(d - 1)]
    init = tuple(take(i) for i in range(1, d + 1))
    constant = 1 << take(6)
    seq_len, skip, leap = field(), field(), field()
    if pos != len(bits):
        raise InvalidKeyError("trailing bits after key")
    poly = PrimitivePolynomial.from_coefficients(d, coeffs)
    return SobolKey(poly, init, constant, seq_len, skip, leap)
