"""Dense polynomials over a prime field GF(q), rational interpolation and
root finding for set reconciliation.

Field elements are plain ``int`` values in ``[0, q)``.  :class:`Poly`
stores coefficients lowest degree first with no trailing zeros, so the
zero polynomial has an empty coefficient tuple.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidParameterError, NotSplittableError, ReconciliationBoundExceeded

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime strictly greater than ``n``."""
    c = max(n + 1, 2)
    while not is_prime(c):
        c += 1
    return c


class Poly:
    """Immutable polynomial over GF(q)."""

    __slots__ = ("coeffs", "q")

    def __init__(self, coeffs: Iterable[int], q: int):
        c = [int(x) % q for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs: tuple[int, ...] = tuple(c)
        self.q = q

    @classmethod
    def from_roots(cls, roots: Iterable[int], q: int) -> "Poly":
        out = cls([1], q)
        for r in roots:
            out = out * cls([-r, 1], q)
        return out

    @classmethod
    def monomial(cls, degree: int, q: int) -> "Poly":
        return cls([0] * degree + [1], q)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def is_monic(self) -> bool:
        return self.lead == 1

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        inv = pow(self.lead, -1, self.q)
        return Poly([c * inv for c in self.coeffs], self.q)

    def _check(self, other: "Poly") -> None:
        if self.q != other.q:
            raise InvalidParameterError(f"modulus mismatch: {self.q} vs {other.q}")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return Poly([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)], self.q)

    def __neg__(self) -> "Poly":
        return Poly([-c for c in self.coeffs], self.q)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        self._check(other)
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return Poly([], self.q)
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return Poly(out, self.q)

    def scale(self, k: int) -> "Poly":
        return Poly([c * k for c in self.coeffs], self.q)

    def __divmod__(self, other: "Poly") -> tuple["Poly", "Poly"]:
        self._check(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        q = self.q
        rem = list(self.coeffs)
        db = other.degree
        inv = pow(other.lead, -1, q)
        quot = [0] * max(len(rem) - db, 0)
        bc = other.coeffs
        for i in range(len(rem) - 1, db - 1, -1):
            c = rem[i] % q
            if c:
                k = c * inv % q
                quot[i - db] = k
                for j in range(db + 1):
                    rem[i - db + j] -= k * bc[j]
        return Poly(quot, q), Poly(rem[:db], q)

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Poly) and self.q == other.q and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.coeffs, self.q))

    def __call__(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % self.q
        return acc

    def derivative(self) -> "Poly":
        return Poly([i * c for i, c in enumerate(self.coeffs)][1:], self.q)

    def powmod(self, e: int, mod: "Poly") -> "Poly":
        result = Poly([1], self.q) % mod
        base = self % mod
        while e:
            if e & 1:
                result = (result * base) % mod
            base = (base * base) % mod
            e >>= 1
        return result

    def __repr__(self) -> str:
        return f"Poly({list(self.coeffs)}, q={self.q})"

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if not c:
                continue
            mono = "" if i == 0 else "Z" if i == 1 else f"Z^{i}"
            if not mono:
                terms.append(str(c))
            else:
                terms.append(mono if c == 1 else f"{c}{mono}")
        return " + ".join(terms)


def poly_gcd(f: Poly, g: Poly) -> Poly:
    """Monic gcd by the Euclidean algorithm; gcd(0, 0) is 0."""
    f._check(g)
    a, b = f, g
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def is_square_free(f: Poly) -> bool:
    if f.is_zero():
        raise InvalidParameterError("square-freeness of the zero polynomial is undefined")
    return poly_gcd(f, f.derivative()).degree == 0


def splits_into_linear(f: Poly) -> bool:
    """True when f divides Z^q - Z, i.e. every irreducible factor is linear."""
    if f.is_zero():
        raise InvalidParameterError("zero polynomial")
    if f.degree <= 1:
        return True
    z = Poly([0, 1], f.q)
    zq = z.powmod(f.q, f)
    return poly_gcd(f, zq - z) == f.monic()


def _rand_element(rng, q: int) -> int:
    if hasattr(rng, "integers") and q < (1 << 62):
        return int(rng.integers(0, q))
    if hasattr(rng, "randrange"):
        return rng.randrange(q)
    return random.Random(int(rng.integers(0, 1 << 62))).randrange(q)


def find_roots(f: Poly, rng) -> set[int]:
    """Distinct roots of a monic square-free polynomial that splits over GF(q).

    Equal-degree splitting with gcd(g, (Z - a)^((q-1)/2) - 1) for uniformly
    random ``a``; at most 64*deg(f) random draws before giving up.
    """
    if f.is_zero():
        raise InvalidParameterError("zero polynomial")
    q = f.q
    f = f.monic()
    if f.degree == 0:
        return set()
    if q == 2:
        roots = {x for x in (0, 1) if f(x) == 0}
        if len(roots) != f.degree:
            raise NotSplittableError(f"{f} does not split into distinct linear factors over GF(2)")
        return roots
    budget = 64 * f.degree
    roots: list[int] = []
    stack = [f]
    half = (q - 1) // 2
    while stack:
        g = stack.pop()
        if g.degree == 1:
            roots.append(-g.coeffs[0] % q)
            continue
        while True:
            if budget <= 0:
                raise NotSplittableError(f"could not split factor {g} (not a product of distinct linear factors?)")
            budget -= 1
            a = _rand_element(rng, q)
            r = Poly([-a, 1], q).powmod(half, g) - Poly([1], q)
            h = poly_gcd(g, r)
            if 0 < h.degree < g.degree:
                stack.append(h)
                stack.append(g // h)
                break
    if len(set(roots)) != f.degree:
        raise NotSplittableError(f"{f} has repeated roots")
    return set(roots)


def solve_mod(rows: Sequence[Sequence[int]], rhs: Sequence[int], q: int) -> list[int] | None:
    """Solve A x = b over GF(q) by Gauss-Jordan elimination.

    Pivots are the first non-zero entry in each column.  Free variables are
    set to zero.  Returns ``None`` when the system is inconsistent.
    """
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    m = [[int(x) % q for x in row] + [int(b) % q] for row, b in zip(rows, rhs)]
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        piv = next((i for i in range(r, n_rows) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], -1, q)
        m[r] = [x * inv % q for x in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c]:
                k = m[i][c]
                m[i] = [(x - k * y) % q for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    if any(row[-1] for row in m[r:]):
        return None
    x = [0] * n_cols
    for i, c in enumerate(pivots):
        x[c] = m[i][-1]
    return x


@dataclass(frozen=True)
class RationalFunction:
    numerator: Poly
    denominator: Poly

    def __call__(self, x: int) -> int:
        den = self.denominator(x)
        if den == 0:
            raise ZeroDivisionError(f"denominator vanishes at {x}")
        return self.numerator(x) * pow(den, -1, self.numerator.q) % self.numerator.q

    def __str__(self) -> str:
        return f"({self.numerator}) / ({self.denominator})"


def reduce_rational(num: Poly, den: Poly) -> RationalFunction:
    g = poly_gcd(num, den)
    return RationalFunction((num // g).monic(), (den // g).monic())


def interpolate_rational(samples: Sequence[tuple[int, int]], m_bar: int, d: int, q: int) -> RationalFunction:
    """Monic P/Q with deg P - deg Q = d agreeing with ``samples``.

    Degrees are fixed at the bounds floor((m_bar + d)/2) and
    floor((m_bar - d)/2); the linear system P(z) = f Q(z) is solved by
    elimination and the result reduced to lowest terms.
    """
    deg_p = (m_bar + d) // 2
    deg_q = deg_p - d
    if deg_p < 0 or deg_q < 0:
        raise ReconciliationBoundExceeded(f"|d|={abs(d)} exceeds m_bar={m_bar}")
    if len(samples) < deg_p + deg_q:
        raise ReconciliationBoundExceeded(f"{len(samples)} samples cannot fix {deg_p + deg_q} unknowns")
    rows, rhs = [], []
    for z, f in samples:
        z %= q
        f %= q
        zp = [pow(z, j, q) for j in range(max(deg_p, deg_q) + 1)]
        rows.append(zp[:deg_p] + [-f * zp[j] % q for j in range(deg_q)])
        rhs.append((f * zp[deg_q] - zp[deg_p]) % q)
    if deg_p + deg_q == 0:
        sol: list[int] | None = []
        if any(r % q for r in rhs):
            sol = None
    else:
        sol = solve_mod(rows, rhs, q)
    if sol is None:
        raise ReconciliationBoundExceeded("interpolation system is inconsistent; m_bar too small")
    num = Poly(sol[:deg_p] + [1], q)
    den = Poly(sol[deg_p:] + [1], q)
    rf = reduce_rational(num, den)
    for z, f in samples:
        dz = rf.denominator(z)
        if dz == 0 or rf.numerator(z) != f * dz % q:
            raise ReconciliationBoundExceeded("interpolant disagrees with a sample; m_bar too small")
    return rf
