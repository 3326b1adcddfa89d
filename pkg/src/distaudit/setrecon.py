"""Set reconciliation by characteristic-polynomial evaluation (CPIsync).

Each party evaluates chi_S(Z) = prod (Z - s) at ``m_bar`` agreed points and
sends the values together with |S|.  The receiver interpolates the ratio
remote/local as a reduced rational function whose numerator roots are the
elements only the remote side has and whose denominator roots are the
elements only the local side has.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import (InvalidInputError, InvalidParameterError, NotSplittableError,
                     ReconciliationBoundExceeded)
from .gf import Poly, find_roots, interpolate_rational, is_prime, is_square_free, next_prime, splits_into_linear


@dataclass(frozen=True)
class ReconConfig:
    """Shared reconciliation parameters.

    ``eval_points`` default to -1, -2, ..., -m_bar; they are kept as given
    and reduced mod q only for arithmetic.
    """

    m_bar: int
    q: int
    eval_points: tuple[int, ...] = ()

    def __post_init__(self):
        if self.m_bar < 1:
            raise InvalidParameterError(f"m_bar must be positive, got {self.m_bar}")
        if not is_prime(self.q):
            raise InvalidParameterError(f"q={self.q} is not prime")
        pts = self.eval_points or tuple(-k for k in range(1, self.m_bar + 1))
        pts = tuple(int(p) for p in pts)
        if len(pts) != self.m_bar:
            raise InvalidParameterError(f"need {self.m_bar} evaluation points, got {len(pts)}")
        if len({p % self.q for p in pts}) != len(pts):
            raise InvalidParameterError("evaluation points must be distinct")
        if self.m_bar >= self.q:
            raise InvalidParameterError("m_bar must be smaller than q")
        object.__setattr__(self, "eval_points", pts)

    @classmethod
    def for_bits(cls, b: int, m_bar: int) -> "ReconConfig":
        """Smallest prime q > 2^b + m_bar, so elements of b bits never meet
        the default evaluation points."""
        return cls(m_bar, next_prime((1 << b) + m_bar))

    def check_elements(self, elements: Iterable[int]) -> None:
        pts = {p % self.q for p in self.eval_points}
        for s in elements:
            if not 0 <= s < self.q:
                raise InvalidParameterError(f"element {s} outside [0, {self.q})")
            if s in pts:
                raise InvalidParameterError(f"element {s} coincides with an evaluation point")


@dataclass(frozen=True)
class CharPolyEvaluations:
    """One reconciliation message: m_bar (point, value) pairs and |S|."""

    pairs: tuple[tuple[int, int], ...]
    cardinality: int

    def to_json(self) -> str:
        return json.dumps({"cardinality": self.cardinality,
                           "pairs": [list(p) for p in self.pairs]}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "CharPolyEvaluations":
        obj = json.loads(text)
        return cls(tuple((int(a), int(b)) for a, b in obj["pairs"]), int(obj["cardinality"]))

    def to_bytes(self) -> bytes:
        # u32 cardinality, u32 pair count, then (i64 point, u64 value) pairs, little-endian
        out = [struct.pack("<II", self.cardinality, len(self.pairs))]
        out += [struct.pack("<qQ", p, v) for p, v in self.pairs]
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CharPolyEvaluations":
        if len(data) < 8:
            raise InvalidInputError("truncated reconciliation message")
        card, n = struct.unpack_from("<II", data, 0)
        if len(data) != 8 + 16 * n:
            raise InvalidInputError("reconciliation message length does not match pair count")
        pairs = tuple(struct.unpack_from("<qQ", data, 8 + 16 * i) for i in range(n))
        return cls(pairs, card)


def char_poly_eval(elements: Iterable[int], config: ReconConfig) -> CharPolyEvaluations:
    s = sorted(set(int(x) for x in elements))
    config.check_elements(s)
    q = config.q
    pairs = []
    for z in config.eval_points:
        acc = 1
        for x in s:
            acc = acc * (z - x) % q
        pairs.append((z, acc))
    return CharPolyEvaluations(tuple(pairs), len(s))


def _roots(f: Poly, rng) -> set[int]:
    if f.degree <= 0:
        return set()
    if not is_square_free(f) or not splits_into_linear(f):
        raise ReconciliationBoundExceeded(f"factor {f} does not split into distinct roots; m_bar too small")
    try:
        return find_roots(f, rng)
    except NotSplittableError as exc:
        raise ReconciliationBoundExceeded(str(exc)) from exc


def reconcile(local: Iterable[int], remote: CharPolyEvaluations, config: ReconConfig,
              rng=None) -> tuple[set[int], set[int]]:
    """Return ``(only_remote, only_local)``.

    Raises :class:`ReconciliationBoundExceeded` when the recovered difference
    is inconsistent, which is how a difference larger than ``m_bar`` shows up.
    """
    local = set(int(x) for x in local)
    mine = char_poly_eval(local, config)
    q = config.q
    if len(remote.pairs) != config.m_bar:
        raise InvalidInputError(f"expected {config.m_bar} evaluation pairs, got {len(remote.pairs)}")
    rng = rng if rng is not None else np.random.default_rng(0)
    mine_at = {z % q: v for z, v in mine.pairs}
    samples = []
    for z, v in remote.pairs:
        z %= q
        if z not in mine_at:
            raise InvalidInputError(f"evaluation point {z} not in the shared configuration")
        samples.append((z, v * pow(mine_at[z], -1, q) % q))
    d = remote.cardinality - len(local)
    if abs(d) > config.m_bar:
        raise ReconciliationBoundExceeded(f"cardinality difference {abs(d)} exceeds m_bar={config.m_bar}")
    rf = interpolate_rational(samples, config.m_bar, d, q)
    only_remote = _roots(rf.numerator, rng)
    only_local = _roots(rf.denominator, rng)
    if not only_local <= local or only_remote & local:
        raise ReconciliationBoundExceeded("recovered difference contradicts the local set; m_bar too small")
    if len(local) - len(only_local) + len(only_remote) != remote.cardinality:
        raise ReconciliationBoundExceeded("recovered difference contradicts the remote cardinality")
    return only_remote, only_local


def union_after_reconcile(local: Iterable[int], only_remote: Iterable[int], only_local: Iterable[int]) -> set[int]:
    """The remote party's set, rebuilt from the local set and the difference."""
    return (set(local) - set(only_local)) | set(only_remote)


def reconcile_adaptive(local: Iterable[int], remote_set: Iterable[int], config: ReconConfig,
                       max_m_bar: int | None = None, rng=None) -> tuple[set[int], set[int], ReconConfig]:
    """Retry with doubled m_bar until reconciliation succeeds.

    Needs the remote set to recompute evaluations, so it is a simulation
    helper; the protocol itself never retries implicitly.
    """
    local = set(local)
    remote_set = set(remote_set)
    cfg = config
    limit = max_m_bar or config.q - 1
    while True:
        try:
            a, b = reconcile(local, char_poly_eval(remote_set, cfg), cfg, rng)
            return a, b, cfg
        except ReconciliationBoundExceeded:
            if cfg.m_bar >= limit:
                raise
            cfg = ReconConfig(min(2 * cfg.m_bar, limit), cfg.q)
