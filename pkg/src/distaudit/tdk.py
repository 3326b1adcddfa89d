"""Task Distribution Keys: bit masks that carve per-auditor subsequences out
of one shared block sequence."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

OVERLAP_MODES = ("distributed", "shared", "per-key")


@dataclass(frozen=True)
class TaskDistributionKey:
    bits: str
    owner: int = 0

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise InvalidParameterError(f"key must be a non-empty bitstring, got {self.bits!r}")
        if "1" not in self.bits:
            raise InvalidParameterError("key needs at least one set bit")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def ones(self) -> int:
        return self.bits.count("1")

    @property
    def mask(self) -> np.ndarray:
        return np.frombuffer(self.bits.encode(), dtype=np.uint8) == ord("1")


@dataclass(frozen=True)
class TDKSet:
    keys: tuple[TaskDistributionKey, ...]
    mode: str = "non-overlapping"
    overlap_pct: float = 0.0
    base_len: int = 0

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def length(self) -> int:
        return len(self.keys[0])

    @property
    def bitstrings(self) -> list[str]:
        return [k.bits for k in self.keys]


def adjust_length(length: int, seq_len: int) -> int:
    """``length`` if coprime to ``seq_len``, else the smallest coprime above it."""
    if length < 1:
        raise InvalidParameterError(f"length must be >= 1, got {length}")
    if math.gcd(length, seq_len) == 1:
        return length
    c = length + 1
    while math.gcd(c, seq_len) != 1:
        c += 1
    return c


def generate_nonoverlapping(n: int, t: int, seq_len: int | None, rng: np.random.Generator,
                            adjust: bool = True) -> TDKSet:
    """n disjoint keys with t ones each over the first n*t positions.

    With ``adjust`` the length is extended to be coprime to ``seq_len``;
    the extension positions are 0 in every key.
    """
    if n < 1 or t < 1:
        raise InvalidParameterError("n and t must be >= 1")
    base = n * t
    length = adjust_length(base, seq_len) if adjust and seq_len else base
    perm = rng.permutation(base)
    keys = []
    for i in range(n):
        row = np.zeros(length, dtype=np.uint8)
        row[perm[i * t:(i + 1) * t]] = 1
        keys.append(TaskDistributionKey("".join("1" if b else "0" for b in row), i))
    return TDKSet(tuple(keys), "non-overlapping", 0.0, base)


def generate_overlapping(base: TDKSet, overlap_pct: float, rng: np.random.Generator,
                         mode: str = "distributed") -> TDKSet:
    """Add ceil(overlap_pct * length / 100) extra ones.

    ``distributed`` hands the extra ones to keys in turn (one each for the
    four-key, 20% case); ``shared`` sets the same positions in every key;
    ``per-key`` gives every key that many extra ones of its own.  Extra ones
    only land where the key had a 0 inside the first n*t positions, so each
    one duplicates another key's coverage.
    """
    if base.mode != "non-overlapping":
        raise InvalidParameterError("base set must be non-overlapping")
    if mode not in OVERLAP_MODES:
        raise InvalidParameterError(f"overlap mode must be one of {OVERLAP_MODES}")
    if not 0 <= overlap_pct <= 100:
        raise InvalidParameterError("overlap percentage must be within [0, 100]")
    extra = math.ceil(overlap_pct * base.length / 100 - 1e-9)
    if extra == 0:
        return TDKSet(base.keys, "overlapping", overlap_pct, base.base_len)
    region = base.base_len or base.length
    rows = [k.mask.copy() for k in base.keys]
    if mode == "shared":
        if extra > region:
            raise InvalidParameterError(f"{extra} shared positions exceed key region {region}")
        for p in rng.choice(region, size=extra, replace=False):
            for r in rows:
                r[p] = True
    else:
        quota = [0] * len(rows)
        if mode == "distributed":
            for j in range(extra):
                quota[j % len(rows)] += 1
        else:
            quota = [extra] * len(rows)
        for r, k in zip(rows, quota):
            zeros = np.flatnonzero(~r[:region])
            if k > len(zeros):
                raise InvalidParameterError(f"key needs {k} extra ones but has {len(zeros)} free positions")
            r[rng.choice(zeros, size=k, replace=False)] = True
    keys = tuple(TaskDistributionKey("".join("1" if b else "0" for b in r), k.owner)
                 for r, k in zip(rows, base.keys))
    return TDKSet(keys, "overlapping", overlap_pct, base.base_len)


def selection_mask(key: TaskDistributionKey | str, length: int) -> np.ndarray:
    """Boolean mask of sequence positions the key selects (tiled from 0)."""
    if isinstance(key, str):
        key = TaskDistributionKey(key)
    return np.resize(key.mask, length)


def interpret(key: TaskDistributionKey | str, seq) -> np.ndarray:
    seq = np.asarray(seq)
    return seq[selection_mask(key, len(seq))]


def interpret_positions(key: TaskDistributionKey | str, length: int) -> np.ndarray:
    return np.flatnonzero(selection_mask(key, length))
