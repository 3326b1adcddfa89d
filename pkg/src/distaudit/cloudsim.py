"""Simulated cloud storage: generated block contents, a metadata digest
table, corruption injection and a proof server.

Block contents are never materialised in bulk.  Block ``i`` is a pure
function of the store key (see ``_kernels_py``), so the store only keeps a
per-block corruption flag and proofs are digests of freshly generated bytes.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import Section
from .errors import InvalidChallengeError, InvalidParameterError, LifecycleError

_BLOCK_CHUNK = 1 << 18


def _store_key(seed: int) -> int:
    return int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint64)[0])


class BlockStore:
    """N blocks of ``block_size`` bytes; read-mostly once sealed."""

    def __init__(self, block_count: int, block_size: int, seed: int):
        if block_count < 1 or block_count & (block_count - 1):
            raise InvalidParameterError(f"block count must be a power of two, got {block_count}")
        if block_size < 8 or block_size % 8:
            raise InvalidParameterError(f"block size must be a positive multiple of 8, got {block_size}")
        self.block_count = block_count
        self.block_size = block_size
        self.seed = seed
        self.key = _store_key(seed)
        self._flip = np.zeros(block_count, dtype=np.uint8)
        self.sealed = False

    @property
    def words(self) -> int:
        return self.block_size // 8

    @property
    def corrupted(self) -> set[int]:
        return set(np.flatnonzero(self._flip).tolist())

    def seal(self) -> None:
        self.sealed = True

    def clone_clean(self) -> "BlockStore":
        return BlockStore(self.block_count, self.block_size, self.seed)

    def block_bytes(self, index: int) -> bytes:
        self._check([index])
        w = [kernels.mix64(self.key + (index * self.words + k + 1) * kernels.python_backend.GOLDEN)
             for k in range(self.words)]
        raw = bytearray(b"".join(x.to_bytes(8, "little") for x in w))
        if self._flip[index]:
            raw[0] ^= 0xFF
        return bytes(raw)

    def _check(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.block_count):
            bad = idx[(idx < 0) | (idx >= self.block_count)][0]
            raise InvalidChallengeError(f"block index {int(bad)} outside [0, {self.block_count})")
        return idx

    def digests(self, indices) -> np.ndarray:
        idx = self._check(indices)
        return kernels.block_digests(self.key, idx.astype(np.uint64), self.words, self._flip[idx])


@dataclass
class MetadataTable:
    """Digest of every block, taken at provisioning time."""

    digests: np.ndarray

    def __len__(self) -> int:
        return int(self.digests.shape[0])

    def slice(self, indices) -> np.ndarray:
        return self.digests[np.asarray(indices, dtype=np.int64)]


def provision(block_count: int, block_size: int, seed: int) -> tuple[BlockStore, MetadataTable]:
    store = BlockStore(block_count, block_size, seed)
    out = np.empty(block_count, dtype=np.uint64)
    zeros = np.zeros(min(block_count, _BLOCK_CHUNK), dtype=np.uint8)
    for lo in range(0, block_count, _BLOCK_CHUNK):
        idx = np.arange(lo, min(lo + _BLOCK_CHUNK, block_count), dtype=np.uint64)
        out[lo:lo + idx.size] = kernels.block_digests(store.key, idx, store.words, zeros[:idx.size])
    return store, MetadataTable(out)


@dataclass(frozen=True)
class CorruptionPlan:
    """How many blocks to corrupt and where.

    ``fraction`` resolves to floor(fraction * N).  The ``runs`` pattern
    places non-overlapping runs of ``run_length`` consecutive blocks at
    uniformly random offsets, shortening the last run to hit the count.
    """

    count: int | None = None
    fraction: float | None = None
    pattern: str = "random"
    run_length: int = 16
    seed: int = 0

    def __post_init__(self):
        if (self.count is None) == (self.fraction is None):
            raise InvalidParameterError("give exactly one of count or fraction")
        if self.count is not None and self.count < 0:
            raise InvalidParameterError("count must be non-negative")
        if self.fraction is not None and not 0 <= self.fraction <= 1:
            raise InvalidParameterError("fraction must be within [0, 1]")
        if self.pattern not in ("random", "runs"):
            raise InvalidParameterError(f"pattern must be 'random' or 'runs', got {self.pattern!r}")
        if self.run_length < 1:
            raise InvalidParameterError("run length must be positive")

    def resolve(self, block_count: int) -> int:
        if self.count is not None:
            return self.count
        # tolerate binary rounding so that e.g. 0.01 * 2^20 gives 10485
        return int(np.floor(self.fraction * block_count + 1e-9))

    def indices(self, block_count: int) -> np.ndarray:
        k = self.resolve(block_count)
        if k > block_count:
            raise InvalidParameterError(f"cannot corrupt {k} of {block_count} blocks")
        rng = np.random.default_rng(self.seed)
        if k == 0:
            return np.empty(0, dtype=np.int64)
        if self.pattern == "random":
            return np.sort(rng.choice(block_count, size=k, replace=False)).astype(np.int64)
        L = self.run_length
        runs = -(-k // L)
        slack = block_count - runs * L + runs
        if slack < runs:
            raise InvalidParameterError(f"{runs} runs of {L} do not fit in {block_count} blocks")
        starts = np.sort(rng.choice(slack, size=runs, replace=False)) + np.arange(runs) * (L - 1)
        lengths = np.full(runs, L)
        lengths[-1] = k - (runs - 1) * L
        return np.concatenate([np.arange(s, s + n) for s, n in zip(starts, lengths)]).astype(np.int64)


def inject_errors(store: BlockStore, plan: CorruptionPlan) -> set[int]:
    if store.sealed:
        raise LifecycleError("store is sealed; inject errors before auditing starts")
    idx = plan.indices(store.block_count)
    store._flip[idx] = 1
    return set(idx.tolist())


def serve_proof(store: BlockStore, challenge) -> np.ndarray:
    """Digest of the current content of every challenged block, in order."""
    return store.digests(challenge)


class ServerPool:
    """Replicas behind one dispatcher; any replica may answer a challenge.

    All replicas read the same store.  ``jitter`` is a (low, high) latency
    range in seconds drawn per request; ``sleep`` makes it real.
    """

    def __init__(self, store: BlockStore, replicas: int = 1, jitter: tuple[float, float] = (0.0, 0.0),
                 seed: int = 0, sleep: bool = False):
        if replicas < 1:
            raise InvalidParameterError("need at least one replica")
        self.store = store
        self.replicas = replicas
        self.jitter = jitter
        self.sleep = sleep
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self.log: list[tuple[int, int, float]] = []

    def serve(self, challenge) -> np.ndarray:
        with self._lock:
            replica = int(self._rng.integers(self.replicas))
            lo, hi = self.jitter
            delay = float(self._rng.uniform(lo, hi)) if hi > lo else lo
            self.log.append((replica, len(challenge), delay))
        if self.sleep and delay > 0:
            time.sleep(delay)
        return serve_proof(self.store, challenge)


@dataclass(frozen=True)
class ScenarioConfig:
    """Store shape plus the corruption plan template; per-trial error seeds
    are derived from ``error_seed`` and the trial number."""

    blocks: int
    block_size: int = 256
    seed: int = 0
    error_count: int | None = None
    error_fraction: float | None = 0.01
    pattern: str = "random"
    run_length: int = 16
    error_seed: int = 0

    def plan(self, trial: int = 0) -> CorruptionPlan:
        seed = int(np.random.SeedSequence([self.error_seed, trial]).generate_state(1)[0])
        return CorruptionPlan(self.error_count, None if self.error_count is not None else self.error_fraction,
                              self.pattern, self.run_length, seed)

    @classmethod
    def from_section(cls, sec: Section) -> "ScenarioConfig":
        sec.check_keys({"blocks", "block_size", "seed", "error"})
        blocks = sec.get("blocks", int, required=True, lo=1)
        if blocks & (blocks - 1):
            raise sec.error("blocks", f"must be a power of two, got {blocks}")
        size = sec.get("block_size", int, 256, lo=8)
        if size % 8:
            raise sec.error("block_size", "must be a multiple of 8")
        err = sec.section("error")
        err.check_keys({"fraction", "count", "pattern", "run_length", "seed"})
        if err.has("fraction") and err.has("count"):
            raise err.error("count", "give either fraction or count, not both")
        count = err.get("count", int, None, lo=0, hi=blocks)
        fraction = None if count is not None else err.get("fraction", float, 0.01, lo=0.0, hi=1.0)
        return cls(blocks, size, sec.get("seed", int, 0),
                   count, fraction,
                   err.get("pattern", str, "random", choices={"random", "runs"}),
                   err.get("run_length", int, 16, lo=1),
                   err.get("seed", int, 0))


@dataclass
class Scenario:
    """A provisioned, corrupted and sealed store ready for auditing."""

    store: BlockStore
    metadata: MetadataTable
    corrupted: set[int] = field(default_factory=set)

    @property
    def block_count(self) -> int:
        return self.store.block_count


_METADATA_CACHE: dict[tuple[int, int, int], tuple[BlockStore, MetadataTable]] = {}


def build_scenario(cfg: ScenarioConfig, trial: int = 0) -> Scenario:
    """Provision (metadata cached per store shape and seed), inject the
    trial's errors and seal."""
    k = (cfg.blocks, cfg.block_size, cfg.seed)
    if k not in _METADATA_CACHE:
        _METADATA_CACHE.clear()
        _METADATA_CACHE[k] = provision(*k)
    base, meta = _METADATA_CACHE[k]
    store = base.clone_clean()
    bad = inject_errors(store, cfg.plan(trial))
    store.seal()
    return Scenario(store, meta, bad)
