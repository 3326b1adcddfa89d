"""Coordinator and SUBTPA agents for the four audit protocols.

Every agent owns a subsequence of block numbers, splits it into ten
packets, and sends one packet at a time: the next packet goes out only
after the previous proof has been verified against the metadata table.
A mismatching packet produces a FALSE signal to the coordinator.

Agents are stepped in rounds (packet k of every agent forms round k).  In
``sequential`` mode agents run in id order within a round.  In
``concurrent`` mode all agents of a round compute their packet on a thread
pool and the results are committed in id order, so the two modes produce
identical outcomes, including where a threshold stop cuts a round short.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import sobol, strrecon
from .cloudsim import Scenario, ServerPool
from .errors import InvalidParameterError, LifecycleError, ProtocolError
from .tdk import TDKSet, TaskDistributionKey, adjust_length, selection_mask

PACKETS = 10
STOP_POLICIES = ("run-to-completion", "stop-on-m")


@dataclass(frozen=True)
class ThresholdConfig:
    """(m, n) threshold: with ``stop-on-m`` the coordinator halts every agent
    once m distinct agents have signalled."""

    n: int
    m: int
    policy: str = "run-to-completion"

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.m <= self.n:
            raise InvalidParameterError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.policy not in STOP_POLICIES:
            raise InvalidParameterError(f"stop policy must be one of {STOP_POLICIES}")


@dataclass
class Challenge:
    subtpa_id: int
    packet_index: int
    indices: np.ndarray


@dataclass(frozen=True)
class Signal:
    """A FALSE report; ``errors`` lists the confirmed corrupt blocks."""

    subtpa_id: int
    packet_index: int
    errors: tuple[int, ...]
    status: bool = False

    @property
    def low(self) -> int:
        return min(self.errors)

    @property
    def high(self) -> int:
        return max(self.errors)


@dataclass
class PacketRecord:
    packet: int
    checked: int = 0
    mismatches: int = 0
    follow_up_checked: int = 0
    signals: int = 0

    @property
    def report(self) -> bool:
        return self.mismatches == 0


@dataclass
class AgentReport:
    subtpa_id: int
    sub_size: int
    positions: np.ndarray
    packets: list[PacketRecord] = field(default_factory=list)
    detected: list[int] = field(default_factory=list)
    challenged: list[np.ndarray] = field(default_factory=list)
    fallback: bool = False

    @property
    def report(self) -> list[bool]:
        return [p.report for p in self.packets]

    @property
    def detected_count(self) -> int:
        return len(self.detected)

    @property
    def first_error_packet(self) -> int | None:
        return next((p.packet for p in self.packets if p.mismatches), None)

    @property
    def challenged_blocks(self) -> np.ndarray:
        if not self.challenged:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.challenged)


@dataclass
class AuditOutcome:
    protocol: int
    agents: list[AgentReport]
    signals: list[Signal]
    stop_reason: str
    corrupted: set[int]
    sample_len: int
    challenges_issued: int
    trial: int = 0

    @property
    def total_detected(self) -> int:
        return sum(a.detected_count for a in self.agents)

    @property
    def detected_set(self) -> set[int]:
        return {b for a in self.agents for b in a.detected}

    @property
    def blocks_checked(self) -> int:
        return sum(p.checked + p.follow_up_checked for a in self.agents for p in a.packets)

    @property
    def sub_sizes(self) -> list[int]:
        return [a.sub_size for a in self.agents]

    @property
    def signalled_agents(self) -> set[int]:
        return {s.subtpa_id for s in self.signals}

    def ground_truth_check(self) -> tuple[set[int], set[int]]:
        """(missed, false_alarms) relative to the injected corruption."""
        challenged = set()
        for a in self.agents:
            challenged.update(a.challenged_blocks.tolist())
        return (challenged & self.corrupted) - self.detected_set, self.detected_set - self.corrupted

    def report_rows(self) -> list[dict]:
        rows = []
        for a in self.agents:
            fe = a.first_error_packet
            for p in a.packets:
                rows.append({"trial": self.trial, "subtpa": a.subtpa_id, "packet": p.packet,
                             "checked": p.checked + p.follow_up_checked, "mismatches": p.mismatches,
                             "first_error_packet": "" if fe is None else fe, "signals": p.signals})
        return rows


def partition_sequence(seq, n: int) -> list[np.ndarray]:
    """Contiguous parts of size floor(len/n); the last part takes the remainder."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    seq = np.asarray(seq)
    size = len(seq) // n
    cuts = [i * size for i in range(n)] + [len(seq)]
    return [seq[cuts[i]:cuts[i + 1]] for i in range(n)]


def packet_bounds(size: int) -> list[tuple[int, int]]:
    if size == 0:
        return []
    if size < PACKETS:
        return [(0, size)]
    step = size // PACKETS
    return [(k * step, (k + 1) * step if k < PACKETS - 1 else size) for k in range(PACKETS)]


def chunk(sub, subtpa_id: int = 0) -> list[Challenge]:
    """Ten packets of floor(|sub|/10) blocks, the tenth taking the remainder;
    fewer than ten blocks go out as one packet."""
    sub = np.asarray(sub)
    return [Challenge(subtpa_id, k + 1, sub[lo:hi]) for k, (lo, hi) in enumerate(packet_bounds(len(sub)))]


def verify_proof(proof, metadata_slice) -> np.ndarray:
    proof = np.asarray(proof)
    meta = np.asarray(metadata_slice)
    if proof.shape != meta.shape:
        raise ProtocolError(f"proof length {proof.shape} does not match metadata {meta.shape}")
    return proof == meta


# -- agents ------------------------------------------------------------------------

@dataclass
class _StepResult:
    packet: int
    checked_pos: np.ndarray
    follow_pos: np.ndarray
    errors: np.ndarray
    signals: list[Signal]
    challenges: int


class SubTPA:
    def __init__(self, sid: int, sub: np.ndarray, positions: np.ndarray, near_range: int | None = None):
        self.id = sid
        self.sub = np.asarray(sub, dtype=np.int64)
        self.bounds = packet_bounds(len(self.sub))
        self.checked = np.zeros(len(self.sub), dtype=bool)
        self.near_range = near_range
        if near_range:
            self._order = np.argsort(self.sub, kind="stable")
            self._sorted = self.sub[self._order]
        self.report = AgentReport(sid, len(self.sub), np.asarray(positions), fallback=0 < len(self.sub) < PACKETS)

    @property
    def packet_count(self) -> int:
        return len(self.bounds)

    def _verify(self, server: ServerPool, scenario: Scenario, pos: np.ndarray) -> np.ndarray:
        blocks = self.sub[pos]
        ok = verify_proof(server.serve(blocks), scenario.metadata.slice(blocks))
        return blocks[~ok]

    def compute(self, k: int, server: ServerPool, scenario: Scenario) -> _StepResult:
        """Packet k's challenge and verification; no agent state changes."""
        lo, hi = self.bounds[k]
        pos = np.arange(lo, hi)
        pos = pos[~self.checked[pos]]
        challenges = 0
        errors = np.empty(0, dtype=np.int64)
        if pos.size:
            errors = self._verify(server, scenario, pos)
            challenges = 1
        follow = np.empty(0, dtype=np.int64)
        if errors.size and self.near_range:
            done = self.checked.copy()
            done[pos] = True
            r = self.near_range
            lo_i = np.searchsorted(self._sorted, errors - r, side="left")
            hi_i = np.searchsorted(self._sorted, errors + r, side="right")
            near = np.unique(np.concatenate([self._order[a:b] for a, b in zip(lo_i, hi_i)]))
            follow = near[~done[near]]
            if follow.size:
                errors = np.concatenate([errors, self._verify(server, scenario, follow)])
                challenges += 1
        signals = []
        if errors.size:
            signals.append(Signal(self.id, k + 1, tuple(sorted(int(e) for e in errors))))
        return _StepResult(k + 1, pos, follow, errors, signals, challenges)

    def commit(self, res: _StepResult) -> None:
        self.checked[res.checked_pos] = True
        self.checked[res.follow_pos] = True
        for p in (res.checked_pos, res.follow_pos):
            if p.size:
                self.report.challenged.append(self.sub[p])
        self.report.packets.append(PacketRecord(res.packet, int(res.checked_pos.size), int(res.errors.size),
                                                int(res.follow_pos.size), len(res.signals)))
        self.report.detected.extend(int(e) for e in res.errors)


def _execute(protocol: int, agents: list[SubTPA], scenario: Scenario, threshold: ThresholdConfig,
             mode: str, server: ServerPool | None, sample_len: int) -> AuditOutcome:
    if not scenario.store.sealed:
        raise LifecycleError("scenario must be provisioned and sealed before auditing")
    if mode not in ("sequential", "concurrent"):
        raise InvalidParameterError(f"mode must be 'sequential' or 'concurrent', got {mode!r}")
    server = server or ServerPool(scenario.store)
    signals: list[Signal] = []
    signalled: set[int] = set()
    issued = 0
    stop = False
    rounds = max((a.packet_count for a in agents), default=0)
    pool = ThreadPoolExecutor(max_workers=min(8, len(agents))) if mode == "concurrent" and agents else None
    try:
        for k in range(rounds):
            active = [a for a in agents if k < a.packet_count]
            if pool is not None:
                results = list(pool.map(lambda a: a.compute(k, server, scenario), active))
            else:
                results = None
            for j, a in enumerate(active):
                res = results[j] if results is not None else a.compute(k, server, scenario)
                a.commit(res)
                issued += res.challenges
                for s in res.signals:
                    signals.append(s)
                    signalled.add(s.subtpa_id)
                if threshold.policy == "stop-on-m" and len(signalled) >= threshold.m:
                    stop = True
                    break
            if stop:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return AuditOutcome(protocol, [a.report for a in agents], signals,
                        "threshold-stop" if stop else "completed", set(scenario.corrupted), sample_len, issued)


@lru_cache(maxsize=4)
def _cached_sequence(key: sobol.SobolKey) -> np.ndarray:
    seq = sobol.generate(key)
    seq.setflags(write=False)
    return seq


def _sequence(key: sobol.SobolKey, scenario: Scenario, sequence) -> np.ndarray:
    if sequence is not None:
        return np.asarray(sequence, dtype=np.int64)
    if key.constant != scenario.block_count:
        raise InvalidParameterError(f"key constant {key.constant} differs from block count {scenario.block_count}")
    return _cached_sequence(key)


def run_protocol1(scenario: Scenario, key: sobol.SobolKey, threshold: ThresholdConfig,
                  mode: str = "sequential", server: ServerPool | None = None, sequence=None) -> AuditOutcome:
    """Coordinator generates the sequence, partitions it contiguously and
    hands part i to agent i."""
    seq = _sequence(key, scenario, sequence)
    parts = partition_sequence(np.arange(len(seq)), threshold.n)
    agents = [SubTPA(i + 1, seq[p], p) for i, p in enumerate(parts)]
    return _execute(1, agents, scenario, threshold, mode, server, len(seq))


def _tdk_agents(key: sobol.SobolKey, tdk_set: TDKSet, scenario: Scenario, threshold: ThresholdConfig,
                sequence, near_range: int | None, reconcile: bool) -> tuple[list[SubTPA], int]:
    if tdk_set.n != threshold.n:
        raise InvalidParameterError(f"{tdk_set.n} keys for {threshold.n} agents")
    common = sobol.key_to_bits(key)
    keys = tdk_set.bitstrings
    agents = []
    length = 0
    for i in range(tdk_set.n):
        bits = strrecon.distribute_tdk(keys, common, i, rng=np.random.default_rng(i)) if reconcile else keys[i]
        if bits != keys[i]:
            raise ProtocolError(f"SUBTPA {i + 1} reconstructed a different key")
        # every agent rebuilds the key and the sequence from the broadcast bits
        own_key = sobol.key_from_bits(common) if sequence is None else key
        seq = _sequence(own_key, scenario, sequence)
        length = len(seq)
        pos = np.flatnonzero(selection_mask(TaskDistributionKey(bits, i), len(seq)))
        agents.append(SubTPA(i + 1, seq[pos], pos, near_range))
    return agents, length


def run_protocol2(scenario: Scenario, key: sobol.SobolKey, tdk_set: TDKSet, threshold: ThresholdConfig,
                  mode: str = "sequential", server: ServerPool | None = None, sequence=None,
                  reconcile: bool = True) -> AuditOutcome:
    """Coordinator broadcasts the Sobol key and delivers each agent its TDK
    by string reconciliation; agents interpret their own subsequence."""
    agents, n = _tdk_agents(key, tdk_set, scenario, threshold, sequence, None, reconcile)
    return _execute(2, agents, scenario, threshold, mode, server, n)


def run_protocol3(scenario: Scenario, key: sobol.SobolKey, tdk_set: TDKSet, threshold: ThresholdConfig,
                  near_range: int, mode: str = "sequential", server: ServerPool | None = None,
                  sequence=None, reconcile: bool = True) -> AuditOutcome:
    """Protocol 2 plus an immediate follow-up challenge of every unchecked
    block of the agent's subsequence within +-near_range of a detected
    error; one consolidated signal per episode."""
    if near_range < 0:
        raise InvalidParameterError("near_range must be non-negative")
    agents, n = _tdk_agents(key, tdk_set, scenario, threshold, sequence, near_range, reconcile)
    return _execute(3, agents, scenario, threshold, mode, server, n)


def self_tdk(n: int, t: int, seq_len: int, sample_pct: float, rng: np.random.Generator) -> TaskDistributionKey:
    """A self-chosen key of length adjust_length(n*t) whose ones, placed at
    random, cover round(sample_pct %) of it (at least one)."""
    if not 0 < sample_pct <= 100:
        raise InvalidParameterError("sample_pct must be within (0, 100]")
    length = adjust_length(n * t, seq_len)
    ones = max(1, int(round(sample_pct * length / 100)))
    row = np.zeros(length, dtype=bool)
    row[rng.choice(length, size=ones, replace=False)] = True
    return TaskDistributionKey("".join("1" if b else "0" for b in row))


def run_protocol4(scenario: Scenario, key: sobol.SobolKey, threshold: ThresholdConfig, sample_pct: float,
                  t: int = 5, agent_seeds=None, seed: int = 0, mode: str = "sequential",
                  server: ServerPool | None = None, sequence=None) -> AuditOutcome:
    """Only the Sobol key is broadcast; each agent draws its own TDK and
    audits that sample (agents may overlap)."""
    seq = _sequence(key, scenario, sequence)
    if agent_seeds is None:
        agent_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(threshold.n)]
    if len(agent_seeds) != threshold.n:
        raise InvalidParameterError("need one seed per agent")
    agents = []
    for i, s in enumerate(agent_seeds):
        k = self_tdk(threshold.n, t, len(seq), sample_pct, np.random.default_rng(s))
        pos = np.flatnonzero(selection_mask(k, len(seq)))
        agents.append(SubTPA(i + 1, seq[pos], pos))
    return _execute(4, agents, scenario, threshold, mode, server, len(seq))
