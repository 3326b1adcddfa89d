"""String reconciliation over binary strings via puzzle pieces.

Each host decorates its string with a sentinel at both ends, shreds it into
overlapping pieces of width ``l_m``, and stores the pieces as a modified de
Bruijn multigraph: one edge per piece occurrence plus an artificial edge
from the end vertex back to the start vertex.  The host's own string is one
of the graph's Eulerian cycles; its position in a fixed enumeration order is
all that needs to travel besides the set difference of the hashed pieces.

Enumeration order: at every vertex outgoing edges are tried by target vertex
in descending string order (the sentinel sorts lowest), parallel edges in
ascending slot order.  In ``raw`` mode parallel edges are distinguishable, so
each string appears once per arrangement of its parallel edges; ``distinct``
mode collapses parallel edges and lists each string once.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np

from .errors import (AmbiguousIndexError, HashCollisionError, InvalidInputError, InvalidParameterError,
                     MalformedMultisetError, TooManyCyclesError)
from .gf import next_prime
from .setrecon import ReconConfig, char_poly_eval, reconcile

SENTINEL = "$"
SENTINEL_BITS = "1000101"
MAX_CYCLES = 10 ** 6


@dataclass(frozen=True)
class PieceMultiset:
    """Multiset of width-``mask_len`` pieces; ``counts`` is sorted by piece."""

    counts: tuple[tuple[str, int], ...]
    mask_len: int
    sentinel: str = SENTINEL

    @classmethod
    def from_pieces(cls, pieces: Iterable[str], mask_len: int, sentinel: str = SENTINEL) -> "PieceMultiset":
        return cls.from_counter(Counter(pieces), mask_len, sentinel)

    @classmethod
    def from_counter(cls, counter: Mapping[str, int], mask_len: int, sentinel: str = SENTINEL) -> "PieceMultiset":
        items = tuple(sorted((p, int(c)) for p, c in counter.items() if c > 0))
        for p, _ in items:
            if len(p) != mask_len:
                raise MalformedMultisetError(f"piece {p!r} does not have width {mask_len}")
        return cls(items, mask_len, sentinel)

    @property
    def counter(self) -> Counter:
        return Counter(dict(self.counts))

    @property
    def pieces(self) -> list[str]:
        return [p for p, c in self.counts for _ in range(c)]

    def __len__(self) -> int:
        return sum(c for _, c in self.counts)

    def replace_entries(self, remove: Iterable[str], add: Mapping[str, int]) -> "PieceMultiset":
        """Drop every occurrence of the pieces in ``remove`` then add ``add``."""
        cnt = self.counter
        for p in remove:
            cnt.pop(p, None)
        for p, c in add.items():
            cnt[p] += c
        return PieceMultiset.from_counter(cnt, self.mask_len, self.sentinel)


def shred(s: str, l_m: int, sentinel: str = SENTINEL) -> PieceMultiset:
    if len(sentinel) != 1 or sentinel in "01":
        raise InvalidParameterError("sentinel must be one symbol other than 0 and 1")
    if sentinel in s:
        raise InvalidInputError(f"sentinel {sentinel!r} occurs in the input string")
    if set(s) - {"0", "1"}:
        raise InvalidInputError("input must be a binary string")
    if l_m < 2:
        raise InvalidParameterError(f"mask length must be >= 2, got {l_m}")
    if len(s) < l_m - 1:
        raise InvalidInputError(f"string of length {len(s)} is shorter than l_m - 1 = {l_m - 1}")
    dec = sentinel + s + sentinel
    return PieceMultiset.from_pieces((dec[i:i + l_m] for i in range(len(dec) - l_m + 1)), l_m, sentinel)


@dataclass
class ModifiedDeBruijnGraph:
    """Real edges ``u -> v`` with multiplicities; the artificial edge
    ``end -> start`` is implicit."""

    mask_len: int
    sentinel: str
    start: str
    end: str
    edges: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def vertices(self) -> list[str]:
        vs = set(self.edges)
        for targets in self.edges.values():
            vs.update(targets)
        return sorted(vs)

    def out_degree(self, v: str) -> int:
        return sum(self.edges.get(v, {}).values()) + (v == self.end)

    def in_degree(self, v: str) -> int:
        return sum(t.get(v, 0) for t in self.edges.values()) + (v == self.start)

    @property
    def edge_count(self) -> int:
        return sum(sum(t.values()) for t in self.edges.values())

    def multiplicities(self) -> list[int]:
        return [m for t in self.edges.values() for m in t.values()]


def build_graph(ms: PieceMultiset) -> ModifiedDeBruijnGraph:
    sent = ms.sentinel
    starts = [p for p, _ in ms.counts if p.startswith(sent)]
    ends = [p for p, _ in ms.counts if p.endswith(sent)]
    if len(starts) != 1 or len(ends) != 1 or ms.counter[starts[0]] != 1 or ms.counter[ends[0]] != 1:
        raise MalformedMultisetError("need exactly one start piece and one end piece")
    edges: dict[str, dict[str, int]] = {}
    for p, c in ms.counts:
        body = p[1:] if p is starts[0] else p
        body = body[:-1] if p is ends[0] else body
        if sent in body or set(body) - {"0", "1"}:
            raise MalformedMultisetError(f"piece {p!r} has a misplaced sentinel or non-binary symbol")
        edges.setdefault(p[:-1], {})
        edges[p[:-1]][p[1:]] = edges[p[:-1]].get(p[1:], 0) + c
    g = ModifiedDeBruijnGraph(ms.mask_len, sent, starts[0][:-1], ends[0][1:], edges)
    for v in g.vertices:
        if g.in_degree(v) != g.out_degree(v):
            raise MalformedMultisetError(f"vertex {v!r} is unbalanced")
    seen, stack = {g.start}, [g.start]
    while stack:
        u = stack.pop()
        nxt = list(g.edges.get(u, {}))
        if u == g.end:
            nxt.append(g.start)
        for v in nxt:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if seen != set(g.vertices):
        raise MalformedMultisetError("pieces do not form a connected graph")
    return g


def _bareiss_det(m: list[list[int]]) -> int:
    """Exact integer determinant (fraction-free elimination)."""
    n = len(m)
    if n == 0:
        return 1
    a = [row[:] for row in m]
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k]), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _best(edges: Mapping[str, Mapping[str, int]], start: str, end: str) -> tuple[int, int]:
    """Eulerian trails start -> end using every edge exactly once, counted
    as circuits of the graph plus one artificial edge end -> start."""
    if not any(m for t in edges.values() for m in t.values()):
        return (1, 1) if start == end else (0, 0)
    out: dict[str, int] = {}
    inn: dict[str, int] = {}
    for u, t in edges.items():
        for v, m in t.items():
            if m:
                out[u] = out.get(u, 0) + m
                inn[v] = inn.get(v, 0) + m
    out[end] = out.get(end, 0) + 1
    inn[start] = inn.get(start, 0) + 1
    vs = sorted(set(out) | set(inn))
    if any(out.get(v, 0) != inn.get(v, 0) for v in vs):
        return 0, 0
    pos = {v: i for i, v in enumerate(vs)}
    lap = [[0] * len(vs) for _ in vs]
    for u, t in edges.items():
        for v, m in t.items():
            if m:
                lap[pos[u]][pos[v]] -= m
    lap[pos[end]][pos[start]] -= 1
    for v in vs:
        lap[pos[v]][pos[v]] += out[v]
    r = pos[start]
    delta = _bareiss_det([row[:r] + row[r + 1:] for i, row in enumerate(lap) if i != r])
    raw = delta
    for v in vs:
        raw *= math.factorial(out[v] - 1)
    par = 1
    for t in edges.values():
        for m in t.values():
            par *= math.factorial(m)
    return raw, raw // par


def count_cycles_best(g: ModifiedDeBruijnGraph) -> tuple[int, int]:
    """``(raw, distinct)`` Eulerian cycle counts by the BEST theorem.

    Delta is a cofactor of the Kirchhoff matrix of the graph with the
    artificial edge; raw = Delta * prod (d_v - 1)!, and distinct divides
    out prod a_ij! over the real parallel edges.
    """
    return _best(g.edges, g.start, g.end)


def iter_cycles(g: ModifiedDeBruijnGraph, mode: str = "raw") -> Iterator[str]:
    """Eulerian cycles decoded to sentinel-decorated strings, in enumeration order."""
    if mode not in ("raw", "distinct"):
        raise InvalidParameterError(f"mode must be 'raw' or 'distinct', got {mode!r}")
    order = {u: sorted(t, reverse=True) for u, t in g.edges.items()}
    remaining = {u: dict(t) for u, t in g.edges.items()}
    total = g.edge_count
    path: list[str] = []
    end = g.end

    def walk(u: str, left: int) -> Iterator[str]:
        if left == 0:
            if u == end:
                yield g.start + "".join(path)
            return
        for v in order.get(u, ()):
            r = remaining[u][v]
            if not r:
                continue
            remaining[u][v] = r - 1
            path.append(v[-1])
            for _ in range(r if mode == "raw" else 1):
                yield from walk(v, left - 1)
            path.pop()
            remaining[u][v] = r

    yield from walk(g.start, total)


def _check_mode(mode: str) -> None:
    if mode not in ("raw", "distinct"):
        raise InvalidParameterError(f"mode must be 'raw' or 'distinct', got {mode!r}")


def enumerate_cycles(g: ModifiedDeBruijnGraph, mode: str = "raw", max_cycles: int = MAX_CYCLES) -> list[str]:
    _check_mode(mode)
    raw, distinct = count_cycles_best(g)
    n = raw if mode == "raw" else distinct
    if n > max_cycles:
        raise TooManyCyclesError(f"{n} Eulerian cycles exceed the limit {max_cycles}")
    return list(iter_cycles(g, mode))


def _completions(remaining: dict[str, dict[str, int]], u: str, end: str, mode: str) -> int:
    raw, distinct = _best(remaining, u, end)
    return raw if mode == "raw" else distinct


def cycle_index(g: ModifiedDeBruijnGraph, decorated: str, mode: str = "raw") -> int:
    """Smallest 1-based index whose cycle spells ``decorated``.

    Ranks by counting, at every step, the cycles that branch off to an
    earlier target; no enumeration.
    """
    _check_mode(mode)
    k = g.mask_len - 1
    if not decorated.startswith(g.start):
        raise InvalidInputError(f"{decorated!r} is not an Eulerian cycle of this graph")
    remaining = {u: dict(t) for u, t in g.edges.items()}
    rank = 0
    u = g.start
    for i in range(k, len(decorated)):
        v_next = decorated[i - k + 1:i + 1]
        if remaining.get(u, {}).get(v_next, 0) == 0:
            raise InvalidInputError(f"{decorated!r} is not an Eulerian cycle of this graph")
        for v in sorted(remaining[u], reverse=True):
            if v == v_next:
                break
            r = remaining[u][v]
            if r:
                remaining[u][v] -= 1
                rank += (r if mode == "raw" else 1) * _completions(remaining, v, g.end, mode)
                remaining[u][v] += 1
        remaining[u][v_next] -= 1
        u = v_next
    if u != g.end or any(m for t in remaining.values() for m in t.values()):
        raise InvalidInputError(f"{decorated!r} is not an Eulerian cycle of this graph")
    return rank + 1


def cycle_at(g: ModifiedDeBruijnGraph, index: int, mode: str = "raw") -> str:
    """The cycle at 1-based ``index`` in enumeration order."""
    _check_mode(mode)
    raw, distinct = count_cycles_best(g)
    n = raw if mode == "raw" else distinct
    if not 1 <= index <= n:
        raise AmbiguousIndexError(f"index {index} outside 1..{n}")
    remaining = {u: dict(t) for u, t in g.edges.items()}
    u = g.start
    out = [g.start]
    left = index
    for _ in range(g.edge_count):
        for v in sorted(remaining.get(u, {}), reverse=True):
            r = remaining[u][v]
            if not r:
                continue
            remaining[u][v] -= 1
            c = _completions(remaining, v, g.end, mode)
            block = c * (r if mode == "raw" else 1)
            if left <= block:
                left = (left - 1) % c + 1 if c else left
                out.append(v[-1])
                u = v
                break
            left -= block
            remaining[u][v] += 1
        else:  # pragma: no cover - counts guarantee a branch
            raise AmbiguousIndexError(f"index {index} not reachable")
    return "".join(out)


# -- pieces to integers -------------------------------------------------------

@dataclass(frozen=True)
class PieceCodec:
    """Maps (piece, count) entries to integers.

    Injective mode (``modulus=None``): bits ``1 || enc(piece) || count``
    with the count in a fixed ``count_width`` field; the leading 1 keeps
    leading zeros.  Compact mode: ``enc(piece) || count`` reduced mod
    ``modulus``, which may collide.
    """

    mask_len: int
    sentinel_bits: str = SENTINEL_BITS
    count_width: int = 8
    modulus: int | None = None
    sentinel: str = SENTINEL

    def __post_init__(self):
        if not self.sentinel_bits or set(self.sentinel_bits) - {"0", "1"}:
            raise InvalidParameterError("sentinel encoding must be a non-empty bit pattern")
        if self.count_width < 1:
            raise InvalidParameterError("count width must be positive")

    @classmethod
    def compact(cls, mask_len: int) -> "PieceCodec":
        return cls(mask_len, SENTINEL_BITS, 2, 47)

    @property
    def value_bits(self) -> int:
        """Upper bound on the bit length of injective values."""
        return 1 + self.mask_len - 1 + len(self.sentinel_bits) + self.count_width

    def encode_piece(self, piece: str) -> str:
        return piece.replace(self.sentinel, self.sentinel_bits)

    def encode(self, piece: str, count: int) -> int:
        if not 0 < count < (1 << self.count_width):
            raise InvalidInputError(f"count {count} does not fit in {self.count_width} bits")
        bits = self.encode_piece(piece) + format(count, f"0{self.count_width}b")
        if self.modulus is None:
            return int("1" + bits, 2)
        return int(bits, 2) % self.modulus

    def _parses(self, body: str) -> int:
        """Number of width-``mask_len`` pieces whose encoding is ``body``."""
        sb, k = self.sentinel_bits, self.mask_len
        n = 0
        if len(body) == k and not set(body) - {"0", "1"}:
            n += 1
        if len(body) == k - 1 + len(sb):
            n += body.startswith(sb)
            n += body.endswith(sb)
        return n

    def table(self, ms: PieceMultiset) -> dict[int, tuple[str, int]]:
        """value -> (piece, count); raises on any collision or ambiguous parse."""
        out: dict[int, tuple[str, int]] = {}
        for p, c in ms.counts:
            v = self.encode(p, c)
            if self.modulus is None and self._parses(self.encode_piece(p)) != 1:
                raise HashCollisionError(f"encoding of piece {p!r} is ambiguous")
            if v in out:
                raise HashCollisionError(f"pieces {out[v][0]!r} and {p!r} both hash to {v}")
            out[v] = (p, c)
        return out

    def recon_config(self, m_bar: int) -> ReconConfig:
        if self.modulus is not None:
            return ReconConfig(m_bar, next_prime(max(self.modulus, m_bar) + m_bar))
        return ReconConfig.for_bits(self.value_bits, m_bar)


def multiset_to_set(ms: PieceMultiset, sentinel_encoding: str = SENTINEL_BITS,
                    hash_modulus: int | None = None, count_width: int | None = None) -> set[int]:
    """Hashed integer set of ``ms``; the compact form is ``hash_modulus=47``
    (count field then defaults to 2 bits)."""
    if count_width is None:
        count_width = 2 if hash_modulus is not None else 8
    codec = PieceCodec(ms.mask_len, sentinel_encoding, count_width, hash_modulus, ms.sentinel)
    return set(codec.table(ms))


# -- protocol -----------------------------------------------------------------

@dataclass
class Channel:
    """Records every protocol message for communication accounting."""

    messages: list[tuple[str, str, str]] = field(default_factory=list)

    def send(self, sender: str, kind: str, payload) -> str:
        text = json.dumps(payload, separators=(",", ":"), sort_keys=True)
        self.messages.append((sender, kind, text))
        return text

    def of_kind(self, kind: str) -> list[dict]:
        return [json.loads(t) for _, k, t in self.messages if k == kind]

    @property
    def eval_pairs(self) -> int:
        return sum(len(m["pairs"]) for m in self.of_kind("evals"))

    @property
    def pieces_sent(self) -> int:
        return sum(len(m) for m in self.of_kind("pieces"))

    @property
    def indices_sent(self) -> int:
        return len(self.of_kind("index"))

    @property
    def total_bytes(self) -> int:
        return sum(len(t) for _, _, t in self.messages)


@dataclass
class HostState:
    name: str
    string: str
    multiset: PieceMultiset
    table: dict[int, tuple[str, int]]
    index: int


def _host(name: str, s: str, l_m: int, codec: PieceCodec, mode: str) -> HostState:
    ms = shred(s, l_m, codec.sentinel)
    g = build_graph(ms)
    idx = cycle_index(g, codec.sentinel + s + codec.sentinel, mode)
    return HostState(name, s, ms, codec.table(ms), idx)


def _rebuild(own: HostState, only_local: set[int], pieces: list[dict], index: int, mode: str) -> str:
    ms = own.multiset.replace_entries((own.table[v][0] for v in only_local),
                                      {p["piece"]: p["count"] for p in pieces})
    g = build_graph(ms)
    s = cycle_at(g, index, mode)
    return s[1:-1]


class StringReconResult(NamedTuple):
    a_learns: str
    b_learns: str


def string_recon(host_a: str, host_b: str, l_m: int, config: ReconConfig | None = None,
                 codec: PieceCodec | None = None, channel: Channel | None = None, rng=None,
                 mode: str = "raw") -> StringReconResult:
    """Both hosts learn the other's string.

    Messages each way: the piece-set evaluations (m_bar pairs plus the
    cardinality), the {piece, count} entries only the sender holds, and the
    sender's cycle index.  Without ``config`` the bound m_bar is set to the
    true hashed difference (simulation convenience).
    """
    codec = codec or PieceCodec(l_m)
    if codec.mask_len != l_m:
        raise InvalidParameterError("codec mask length differs from l_m")
    channel = channel if channel is not None else Channel()
    rng = rng if rng is not None else np.random.default_rng(0)
    a = _host("A", host_a, l_m, codec, mode)
    b = _host("B", host_b, l_m, codec, mode)
    if config is None:
        config = codec.recon_config(max(1, len(set(a.table) ^ set(b.table))))
    ev_a = char_poly_eval(a.table, config)
    ev_b = char_poly_eval(b.table, config)
    channel.send("A", "evals", json.loads(ev_a.to_json()))
    channel.send("B", "evals", json.loads(ev_b.to_json()))
    # each side interpolates the other's evaluations
    b_only_remote, b_only_local = reconcile(b.table, ev_a, config, rng)
    a_only_remote, a_only_local = reconcile(a.table, ev_b, config, rng)
    msg_a = [{"piece": a.table[v][0], "count": a.table[v][1]} for v in sorted(a_only_local)]
    msg_b = [{"piece": b.table[v][0], "count": b.table[v][1]} for v in sorted(b_only_local)]
    channel.send("A", "pieces", msg_a)
    channel.send("A", "index", a.index)
    channel.send("B", "pieces", msg_b)
    channel.send("B", "index", b.index)
    b_learns = _rebuild(b, b_only_local, msg_a, a.index, mode)
    a_learns = _rebuild(a, a_only_local, msg_b, b.index, mode)
    return StringReconResult(a_learns, b_learns)


# -- task-distribution-key delivery ---------------------------------------------

@dataclass(frozen=True)
class TDKDelivery:
    """Everything the coordinator sends one SUBTPA."""

    subtpa_id: int
    l_m: int
    count_width: int
    evals: dict
    pieces: list[dict]
    index: int
    q: int
    m_bar: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, separators=(",", ":"), sort_keys=True)


def choose_mask_length(key: str, common: str, limit: int = 20_000, start: int = 3) -> int:
    """Smallest l_m >= start whose distinct cycle count for ``key`` is <= limit."""
    top = len(key) + 1
    for l_m in range(start, top + 1):
        if len(common) < l_m - 1:
            break
        try:
            _, distinct = count_cycles_best(build_graph(shred(key, l_m)))
        except InvalidInputError:
            break
        if distinct <= limit:
            return l_m
    return min(top, len(common) + 1)


def coordinator_prepare(key: str, common_key: str, subtpa_id: int, l_m: int | None = None,
                        cycle_limit: int = 20_000) -> TDKDelivery:
    """Coordinator side: shredding, indexing and piece bookkeeping only.

    The coordinator knows both strings, so it reads the hashed difference
    directly off the two tables and sizes m_bar to it.
    """
    if l_m is None:
        l_m = choose_mask_length(key, common_key, cycle_limit)
    ms_k = shred(key, l_m)
    ms_c = shred(common_key, l_m)
    width = max(max(c for _, c in ms_k.counts), max(c for _, c in ms_c.counts)).bit_length()
    codec = PieceCodec(l_m, count_width=width)
    tab_k = codec.table(ms_k)
    tab_c = codec.table(ms_c)
    g = build_graph(ms_k)
    idx = cycle_index(g, SENTINEL + key + SENTINEL, "distinct")
    diff = set(tab_k) ^ set(tab_c)
    config = codec.recon_config(max(1, len(diff)))
    ev = char_poly_eval(tab_k, config)
    pieces = [{"piece": tab_k[v][0], "count": tab_k[v][1]} for v in sorted(set(tab_k) - set(tab_c))]
    return TDKDelivery(subtpa_id, l_m, width, json.loads(ev.to_json()), pieces, idx, config.q, config.m_bar)


def subtpa_receive(delivery: TDKDelivery, common_key: str, rng=None) -> str:
    """SUBTPA side: interpolation, root finding and cycle decoding."""
    from .setrecon import CharPolyEvaluations
    codec = PieceCodec(delivery.l_m, count_width=delivery.count_width)
    ms_c = shred(common_key, delivery.l_m)
    tab_c = codec.table(ms_c)
    config = ReconConfig(delivery.m_bar, delivery.q)
    remote = CharPolyEvaluations.from_json(json.dumps(delivery.evals))
    rng = rng if rng is not None else np.random.default_rng(delivery.subtpa_id)
    only_remote, only_local = reconcile(tab_c, remote, config, rng)
    got = {codec.encode(p["piece"], p["count"]) for p in delivery.pieces}
    if got != only_remote:
        raise InvalidInputError("received pieces do not match the reconciled difference")
    own = HostState("S", common_key, ms_c, tab_c, 0)
    return _rebuild(own, only_local, delivery.pieces, delivery.index, "distinct")


def distribute_tdk(coordinator_keys: Mapping[int, str] | list[str], common_key: str, subtpa_id: int,
                   channel: Channel | None = None, rng=None, l_m: int | None = None) -> str:
    """Deliver SUBTPA ``subtpa_id``'s key; returns the key as reconstructed
    on the SUBTPA side."""
    key = coordinator_keys[subtpa_id]
    delivery = coordinator_prepare(key, common_key, subtpa_id, l_m)
    if channel is not None:
        channel.send("coordinator", "tdk", json.loads(delivery.to_json()))
    return subtpa_receive(delivery, common_key, rng)
