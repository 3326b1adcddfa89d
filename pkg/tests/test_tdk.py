import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distaudit import tdk
from distaudit.errors import InvalidParameterError

SEQ = [1216, 5312, 3264, 7360, 704, 4800, 2752, 6848, 1728]


def test_interpret_worked_example():
    assert tdk.interpret("10101", SEQ).tolist() == [1216, 3264, 704, 4800, 6848]
    assert tdk.interpret("01010", SEQ).tolist() == [5312, 7360, 2752, 1728]


def test_adjust_length():
    assert tdk.adjust_length(16, 1 << 20) == 17
    assert tdk.adjust_length(90, 838860) == 91
    assert tdk.adjust_length(17, 1 << 20) == 17
    with pytest.raises(InvalidParameterError):
        tdk.adjust_length(0, 10)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(1, 10**6), st.integers(0, 2**32))
def test_nonoverlapping_invariants(n, t, seq_len, seed):
    s = tdk.generate_nonoverlapping(n, t, seq_len, np.random.default_rng(seed))
    masks = np.array([k.mask for k in s.keys])
    assert (masks.sum(axis=0) <= 1).all()
    assert masks.sum() == n * t
    assert all(k.ones == t for k in s.keys)
    assert math.gcd(s.length, seq_len) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(1, 500), st.integers(0, 2**32))
def test_unadjusted_cover_each_position_once(n, t, length, seed):
    s = tdk.generate_nonoverlapping(n, t, None, np.random.default_rng(seed), adjust=False)
    pos = np.concatenate([tdk.interpret_positions(k, length) for k in s.keys])
    assert sorted(pos.tolist()) == list(range(length))


@pytest.mark.parametrize("mode", ["distributed", "shared", "per-key"])
def test_overlapping_adds_ones(mode):
    rng = np.random.default_rng(2)
    base = tdk.generate_nonoverlapping(4, 4, None, rng, adjust=False)
    over = tdk.generate_overlapping(base, 20, rng, mode)
    extra = math.ceil(0.2 * 16)  # a shared position already belongs to one key
    added = sum(o.ones - b.ones for o, b in zip(over.keys, base.keys))
    assert added == {"distributed": extra, "shared": 3 * extra, "per-key": 4 * extra}[mode]
    for o, b in zip(over.keys, base.keys):
        assert (o.mask | b.mask).tolist() == o.mask.tolist()
    assert (np.array([k.mask for k in over.keys]).sum(axis=0) >= 2).any()


def test_overlap_zero_is_identity():
    base = tdk.generate_nonoverlapping(4, 4, None, np.random.default_rng(0), adjust=False)
    assert tdk.generate_overlapping(base, 0, np.random.default_rng(0)).bitstrings == base.bitstrings


def test_overlap_too_large():
    base = tdk.generate_nonoverlapping(2, 1, None, np.random.default_rng(0), adjust=False)
    with pytest.raises(InvalidParameterError):
        tdk.generate_overlapping(base, 100, np.random.default_rng(0), "per-key")


def test_key_validation():
    with pytest.raises(InvalidParameterError):
        tdk.TaskDistributionKey("0000")
    with pytest.raises(InvalidParameterError):
        tdk.TaskDistributionKey("10a1")
