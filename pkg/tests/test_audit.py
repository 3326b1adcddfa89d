import numpy as np
import pytest

from distaudit import audit, cloudsim, sobol, tdk
from distaudit.errors import InvalidParameterError, LifecycleError, ProtocolError


def make_key(scn, pct=20, seed=0):
    n = scn.block_count
    return sobol.random_key(np.random.default_rng(seed), 10, n, n * pct // 100)


def positions(outcome):
    return [a.positions for a in outcome.agents]


def test_partition_and_chunk():
    parts = audit.partition_sequence(np.arange(23), 4)
    assert [len(p) for p in parts] == [5, 5, 5, 8]
    ch = audit.chunk(np.arange(25), 1)
    assert [len(c.indices) for c in ch] == [2] * 9 + [7]
    assert [len(c.indices) for c in audit.chunk(np.arange(7))] == [7]
    assert audit.chunk(np.arange(0)) == []


def test_verify_proof_shapes():
    assert audit.verify_proof([1, 2], [1, 3]).tolist() == [True, False]
    with pytest.raises(ProtocolError):
        audit.verify_proof([1, 2], [1])


def test_threshold_validation():
    with pytest.raises(InvalidParameterError):
        audit.ThresholdConfig(5, 6)
    with pytest.raises(InvalidParameterError):
        audit.ThresholdConfig(5, 2, "whenever")


def test_protocol1_ground_truth(small_scenario):
    key = make_key(small_scenario)
    out = audit.run_protocol1(small_scenario, key, audit.ThresholdConfig(8, 8))
    missed, false = out.ground_truth_check()
    assert not missed and not false
    seq = sobol.generate(key)
    assert np.array_equal(np.concatenate(positions(out)), np.arange(len(seq)))
    assert out.detected_set == set(seq.tolist()) & small_scenario.corrupted


def test_unsealed_rejected(small_scenario_cfg):
    store, meta = cloudsim.provision(1024, 8, 0)
    scn = cloudsim.Scenario(store, meta)
    key = sobol.random_key(np.random.default_rng(0), 5, 1024, 100)
    with pytest.raises(LifecycleError):
        audit.run_protocol1(scn, key, audit.ThresholdConfig(2, 2))


@pytest.mark.parametrize("proto", [1, 2, 3, 4])
def test_sequential_equals_concurrent(small_scenario, proto):
    key = make_key(small_scenario)
    th = audit.ThresholdConfig(6, 3)
    keys = tdk.generate_nonoverlapping(6, 3, key.seq_len, np.random.default_rng(1))

    def run(mode):
        if proto == 1:
            return audit.run_protocol1(small_scenario, key, th, mode)
        if proto == 2:
            return audit.run_protocol2(small_scenario, key, keys, th, mode)
        if proto == 3:
            return audit.run_protocol3(small_scenario, key, keys, th, 32, mode)
        return audit.run_protocol4(small_scenario, key, th, 20, seed=5, mode=mode)

    a, b = run("sequential"), run("concurrent")
    assert a.report_rows() == b.report_rows()
    assert a.signals == b.signals


def test_protocol2_disjoint_cover(small_scenario):
    key = make_key(small_scenario)
    keys = tdk.generate_nonoverlapping(7, 3, key.seq_len, np.random.default_rng(2))
    out = audit.run_protocol2(small_scenario, key, keys, audit.ThresholdConfig(7, 7))
    pos = np.concatenate(positions(out))
    assert len(pos) == len(set(pos.tolist()))
    covered = np.flatnonzero(np.any([k.mask for k in keys.keys], axis=0))
    expect = {p for p in range(key.seq_len) if p % keys.length in set(covered.tolist())}
    assert set(pos.tolist()) == expect


def test_protocol3_zero_range_is_protocol2(small_scenario):
    key = make_key(small_scenario)
    keys = tdk.generate_nonoverlapping(5, 3, key.seq_len, np.random.default_rng(3))
    th = audit.ThresholdConfig(5, 5)
    p2 = audit.run_protocol2(small_scenario, key, keys, th)
    p3 = audit.run_protocol3(small_scenario, key, keys, th, 0)
    assert p2.report_rows() == p3.report_rows()


def test_protocol3_follow_up_stays_in_subsequence(small_scenario):
    key = make_key(small_scenario)
    keys = tdk.generate_nonoverlapping(5, 3, key.seq_len, np.random.default_rng(3))
    out = audit.run_protocol3(small_scenario, key, keys, audit.ThresholdConfig(5, 5), 64)
    for a in out.agents:
        got = a.challenged_blocks
        assert len(got) == len(set(got.tolist()))
    assert not out.ground_truth_check()[0]


def test_threshold_monotonicity(small_scenario):
    key = make_key(small_scenario)
    issued = [audit.run_protocol1(small_scenario, key, audit.ThresholdConfig(10, m, "stop-on-m")).challenges_issued
              for m in range(1, 11)]
    assert issued == sorted(issued)
    full = audit.run_protocol1(small_scenario, key, audit.ThresholdConfig(10, 10))
    assert issued[-1] <= full.challenges_issued


def test_stop_on_m_reason(small_scenario):
    out = audit.run_protocol1(small_scenario, make_key(small_scenario), audit.ThresholdConfig(10, 2, "stop-on-m"))
    assert out.stop_reason == "threshold-stop"
    assert len(out.signalled_agents) == 2


def test_protocol4_determinism(small_scenario):
    key = make_key(small_scenario)
    th = audit.ThresholdConfig(4, 4)
    a = audit.run_protocol4(small_scenario, key, th, 10, agent_seeds=[1, 1, 2, 3])
    assert np.array_equal(a.agents[0].positions, a.agents[1].positions)
    b = audit.run_protocol4(small_scenario, key, th, 10, agent_seeds=[1, 1, 2, 3])
    assert a.report_rows() == b.report_rows()


def test_self_tdk_fraction():
    k = audit.self_tdk(10, 5, 1 << 14, 10, np.random.default_rng(0))
    assert len(k) == 51 and k.ones == 5


def test_first_error_promptness():
    # 2^18 blocks, 20% sample, 4 agents: packets of 1310 blocks, ~13 errors each
    cfg = cloudsim.ScenarioConfig(blocks=1 << 18, block_size=16, seed=2, error_fraction=0.01, error_seed=8)
    hits = 0
    for trial in range(1, 6):
        scn = cloudsim.build_scenario(cfg, trial)
        out = audit.run_protocol1(scn, make_key(scn, seed=trial), audit.ThresholdConfig(4, 4))
        hits += all(a.first_error_packet == 1 for a in out.agents)
    assert hits == 5


def test_report_rows_columns(small_scenario):
    from distaudit.analysis import REPORT_COLUMNS
    out = audit.run_protocol1(small_scenario, make_key(small_scenario), audit.ThresholdConfig(3, 3))
    rows = out.report_rows()
    assert all(tuple(r) == REPORT_COLUMNS for r in rows)
    assert sum(r["mismatches"] for r in rows) == out.total_detected
