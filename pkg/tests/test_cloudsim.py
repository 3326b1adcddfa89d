import numpy as np
import pytest

from distaudit import cloudsim
from distaudit.errors import InvalidChallengeError, InvalidParameterError, LifecycleError


def test_provision_and_clean_proofs():
    store, meta = cloudsim.provision(1024, 64, 3)
    idx = np.arange(1024)
    assert (cloudsim.serve_proof(store, idx) == meta.slice(idx)).all()


def test_block_bytes_and_digest_agree():
    from distaudit._kernels_py import FNV_OFFSET, FNV_PRIME
    store, _ = cloudsim.provision(64, 32, 1)
    cloudsim.inject_errors(store, cloudsim.CorruptionPlan(count=5, seed=2))
    for i in range(64):
        h = FNV_OFFSET
        for b in store.block_bytes(i):
            h = ((h ^ b) * FNV_PRIME) & ((1 << 64) - 1)
        assert h == int(store.digests([i])[0])


def test_corruption_detected_exactly():
    store, meta = cloudsim.provision(4096, 64, 5)
    bad = cloudsim.inject_errors(store, cloudsim.CorruptionPlan(fraction=0.01, seed=7))
    assert len(bad) == 40
    ok = cloudsim.serve_proof(store, np.arange(4096)) == meta.digests
    assert set(np.flatnonzero(~ok).tolist()) == bad == store.corrupted


def test_fraction_rounding():
    assert cloudsim.CorruptionPlan(fraction=0.01).resolve(1 << 20) == 10485


def test_runs_pattern():
    plan = cloudsim.CorruptionPlan(count=200, pattern="runs", run_length=64, seed=1)
    idx = plan.indices(1 << 14)
    assert len(idx) == len(set(idx.tolist())) == 200
    gaps = np.flatnonzero(np.diff(idx) != 1)
    runs = np.split(idx, gaps + 1)
    assert sorted(len(r) for r in runs) == [8, 64, 64, 64]


def test_seal_blocks_injection():
    store, _ = cloudsim.provision(16, 8, 0)
    store.seal()
    with pytest.raises(LifecycleError):
        cloudsim.inject_errors(store, cloudsim.CorruptionPlan(count=1))


def test_out_of_range_challenge():
    store, _ = cloudsim.provision(16, 8, 0)
    with pytest.raises(InvalidChallengeError):
        cloudsim.serve_proof(store, [3, 16])


@pytest.mark.parametrize("kw", [dict(), dict(count=1, fraction=0.1), dict(count=-1), dict(fraction=2.0),
                                dict(count=1, pattern="blocks"), dict(count=1, run_length=0)])
def test_plan_validation(kw):
    with pytest.raises(InvalidParameterError):
        cloudsim.CorruptionPlan(**kw)


def test_bad_store_shape():
    with pytest.raises(InvalidParameterError):
        cloudsim.BlockStore(1000, 64, 0)
    with pytest.raises(InvalidParameterError):
        cloudsim.BlockStore(1024, 12, 0)


def test_server_pool_replicas():
    store, meta = cloudsim.provision(256, 8, 0)
    pool = cloudsim.ServerPool(store, replicas=3, jitter=(0.0, 0.001), seed=1)
    for _ in range(20):
        assert (pool.serve(np.arange(10)) == meta.slice(np.arange(10))).all()
    assert {r for r, _, _ in pool.log} <= {0, 1, 2}


def test_scenario_trials_differ_and_repeat():
    cfg = cloudsim.ScenarioConfig(blocks=4096, block_size=16, seed=1, error_fraction=0.02, error_seed=3)
    a, b, a2 = (cloudsim.build_scenario(cfg, t) for t in (1, 2, 1))
    assert a.corrupted == a2.corrupted != b.corrupted
    assert a.store.sealed
