"""Acceptance suite: eleven end-to-end criteria, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from distaudit import analysis, audit, gf, setrecon, sobol, strrecon, tdk
from distaudit.cli import main
from distaudit.cloudsim import ScenarioConfig, build_scenario
from distaudit.experiment import sample_length


def _cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_01_sobol_golden_vectors(capsys, criterion):
    t0 = time.perf_counter()
    cases = [
        ("0", "1,3,7", [0, 32, 16, 48, 8, 40, 24, 56, 44, 12, 60, 28, 36]),
        ("1", "1,3,5", [0, 32, 16, 48, 24, 56, 8, 40, 36, 4, 52, 20, 60]),
        ("1", "1,3,7", [0, 32, 16, 48, 8, 40, 24, 56, 36, 4, 52, 20, 44]),
    ]
    got = []
    for idx, init, _ in cases:
        code, out = _cli(capsys, "gen-sobol", "--degree", "3", "--poly-index", idx, "--init", init,
                         "--constant", "64", "--len", "13")
        got.append([int(x) for x in out.split()] if code == 0 else None)
    polys = [str(sobol.primitive_polynomial(3, i).bits) for i in (0, 1)]
    dt = time.perf_counter() - t0
    ok = got == [c[2] for c in cases] and polys == [str(0b1011), str(0b1101)] and dt < 1
    assert criterion(1, ok, f"3/3 sequences exact={got == [c[2] for c in cases]}, {dt:.3f}s")


def test_02_prefix_permutation(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(100):
        degree = int(rng.integers(1, 13))
        key = sobol.random_key(rng, degree, 1 << 12, 1 << 12)
        seq = sobol.generate(key)
        for k in range(13):
            head = seq[:1 << k] >> (12 - k)
            bad += not np.array_equal(np.sort(head), np.arange(1 << k))
    dt = time.perf_counter() - t0
    assert criterion(2, bad == 0 and dt < 10, f"100 keys x k=0..12, violations={bad}, {dt:.2f}s")


def test_03_set_reconciliation_parity(criterion):
    t0 = time.perf_counter()
    cfg = setrecon.ReconConfig(5, 83)
    sa, sb = {5, 10, 17, 22, 32, 37}, {5, 9, 13, 17, 22, 25, 32, 37}
    ea, eb = setrecon.char_poly_eval(sa, cfg), setrecon.char_poly_eval(sb, cfg)
    ratios = [va * pow(vb, -1, 83) % 83 for (_, va), (_, vb) in zip(ea.pairs, eb.pairs)]
    rf = gf.interpolate_rational([(z, f) for (z, _), f in zip(ea.pairs, ratios)], 5, -2, 83)
    only_a, only_b = setrecon.reconcile(sb, ea, cfg, np.random.default_rng(0))
    dt = time.perf_counter() - t0
    checks = [
        ea.pairs == ((-1, 70), (-2, 1), (-3, 36), (-4, 32), (-5, 53)),
        eb.pairs == ((-1, 67), (-2, 60), (-3, 24), (-4, 53), (-5, 69)),
        ratios == [6, 18, 43, 10, 14],
        str(rf) == "(Z + 73) / (Z^3 + 36Z^2 + 3Z + 63)",
        only_a == {10} and only_b == {25, 9, 13},
    ]
    assert criterion(3, all(checks) and dt < 1, f"{sum(checks)}/5 stages exact, f = {rf}, {dt:.3f}s")


def test_04_string_reconciliation_round_trip(capsys, criterion):
    t0 = time.perf_counter()
    code, out = _cli(capsys, "recon-demo", "--a", "10010101", "--b", "101101001", "--lm", "3")
    counts = []
    for s in ("10010101", "101101001"):
        g = strrecon.build_graph(strrecon.shred(s, 3))
        raw, distinct = strrecon.count_cycles_best(g)
        par = math.prod(math.factorial(m) for m in g.multiplicities())
        counts.append((len(strrecon.enumerate_cycles(g)), raw, distinct * par))
    dt = time.perf_counter() - t0
    ok = (code == 0 and "A learns sigma_B = 101101001" in out and "B learns sigma_A = 10010101" in out
          and all(c == (12, 12, 12) for c in counts) and dt < 1)
    assert criterion(4, ok, f"round trip exit={code}, (enumerated, BEST raw, distinct x prod a!) = {counts}, "
                            f"{dt:.3f}s")


def _non_residue(q: int, rng) -> int:
    while True:
        n = int(rng.integers(2, q))
        if pow(n, (q - 1) // 2, q) == q - 1:
            return n


def test_05_root_finding_suite(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    wrong = missed_square = missed_irreducible = 0
    for i in range(1000):
        q = (83, 7919)[i % 2]
        deg = int(rng.integers(1, 9))
        roots = set(rng.choice(q, size=deg, replace=False).tolist())
        f = gf.Poly.from_roots(roots, q)
        if not (gf.is_square_free(f) and gf.splits_into_linear(f)) or gf.find_roots(f, rng) != roots:
            wrong += 1
        r = next(iter(roots))
        missed_square += gf.is_square_free(f * gf.Poly([-r, 1], q))
        irreducible = gf.Poly([-_non_residue(q, rng), 0, 1], q)
        missed_irreducible += gf.splits_into_linear(f * irreducible)
    dt = time.perf_counter() - t0
    ok = wrong == missed_square == missed_irreducible == 0 and dt < 30
    assert criterion(5, ok, f"1000 polys: wrong roots={wrong}, square accepted={missed_square}, "
                            f"irreducible accepted={missed_irreducible}, {dt:.2f}s")


def test_06_tdk_parity(criterion):
    t0 = time.perf_counter()
    seq = [1216, 5312, 3264, 7360, 704, 4800, 2752, 6848, 1728]
    a = tdk.interpret("10101", seq).tolist()
    b = tdk.interpret("01010", seq).tolist()
    adj = tdk.adjust_length(16, 1 << 20)
    dt = time.perf_counter() - t0
    ok = a == [1216, 3264, 704, 4800, 6848] and b == [5312, 7360, 2752, 1728] and adj == 17 and dt < 1
    assert criterion(6, ok, f"10101 -> {a}, 01010 -> {b}, adjust_length(16, 2^20) = {adj}")


N = 1 << 20
SCN = ScenarioConfig(blocks=N, block_size=256, seed=20, error_fraction=0.01, error_seed=77)


def _key(trial: int) -> sobol.SobolKey:
    return sobol.random_key(np.random.default_rng([7, trial]), 10, N, sample_length(N, 20))


@pytest.mark.slow
def test_07_detection_count_law(criterion):
    t0 = time.perf_counter()
    totals, covs, errs = [], [], []
    for trial in range(1, 11):
        scn = build_scenario(SCN, trial)
        out = audit.run_protocol1(scn, _key(trial), audit.ThresholdConfig(20, 20))
        per = np.array([a.detected_count for a in out.agents], dtype=float)
        totals.append(out.total_detected)
        covs.append(per.std() / per.mean())
        errs.append(len(scn.corrupted))
    dt = time.perf_counter() - t0
    mean, cov = float(np.mean(totals)), float(np.mean(covs))
    ok = set(errs) == {10485} and abs(mean - 2097) <= 209.7 and cov <= 0.15 and dt <= 300
    assert criterion(7, ok, f"mean total {mean:.1f} (target 2097 +-10%), mean CoV {cov:.3f} "
                            f"(max {max(covs):.3f}), {dt:.1f}s")


@pytest.mark.slow
def test_08_protocol2_coverage(criterion):
    t0 = time.perf_counter()
    p1_tot = p2_tot = 0
    cover_ok = True
    for trial in range(1, 4):
        scn = build_scenario(SCN, trial)
        key = _key(trial)
        th = audit.ThresholdConfig(20, 20)
        keys = tdk.generate_nonoverlapping(20, 3, key.seq_len, np.random.default_rng([8, trial]))
        p1 = audit.run_protocol1(scn, key, th)
        p2 = audit.run_protocol2(scn, key, keys, th)
        pos = np.concatenate([a.positions for a in p2.agents])
        covered = np.flatnonzero(tdk.selection_mask(
            tdk.TaskDistributionKey("".join("1" if b else "0" for b in np.any([k.mask for k in keys.keys], 0))),
            key.seq_len))
        cover_ok &= len(pos) == len(np.unique(pos)) and np.array_equal(np.sort(pos), covered)
        cover_ok &= math.gcd(keys.length, key.seq_len) == 1
        p1_tot += p1.total_detected
        p2_tot += p2.total_detected
    dt = time.perf_counter() - t0
    rel = p2_tot / p1_tot - 1
    ok = cover_ok and abs(rel) <= 0.05 and dt <= 300
    assert criterion(8, ok, f"disjoint exact cover={cover_ok}, protocol 2 vs 1 totals {p2_tot} vs {p1_tot} "
                            f"({rel:+.2%}), {dt:.1f}s")


def test_09_uniformity_17_vs_16_bit(criterion):
    """Segment balance of each agent's blocks: 17-bit (coprime) keys versus
    16-bit keys tiled over a 2^16-long Sobol sequence."""
    t0 = time.perf_counter()
    constant, seq_len = 1 << 20, 1 << 16
    r16, r17 = [], []
    for seed in range(20):
        rng = np.random.default_rng([9, seed])
        seq = sobol.generate(sobol.random_key(rng, 10, constant, seq_len))
        perm_seed = int(rng.integers(1 << 31))
        for adjust, sink in ((False, r16), (True, r17)):
            keys = tdk.generate_nonoverlapping(4, 4, seq_len, np.random.default_rng(perm_seed), adjust=adjust)
            sink.extend(analysis.segment_ratio(tdk.interpret(k, seq), constant) for k in keys.keys)
    dt = time.perf_counter() - t0
    m16, m17 = float(np.mean(r16)), float(np.mean(r17))
    ok = m17 < m16 and dt < 60
    assert criterion(9, ok, f"mean max/min segment ratio 17-bit {m17:.4f} vs 16-bit {m16:.4f} "
                            f"over 20 seeds x 4 agents, {dt:.2f}s")


def test_10_least_squares_parity(criterion):
    rnd = analysis.fit_line_from_sums(20100, 2686700, 8415, 846216, 200)
    sob = analysis.fit_line_from_sums(20100, 2686700, 8469, 850468, 200)
    got = (f"{rnd.A:.5f}", f"{rnd.B:.5f}", f"{sob.A:.5f}", f"{sob.B:.5f}")
    ok = got == ("0.00076", "41.99834", "-0.00100", "42.44548")
    assert criterion(10, ok, f"y = {got[0]}x + {got[1]}; y = {got[2]}x + {got[3]}")


@pytest.mark.slow
def test_11_protocol3_promptness(criterion):
    t0 = time.perf_counter()
    cfg = ScenarioConfig(blocks=1 << 18, block_size=64, seed=11, error_fraction=0.01, pattern="runs",
                         run_length=64, error_seed=31)
    rows = []
    for seed in range(10):
        scn = build_scenario(cfg, seed + 1)
        rng = np.random.default_rng([11, seed])
        key = sobol.random_key(rng, 10, cfg.blocks, sample_length(cfg.blocks, 20))
        keys = tdk.generate_nonoverlapping(10, 3, key.seq_len, rng)
        th = audit.ThresholdConfig(10, 10)
        p2 = audit.run_protocol2(scn, key, keys, th)
        p3 = audit.run_protocol3(scn, key, keys, th, 128)
        rows.append((len(p3.signals), len(p2.signals), p3.detected_set >= p2.detected_set))
    dt = time.perf_counter() - t0
    ok = all(s3 < s2 and sup for s3, s2, sup in rows) and dt <= 300
    s3 = sum(r[0] for r in rows)
    s2 = sum(r[1] for r in rows)
    assert criterion(11, ok, f"10 seeds: protocol 3 signals {s3} vs protocol 2 {s2}, fewer on every seed="
                             f"{all(r[0] < r[1] for r in rows)}, superset on every seed="
                             f"{all(r[2] for r in rows)}, {dt:.1f}s")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
