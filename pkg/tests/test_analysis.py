import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distaudit import analysis
from distaudit.errors import InvalidInputError, SingularFitError


def test_fit_from_normal_equation_sums():
    rnd = analysis.fit_line_from_sums(20100, 2686700, 8415, 846216, 200)
    sob = analysis.fit_line_from_sums(20100, 2686700, 8469, 850468, 200)
    assert (round(rnd.A, 5), round(rnd.B, 5)) == (0.00076, 41.99834)
    assert (round(sob.A, 3), round(sob.B, 5)) == (-0.001, 42.44548)


def test_fit_collinear_and_singular():
    line = analysis.fit_line([(0, 1), (1, 3), (2, 5)])
    assert math.isclose(line.A, 2) and math.isclose(line.B, 1) and line.residual < 1e-20
    with pytest.raises(SingularFitError):
        analysis.fit_line([(1, 1), (1, 2)])
    with pytest.raises(SingularFitError):
        analysis.fit_line([(1, 1)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-100, 100), st.floats(-1e3, 1e3)), min_size=3, max_size=40))
def test_fit_matches_lstsq(points):
    xs = [p[0] for p in points]
    if len(set(xs)) < 2:
        return
    line = analysis.fit_line(points)
    a, b = np.polyfit(xs, [p[1] for p in points], 1)
    assert math.isclose(line.A, a, rel_tol=1e-6, abs_tol=1e-6)
    assert math.isclose(line.B, b, rel_tol=1e-6, abs_tol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32))
def test_summarize_oracle(rows, cols, seed):
    cells = np.random.default_rng(seed).integers(0, 200, (rows, cols))
    m = analysis.TrialMatrix(list(range(1, rows + 1)), list(range(1, cols + 1)), cells)
    for r, row in zip(analysis.summarize(m), cells.tolist()):
        mean = sum(row) / len(row)
        var = sum((x - mean) ** 2 for x in row) / len(row)
        assert r.max == max(row) and r.min == min(row)
        assert abs(r.mean - mean) < 1e-9 and abs(r.stddev - math.sqrt(var)) < 1e-9
        assert r.min <= r.mean <= r.max


def test_summary_constant_row():
    m = analysis.TrialMatrix([1], [1, 2, 3], [[5, 5, 5]])
    r = analysis.summarize(m)[0]
    assert (r.max, r.min, r.mean, r.stddev) == (5, 5, 5, 0)


def test_matrix_validation():
    with pytest.raises(InvalidInputError):
        analysis.TrialMatrix([1, 2], [1], [[1]])
    with pytest.raises(InvalidInputError):
        analysis.TrialMatrix([1], [1], [[-1]])
    with pytest.raises(InvalidInputError):
        analysis.summarize(analysis.TrialMatrix([], [], np.zeros((0, 0))))


def test_dispersion_compare():
    base = analysis.TrialMatrix([1, 2, 3, 4], [1], [[10], [11], [12], [13]])
    assert analysis.dispersion_compare(base, base).smaller == "equal"
    spiked = analysis.TrialMatrix([1, 2, 3, 4], [1], [[10], [30], [12], [13]])
    assert analysis.dispersion_compare(base, spiked).smaller == "a"


def test_bucket_means():
    rows = [analysis.SummaryRow(i, 0, 0, m, 0) for i, m in [(1, 41.6), (2, 42.4), (3, 41.5), (4, 40.2)]]
    assert analysis.bucket_means(rows) == {40: [4], 42: [1, 2, 3]}


def test_segments():
    assert analysis.segment_counts([0, 1, 2, 3, 4, 5, 6, 7], 8).tolist() == [2, 2, 2, 2]
    assert analysis.segment_ratio([0, 1, 2, 4, 6], 8) == 2.0
    assert analysis.segment_ratio([0, 1], 8) == math.inf


def test_report_csv_round_trip():
    rows = [dict(trial=1, subtpa=s, packet=p, checked=10, mismatches=s + p, first_error_packet=1, signals=1)
            for s in (1, 2) for p in (1, 2)]
    buf = io.StringIO()
    analysis.write_report_csv(rows, buf)
    back = analysis.read_report_csv(io.StringIO(buf.getvalue()))
    m = analysis.TrialMatrix.from_report_rows(back)
    assert m.cells.tolist() == [[5.0], [7.0]]
    with pytest.raises(InvalidInputError):
        analysis.read_report_csv(io.StringIO("trial,subtpa\n1,1\n"))


def test_column_totals_match_audit(small_scenario):
    from distaudit import audit, sobol
    key = sobol.random_key(np.random.default_rng(1), 10, small_scenario.block_count, 3000)
    outs = []
    for t in (1, 2):
        o = audit.run_protocol1(small_scenario, key, audit.ThresholdConfig(5, 5))
        o.trial = t
        outs.append(o)
    m = analysis.TrialMatrix.from_outcomes(outs)
    assert m.column_totals.tolist() == [o.total_detected for o in outs]


@pytest.mark.slow
def test_sobol_points_sit_closer_to_fit_than_random():
    # paired experiment over 20 seeds; runs of 64 corrupt blocks make a clumpy
    # random sample visibly noisier than the stratified Sobol one
    from distaudit.cloudsim import ScenarioConfig
    from distaudit.experiment import ProtocolConfig, run_trials
    res_sobol, res_random = [], []
    for s in range(20):
        scn = ScenarioConfig(blocks=1 << 18, block_size=16, seed=s, error_fraction=0.01, pattern="runs",
                             run_length=64, error_seed=100 + s)
        mats = [analysis.TrialMatrix.from_outcomes(run_trials(scn, ProtocolConfig(1, 20, sequence=kind), 5, s))
                for kind in ("sobol", "random")]
        rep = analysis.dispersion_compare(*mats)
        res_sobol.append(rep.residual_a)
        res_random.append(rep.residual_b)
    assert np.mean(res_sobol) < np.mean(res_random)
