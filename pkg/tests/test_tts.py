import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmslab.tts import (
    CSV_COLUMNS,
    compare,
    compute_tts,
    fit_exponent,
    min_tts_curve,
    pairs_from_rows,
    read_tts_csv,
)
from qmslab.walk import AnnealingSchedule

# Ising n in {3,4,5}, constant beta=1, delta=0.9, t_max=40
ISING_EXPONENT = 0.940804
ISING_CLASSICAL_MIN = (3.564, 8.374, 17.86)
ISING_QUANTUM_MIN = (3.0, 6.672, 13.67)


def test_compute_tts_worked_value():
    assert compute_tts(10, 0.5, 0.9) == pytest.approx(33.2193, abs=1e-4)


def test_compute_tts_p_equals_delta():
    assert compute_tts(7, 0.9, 0.9) == pytest.approx(7, abs=1e-12)


def test_compute_tts_edges():
    assert compute_tts(5, 0.0) == math.inf
    assert compute_tts(5, 1.0) == 5
    assert compute_tts(5, 0.99, 0.9) == 5


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
def test_compute_tts_bad_delta(delta):
    with pytest.raises(ValueError):
        compute_tts(1, 0.5, delta)


def test_compute_tts_bad_p_and_t():
    with pytest.raises(ValueError):
        compute_tts(1, 1.2)
    with pytest.raises(ValueError):
        compute_tts(0, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 1000), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6), st.floats(0.05, 0.99))
def test_tts_properties(t, p1, p2, delta):
    lo, hi = sorted((p1, p2))
    assert compute_tts(t, hi, delta) <= compute_tts(t, lo, delta)
    assert compute_tts(t, lo, delta) >= t
    assert compute_tts(2 * t, lo, delta) == pytest.approx(2 * compute_tts(t, lo, delta), rel=1e-12)


def test_min_curve_constant_delta():
    m = min_tts_curve([0.9] * 5, 0.9)
    assert m.t == 1 and m.tts == pytest.approx(1)


def test_min_curve_skips_zero():
    m = min_tts_curve([0.0, 0.2, 0.9], 0.9)
    want = min((2, compute_tts(2, 0.2)), (3, compute_tts(3, 0.9)), key=lambda x: x[1])
    assert (m.t, m.tts) == (want[0], pytest.approx(want[1]))
    assert [r.t for r in m.records] == [1, 2, 3]
    assert m.records[0].tts == math.inf


def test_min_curve_matches_exhaustive_scan():
    t = np.arange(1, 60)
    p = 1 - np.exp(-0.02 * t**1.5)
    m = min_tts_curve(p, 0.9)
    scan = [compute_tts(int(k), float(q)) for k, q in zip(t, p)]
    assert m.tts == min(scan)
    assert m.t == int(np.argmin(scan)) + 1
    assert 1 < m.t < 59


def test_min_curve_all_zero_is_no_solution():
    m = min_tts_curve([0.0, 0.0])
    assert not m.solved and m.tts == math.inf


def test_min_curve_empty():
    with pytest.raises(ValueError):
        min_tts_curve([])


@pytest.mark.parametrize("exponent", [0.5, 1.0, 0.8])
def test_fit_recovers_collinear_exponent(exponent):
    xs = [3.0, 10.0, 40.0, 200.0]
    fit = fit_exponent([(x, x**exponent) for x in xs])
    assert fit.exponent == pytest.approx(exponent, abs=1e-9)
    assert fit.residual_norm < 1e-9 and fit.n_points == 4
    assert fit.advantage == (exponent < 1)


def test_fit_scale_equivariant():
    pts = [(3.0, 2.5), (9.0, 6.0), (30.0, 14.0)]
    a = fit_exponent(pts)
    b = fit_exponent([(17 * x, y) for x, y in pts])
    assert a.exponent == pytest.approx(b.exponent, abs=1e-9)
    assert a.intercept != pytest.approx(b.intercept)


def test_fit_errors_name_point():
    with pytest.raises(ValueError, match="point 1"):
        fit_exponent([(2.0, 1.0), (math.inf, 2.0)])
    with pytest.raises(ValueError, match="point 0"):
        fit_exponent([(0.0, 1.0), (2.0, 2.0)])
    with pytest.raises(ValueError):
        fit_exponent([(2.0, 1.0)])


def test_compare_ising_fixture():
    res = compare("ising", [3, 4, 5], AnnealingSchedule("constant", 1.0), 0.9, 40)
    assert res.fit is not None and math.isfinite(res.fit.exponent)
    assert res.fit.exponent == pytest.approx(ISING_EXPONENT, abs=1e-6)
    assert [round(p["classical_tts"], 3) for p in res.pairs] == pytest.approx(ISING_CLASSICAL_MIN, abs=5e-3)
    assert [p["quantum_tts"] for p in res.pairs] == pytest.approx(ISING_QUANTUM_MIN, abs=5e-3)
    keys = [(r.n, r.t, r.algorithm) for r in res.records]
    assert keys == sorted(keys)


def test_compare_csv_schema_round_trip():
    res = compare("ising", [3, 4], AnnealingSchedule("constant", 1.0), t_max=5)
    text = res.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_tts_csv(text)
    assert len(rows) == 2 * 2 * 5
    pairs = pairs_from_rows(rows)
    assert pairs == [(p["classical_tts"], p["quantum_tts"]) for p in res.pairs]


def test_compare_empty_sizes():
    res = compare("ising", [], AnnealingSchedule("constant", 1.0))
    assert res.records == [] and res.fit is None
    assert res.to_csv().strip() == ",".join(CSV_COLUMNS)


def test_compare_classical_only():
    res = compare("ising", [3, 4], AnnealingSchedule("constant", 1.0), t_max=5, quantum=False)
    assert {r.algorithm for r in res.records} == {"classical"}
    assert res.fit is None
    assert all("quantum_tts" not in p for p in res.pairs)


def test_compare_capacity_skips_with_warning():
    res = compare("ising", [3, 30], AnnealingSchedule("constant", 1.0), t_max=3, limit=20)
    assert {r.n for r in res.records} == {3}
    assert any("n=30" in w for w in res.warnings)


def test_compare_deterministic_across_threads():
    sched = AnnealingSchedule("constant", 1.0)
    a = compare("ising", [3, 4, 5], sched, t_max=6, threads=1).to_csv()
    b = compare("ising", [5, 3, 4], sched, t_max=6, threads=3).to_csv()
    assert a == b


def test_pairs_from_two_column_file():
    rows = read_tts_csv("classical_tts,quantum_tts\n4,2\n16,4\n")
    assert fit_exponent(pairs_from_rows(rows)).exponent == pytest.approx(0.5)
