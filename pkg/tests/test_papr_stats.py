import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vibpapr.errors import DegenerateSignalError, RangeError
from vibpapr.papr_stats import (CcdfCurve, ccdf_closed_form, ccdf_empirical, ccdf_exact, ccdf_from_papr_db,
                                closed_form_curve, crest_factor, exact_curve, papr, papr_db, threshold_grid)
from vibpapr.signal_core import synth_gaussian_set

mpmath.mp.dps = 40


def _exact_mp(p_db, n):
    p = mpmath.mpf(10) ** (mpmath.mpf(p_db) / 10)
    return float(1 - mpmath.erf(mpmath.sqrt(p / 2)) ** n)


def test_papr_basic_values():
    assert papr([1.0, -1.0, 1.0, -1.0]) == 1.0
    assert papr([0.0, 0.0, 0.0, 2.0]) == pytest.approx(4.0)
    assert crest_factor([0.0, 0.0, 0.0, 2.0]) == pytest.approx(2.0)
    assert papr_db(10.0) == pytest.approx(10.0)
    with pytest.raises(DegenerateSignalError):
        papr([0.0, 0.0])


@given(arrays(np.float64, st.integers(2, 200), elements=st.floats(-1e6, 1e6)),
       st.floats(1e-3, 1e3))
def test_papr_bounds_and_scale_invariance(x, c):
    if not np.any(x * x > 0) or np.mean(x * x) < 1e-200:
        return
    r = papr(x)
    assert 1.0 - 1e-12 <= r <= x.size * (1 + 1e-12)
    assert papr(c * x) == pytest.approx(r, rel=1e-9)


@pytest.mark.parametrize("n", [1, 50, 5000])
@pytest.mark.parametrize("p_db", [0.0, 4.0, 8.0, 11.3, 14.0])
def test_exact_ccdf_matches_mpmath(n, p_db):
    assert ccdf_exact(p_db, n) == pytest.approx(_exact_mp(p_db, n), rel=1e-10, abs=1e-300)


def test_exact_ccdf_monotone_in_threshold_and_n():
    grid = threshold_grid(0, 14, 0.1)
    c50 = ccdf_exact(grid, 50)
    c500 = ccdf_exact(grid, 500)
    assert np.all(np.diff(c50) <= 0)
    assert np.all(c500 >= c50)


def test_closed_form_worked_value():
    assert ccdf_closed_form(10.0, 1) == pytest.approx(1.70e-3, rel=5e-3)


def test_closed_form_range_and_limits():
    with pytest.raises(RangeError):
        ccdf_closed_form(2.9, 100)
    v = ccdf_closed_form(threshold_grid(3, 14, 0.1), 500)
    assert np.all((v >= 0) & (v <= 1))


def test_closed_form_converges_to_exact_with_threshold():
    # the asymptotic tail improves as P_o grows; the relative tail error shrinks like 1/P
    errs = [abs(ccdf_closed_form(d, 1) - ccdf_exact(d, 1)) / ccdf_exact(d, 1) for d in (8, 11, 14, 17)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.03


def test_threshold_grid_labels():
    g = threshold_grid(6, 14, 0.1)
    assert g.size == 81 and g[0] == 6.0 and g[-1] == 14.0 and g[3] == 6.3


def test_empirical_strictly_greater():
    c = ccdf_from_papr_db([1.0, 2.0, 3.0], [1.0, 2.0, 2.5], 10)
    assert c.probabilities.tolist() == pytest.approx([2 / 3, 1 / 3, 1 / 3])


def test_empirical_agrees_with_exact_for_white_gaussian():
    s = synth_gaussian_set(4000, 256, 1.0, seed=9)
    grid = np.arange(6.0, 12.01, 1.0)
    emp = ccdf_empirical(s, grid).probabilities
    # binomial standard error at 4000 draws stays below 0.008
    assert np.max(np.abs(emp - ccdf_exact(grid, 256))) < 0.03


def test_curve_csv(tmp_path):
    c = exact_curve([6.0, 7.0], 50)
    c.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "threshold_db,probability,kind,N"
    assert lines[1].endswith(",exact,50")
    assert closed_form_curve([6.0], 50).kind == "closed_form"
    with pytest.raises(ValueError):
        CcdfCurve(np.array([2.0, 1.0]), np.array([0.1, 0.2]), "exact", 5)


def test_stdlib_erfc_has_full_tail_precision():
    for z in (0.5, 2.0, 5.0, 9.0):
        assert math.erfc(z) == pytest.approx(float(mpmath.erfc(z)), rel=1e-13)
