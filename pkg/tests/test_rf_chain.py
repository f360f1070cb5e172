import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vibpapr.errors import DegenerateSignalError, ParameterError
from vibpapr.rf_chain import RappParams, add_awgn, apply_ibo, rapp_amplify, saturation_from_set


def _rapp_direct(x, a_sat, gain, p):
    v = gain * x
    return v / (1 + (np.abs(v) / a_sat) ** (2 * p)) ** (1 / (2 * p))


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-1e6, 1e6)),
       st.floats(0.1, 10), st.floats(0.5, 5), st.floats(0.5, 20))
def test_rapp_bounded_odd_monotone(x, a_sat, gain, p):
    prm = RappParams(a_sat, gain, p)
    y = rapp_amplify(x, prm)
    assert np.all(np.abs(y) <= a_sat)
    assert np.allclose(rapp_amplify(-x, prm), -y)
    xs = np.sort(x)
    assert np.all(np.diff(rapp_amplify(xs, prm)) >= -1e-12)


def test_rapp_matches_direct_formula_in_safe_range():
    x = np.linspace(-3, 3, 101)
    assert np.allclose(rapp_amplify(x, RappParams(1.2, 1.5, 3)), _rapp_direct(x, 1.2, 1.5, 3), rtol=1e-13)


def test_rapp_finite_for_huge_input():
    y = rapp_amplify(np.array([1e300, -1e300]), RappParams(2.0, 1.0, 50))
    assert np.allclose(y, [2.0, -2.0])


def test_rapp_validation():
    for bad in ({"a_sat": 0}, {"gain_a": -1}, {"p": 0}):
        with pytest.raises(ParameterError):
            RappParams(**bad)
    with pytest.raises(ParameterError):
        rapp_amplify(np.array([np.nan]), RappParams())


def test_ibo():
    assert np.allclose(apply_ibo(np.array([1.0]), 20.0), 0.1)
    with pytest.raises(ParameterError):
        apply_ibo(np.ones(2), -1)


def test_awgn_snr_per_row():
    x = np.vstack([np.sin(np.linspace(0, 50, 100000)), 5 * np.cos(np.linspace(0, 40, 100000))])
    y = add_awgn(x, 3.0, 7)
    snr = 10 * np.log10(np.mean(x * x, axis=1) / np.mean((y - x) ** 2, axis=1))
    assert np.allclose(snr, 3.0, atol=0.05)
    assert np.array_equal(y, add_awgn(x, 3.0, 7))
    with pytest.raises(DegenerateSignalError):
        add_awgn(np.zeros(5), 0.0, 1)


def test_saturation_from_set():
    m = np.array([[1.0, -1.0], [2.0, 2.0]])
    assert saturation_from_set(m) == pytest.approx(2.5)
