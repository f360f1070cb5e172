import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vibpapr.errors import FormatError, ParameterError
from vibpapr.signal_core import (SignalSet, VibrationSignal, concatenate, load_bundle, load_csv,
                                 save_bundle, segment, smooth, smooth_array, synth_gaussian_set,
                                 synth_gaussian_vibration, synth_vibration_corpus)


def test_signal_validation():
    with pytest.raises(ParameterError):
        VibrationSignal([1.0], 1.0)
    with pytest.raises(FormatError):
        VibrationSignal([1.0, np.nan], 1.0)
    with pytest.raises(ParameterError):
        VibrationSignal([1.0, 2.0], 0.0)
    s = VibrationSignal([1.0, 2.0], 10.0, "a")
    with pytest.raises(ValueError):
        s.samples[0] = 5.0


def test_set_rejects_mixed_lengths():
    with pytest.raises(ParameterError):
        SignalSet((VibrationSignal([1.0, 2.0], 1.0), VibrationSignal([1.0, 2.0, 3.0], 1.0)), 2)


def test_gaussian_generator_is_seeded_and_scaled():
    a = synth_gaussian_vibration(20000, 2.0, seed=3)
    b = synth_gaussian_vibration(20000, 2.0, seed=3)
    assert np.array_equal(a.samples, b.samples)
    assert abs(np.std(a.samples) - 2.0) < 0.05
    s = synth_gaussian_set(4, 100, 1.0, seed=1)
    assert s.matrix.shape == (4, 100)


def test_vibration_corpus_variance_and_correlation():
    s = synth_vibration_corpus(200, 512, seed=0, sigma=1.5, corr_len=8, noise_snr_db=20.0)
    var = np.var(s.matrix)
    assert abs(var - 1.5 ** 2 * 1.01) / var < 0.05
    m = s.matrix
    lag1 = np.mean(m[:, 1:] * m[:, :-1]) / np.mean(m * m)
    assert lag1 > 0.6


def test_segment_drops_tail():
    sig = VibrationSignal(np.arange(10.0), 2.0, "x")
    sset = segment(sig, 3)
    assert sset.matrix.shape == (3, 3)
    assert np.array_equal(concatenate(sset).samples, np.arange(9.0))
    with pytest.raises(ParameterError):
        segment(sig, 11)


def test_smooth_matches_direct_average():
    x = np.random.default_rng(0).standard_normal(50)
    y = smooth_array(x, 5)
    # interior points are plain 5-point means
    for i in range(2, 48):
        assert y[i] == pytest.approx(x[i - 2:i + 3].mean(), abs=1e-12)
    # reflect padding at the edge
    assert y[0] == pytest.approx(np.mean([x[2], x[1], x[0], x[1], x[2]]))
    with pytest.raises(ParameterError):
        smooth_array(x, 4)
    assert np.array_equal(smooth_array(x, 1), x)


def test_smooth_dispatch():
    sset = synth_gaussian_set(3, 40, 1.0, seed=2)
    assert isinstance(smooth(sset, 3), SignalSet)
    assert isinstance(smooth(sset[0], 3), VibrationSignal)


@given(arrays(np.float64, st.integers(10, 60), elements=st.floats(-1e3, 1e3)), st.sampled_from([3, 5, 7]))
def test_smooth_preserves_mean_of_constant_and_bounds(x, w):
    y = smooth_array(x, w)
    assert y.shape == x.shape
    assert np.all(y <= x.max() + 1e-9) and np.all(y >= x.min() - 1e-9)


def test_bundle_roundtrip(tmp_path):
    sset = synth_gaussian_set(5, 33, 1.0, seed=4, sample_rate_hz=250.0)
    path = tmp_path / "b.bin"
    save_bundle(sset, path)
    back = load_bundle(path)
    assert np.array_equal(back.matrix, sset.matrix)
    assert back.sample_rate_hz == 250.0
    assert back.labels == sset.labels
    assert path.stat().st_size == 5 * 33 * 8


@pytest.mark.parametrize("field,value", [("version", 9), ("n_signals", 0), ("n_samples", "x"),
                                         ("sample_rate_hz", -1), ("labels", ["a"])])
def test_bundle_corrupt_header_names_field(tmp_path, field, value):
    sset = synth_gaussian_set(3, 8, 1.0, seed=0)
    path = tmp_path / "b.bin"
    save_bundle(sset, path)
    hdr = json.loads((tmp_path / "b.bin.json").read_text())
    hdr[field] = value
    (tmp_path / "b.bin.json").write_text(json.dumps(hdr))
    with pytest.raises(FormatError, match=field):
        load_bundle(path)


def test_bundle_truncated_payload(tmp_path):
    sset = synth_gaussian_set(3, 8, 1.0, seed=0)
    path = tmp_path / "b.bin"
    save_bundle(sset, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError, match="n_signals"):
        load_bundle(path)


def test_bundle_nonfinite_payload(tmp_path):
    sset = synth_gaussian_set(2, 4, 1.0, seed=0)
    path = tmp_path / "b.bin"
    save_bundle(sset, path)
    raw = np.fromfile(path, dtype="<f8")
    raw[5] = np.inf
    raw.tofile(path)
    with pytest.raises(FormatError, match="signal 1, sample 1"):
        load_bundle(path)


def test_csv_import(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("1,2,3\n4,5,6\n")
    s = load_csv(p, 10.0)
    assert s.matrix.tolist() == [[1, 2, 3], [4, 5, 6]]
    p.write_text("1,2,3\n4,x,6\n")
    with pytest.raises(FormatError, match="row 2"):
        load_csv(p)
