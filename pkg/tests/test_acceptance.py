"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed at session end."""
import json
import time

import numpy as np
import pytest

from vibpapr.compander import (MuLawParams, clipping_noise_approx, clipping_noise_oracle, mu_compress,
                               mu_compress_set, mu_expand)
from vibpapr.papr_stats import ccdf_closed_form, ccdf_empirical, ccdf_exact, threshold_grid
from vibpapr.pipeline import DEFAULT_CONFIG, run_pipeline
from vibpapr.rf_chain import RappParams, rapp_amplify
from vibpapr.signal_core import synth_gaussian_set

from gradcheck import af_error, conv_errors, model_errors, upsample_error

RESULTS: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_closed_form_ccdf():
    def run():
        grid = threshold_grid(6, 14, 0.1)
        return {n: float(np.max(np.abs(ccdf_exact(grid, n) - ccdf_closed_form(grid, n))))
                for n in (50, 500, 5000)}
    gaps, dt = _timed(run)
    ok = max(gaps.values()) < 1e-3 and dt < 1.0
    record(1, ok, "max |exact - closed form| by N: "
           + ", ".join(f"{n}={g:.4f}" for n, g in gaps.items()) + f" (limit 1e-3); {dt:.3f}s")


def test_criterion_02_gaussian_papr_statistics():
    def run():
        s = synth_gaussian_set(10_000, 5000, 1.0, seed=2024)
        grid = np.arange(8.0, 13.01, 0.5)
        emp = ccdf_empirical(s, grid).probabilities
        gap_cf = float(np.max(np.abs(emp - ccdf_closed_form(grid, 5000))))
        gap_ex = float(np.max(np.abs(emp - ccdf_exact(grid, 5000))))
        return gap_cf, gap_ex, ccdf_empirical(s, [10.0]).probabilities[0]
    (gap, gap_ex, at10), dt = _timed(run)
    ok = gap <= 0.02 and at10 > 0.5 and dt < 30
    record(2, ok, f"max |empirical - closed form| over 8..13 dB = {gap:.4f} (limit 0.02); "
           f"against the exact CCDF {gap_ex:.4f}; CCDF(10 dB) = {at10:.3f} (> 0.5); {dt:.1f}s")


def test_criterion_03_mu_law():
    def run():
        rng = np.random.default_rng(3)
        x = rng.uniform(-1.0, 1.0, 10**6)
        p = MuLawParams(255.0, 1.0)
        rt = float(np.max(np.abs(mu_expand(mu_compress(x, p), p) - x)))
        s = synth_gaussian_set(1000, 5000, 1.0, seed=3).matrix
        y, _ = mu_compress_set(s, 255.0)
        return rt, float(np.mean(np.mean(y * y, axis=1)) / np.mean(np.mean(s * s, axis=1)))
    (rt, ratio), dt = _timed(run)
    ok = rt < 1e-9 and ratio > 5.0 and dt < 5
    record(3, ok, f"roundtrip max error {rt:.2e} (< 1e-9); power ratio {ratio:.2f}x (> 5x); {dt:.2f}s")


def test_criterion_04_clipping_noise_estimator():
    def run():
        out = {}
        for db in (6.0, 8.0, 10.0):
            est = clipping_noise_oracle(db, 1.0, n_mc=10**7, seed=int(db))
            out[db] = abs(clipping_noise_approx(db, 1.0) - est.value) / est.value
        return out
    errs, dt = _timed(run)
    ok = max(errs.values()) <= 0.25 and dt < 20
    record(4, ok, "relative error vs Monte-Carlo: "
           + ", ".join(f"{d:g} dB={e:.1%}" for d, e in errs.items()) + f" (limit 25%); {dt:.1f}s")


def test_criterion_05_rapp_model():
    def run():
        a_sat = 1.7
        x = np.random.default_rng(5).standard_normal(200_000) * 50
        bounded = bool(np.all(np.abs(rapp_amplify(x, RappParams(a_sat, 1.0, 2.0))) < a_sat))
        small = np.linspace(1e-4, 0.05 * a_sat, 500)
        gain_err = float(np.max(np.abs(rapp_amplify(small, RappParams(a_sat, 1.0, 2.0)) / small - 1.0)))
        hard = float(np.abs(rapp_amplify(np.array([1.5 * a_sat]), RappParams(a_sat, 1.0, 100.0))[0] - a_sat) / a_sat)
        return bounded, gain_err, hard
    (bounded, gain_err, hard), dt = _timed(run)
    ok = bounded and gain_err < 0.005 and hard < 0.01 and dt < 1
    record(5, ok, f"|out| < A_sat: {bounded}; small-signal gain error {gain_err:.2e} (< 0.5%); "
           f"p=100 deviation from A_sat {hard:.2e} (< 1%); {dt:.2f}s")


def test_criterion_06_gradient_check():
    def run():
        errs = {f"conv stride{s} {k}": v for s in (1, 2) for k, v in conv_errors(s).items()}
        errs["upsample"] = upsample_error()
        errs["af activation"] = af_error()
        for role in ("source", "destination"):
            errs.update({f"{role} {k}": v for k, v in model_errors(role).items()})
        return errs
    errs, dt = _timed(run)
    worst = max(errs, key=errs.get)
    ok = errs[worst] < 1e-5 and dt < 10
    record(6, ok, f"{len(errs)} gradient tensors; worst relative error {errs[worst]:.1e} ({worst}); {dt:.2f}s")


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    t0 = time.perf_counter()
    rep = run_pipeline(DEFAULT_CONFIG, out / "run1")
    return rep, time.perf_counter() - t0, out


def test_criterion_07_end_to_end_companding(desk_run):
    rep, dt, _ = desk_run
    ds = rep.doc["dataset"]
    ae, unc = rep.doc["arms"]["autoencoder"], rep.doc["arms"]["uncompanded"]
    epochs = max(rep.doc["autoencoder"]["source_epochs"], rep.doc["autoencoder"]["destination_epochs"])
    a = ae["ccdf_at_8db"] <= 0.10
    b = ae["evm_percent"] <= 0.5 * unc["evm_percent"]
    c = ae["avg_power_ratio"] <= 1.05
    ok = a and b and c and ds["n_train"] == 2000 and ds["n_test"] == 600 and epochs <= 200 and dt < 300
    record(7, ok, f"(a) CCDF@8dB {ae['ccdf_at_8db']:.3f} vs uncompressed {unc['ccdf_at_8db']:.3f}; "
           f"(b) EVM {ae['evm_percent']:.2f}% vs uncompanded {unc['evm_percent']:.2f}% "
           f"(mu-law {rep.doc['arms']['mu_law']['evm_percent']:.2f}%); "
           f"(c) power ratio {ae['avg_power_ratio']:.3f}; epochs <= {epochs}; {dt:.0f}s")


def test_criterion_08_denoising(desk_run):
    rep, _, _ = desk_run
    snr = rep.doc["arms"]["autoencoder"]["snr_d"]
    g0, g5 = snr["0"]["improvement_db"], snr["-5"]["improvement_db"]
    ok = g0 >= 2.0 and g5 >= 3.0
    record(8, ok, f"SNR_d improvement {g0:.2f} dB at 0 dB (>= 2), {g5:.2f} dB at -5 dB (>= 3)")


def test_criterion_09_spectral_spreading(desk_run):
    rep, _, _ = desk_run
    arms = rep.doc["arms"]
    mu, ae = arms["mu_law"]["psd_highband_fraction"], arms["autoencoder"]["psd_highband_fraction"]
    t = rep.timings.get("arm_mu_law", 0) + rep.timings.get("arm_autoencoder", 0)
    ok = mu > ae and t < 30
    record(9, ok, f"high-band power fraction after HPA: mu-law {mu:.2e} > proposed {ae:.2e} "
           f"(uncompanded {arms['uncompanded']['psd_highband_fraction']:.2e}); {t:.1f}s")


def test_criterion_10_determinism(desk_run):
    _, dt7, out = desk_run
    t0 = time.perf_counter()
    run_pipeline(DEFAULT_CONFIG, out / "run2")
    dt = time.perf_counter() - t0
    names = sorted(p.name for p in (out / "run1").iterdir() if p.name != "timings.json")
    same = [(out / "run1" / n).read_bytes() == (out / "run2" / n).read_bytes() for n in names]
    report_same = json.loads((out / "run1" / "report.json").read_text()) == \
        json.loads((out / "run2" / "report.json").read_text())
    ok = all(same) and report_same and dt < 2 * 300
    record(10, ok, f"{sum(same)}/{len(names)} output files byte-identical across two runs; rerun {dt:.0f}s")
