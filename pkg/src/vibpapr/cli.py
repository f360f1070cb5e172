"""Command-line front end: one subcommand per library operation plus the full chain."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics as met
from .compander import mu_compress_set, mu_expand_set
from .errors import (DegenerateSignalError, FormatError, ParameterError, RangeError, TrainingFailure,
                     VibPaprError)
from .neural.model import build_model, forward, load_model, save_model
from .neural.train import TrainConfig, train_destination, train_source
from .papr_stats import (ccdf_empirical, closed_form_curve, exact_curve, papr_db, papr_rows,
                         threshold_grid)
from .pipeline import OUTPUT_DIR_ENV, ExperimentConfig, run_pipeline
from .rf_chain import RappParams, add_awgn, apply_ibo, rapp_amplify, saturation_from_set
from .signal_core import (SignalSet, load_bundle, load_csv, save_bundle, smooth_array, synth_gaussian_set,
                          synth_vibration_corpus)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 2, 3, 4


def _read_set(path: str) -> SignalSet:
    if str(path).lower().endswith(".csv"):
        return load_csv(path)
    return load_bundle(path)


def _like(template: SignalSet, matrix: np.ndarray, tag: str) -> SignalSet:
    return SignalSet.from_matrix(matrix, template.sample_rate_hz, template.labels,
                                 f"{template.source_id}|{tag}")


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


# -- subcommands ------------------------------------------------------------------

def cmd_gen(a):
    if a.gaussian:
        sset = synth_gaussian_set(a.n_signals, a.len, a.sigma, a.seed, a.fs)
    else:
        sset = synth_vibration_corpus(a.n_signals, a.len, a.seed, a.sigma, a.corr_len, a.noise_snr_db, a.fs)
    save_bundle(sset, a.out)


def cmd_smooth(a):
    sset = _read_set(a.input)
    save_bundle(_like(sset, smooth_array(sset.matrix, a.window), f"smooth{a.window}"), a.out)


def cmd_papr(a):
    sset = _read_set(a.input)
    grid = threshold_grid(a.from_db, a.to_db, a.step)
    ccdf_empirical(sset, grid).to_csv(a.out)
    if a.values_out:
        with open(a.values_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "papr_db"])
            for i, v in enumerate(papr_db(papr_rows(sset.matrix))):
                w.writerow([i, repr(float(v))])


def cmd_ccdf(a):
    grid = threshold_grid(a.from_db, a.to_db, a.step)
    curve = closed_form_curve(grid, a.n) if a.closed_form else exact_curve(grid, a.n)
    curve.to_csv(a.out)


def cmd_compand(a):
    sset = _read_set(a.input)
    side = Path(str(a.out) + ".norm.json")
    if a.expand:
        src = Path(a.norm_file) if a.norm_file else Path(str(a.input) + ".norm.json")
        try:
            norm_a = np.asarray(json.loads(src.read_text())["norm_a"], dtype=np.float64)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise FormatError(f"norm_a: cannot read {src} ({exc})") from exc
        save_bundle(_like(sset, mu_expand_set(sset.matrix, norm_a, a.mu), "mu_expand"), a.out)
    else:
        y, norm_a = mu_compress_set(sset.matrix, a.mu)
        save_bundle(_like(sset, y, "mu_compress"), a.out)
        side.write_text(json.dumps({"mu": a.mu, "norm_a": [float(v) for v in norm_a]}))


def _train_cfg(a) -> TrainConfig:
    return TrainConfig(learning_rate=a.lr, batch_size=a.batch_size, max_epochs=a.epochs, seed=a.seed)


def cmd_train_source(a):
    raw = _read_set(a.input)
    target = _read_set(a.target).matrix if a.target else smooth_array(raw.matrix, a.smooth_window)
    model = load_model(a.resume) if a.resume else build_model("source", raw.segment_len, seed=a.seed)
    model, hist = train_source(model, raw, target, _train_cfg(a))
    save_model(model, a.out)
    print(json.dumps({"epochs_run": len(hist), "final_loss": hist[-1] if hist else None,
                      "loss_floor_cl": model.training_meta["loss_floor_cl"]}))


def cmd_train_dest(a):
    target = _read_set(a.target)
    if a.source_model:
        inputs = forward(load_model(a.source_model), target.matrix)
    elif a.input:
        inputs = _read_set(a.input).matrix
    else:
        raise ParameterError("train-dest needs --in or --source-model")
    if a.snr_db:
        rng = np.random.default_rng([a.seed, 7])
        labels = np.resize(np.asarray(a.snr_db, dtype=np.float64), inputs.shape[0])
        rng.shuffle(labels)
        noisy = np.empty_like(inputs)
        for s in np.unique(labels):
            noisy[labels == s] = add_awgn(inputs[labels == s], float(s), rng)
        inputs = noisy
    model = load_model(a.resume) if a.resume else build_model("destination", target.segment_len, seed=a.seed)
    model, hist = train_destination(model, inputs, target, _train_cfg(a))
    save_model(model, a.out)
    print(json.dumps({"epochs_run": len(hist), "final_loss": hist[-1] if hist else None}))


def cmd_chain(a):
    if a.config:
        cfg = ExperimentConfig.load(a.config)
        if a.seed is not None:
            cfg.raw["seed"] = a.seed
        report = run_pipeline(cfg, a.out)
        print(json.dumps(report.doc["arms"], indent=1, sort_keys=True))
        return
    if not (a.input and a.out):
        raise ParameterError("stage mode needs --in and --out (or pass --config)")
    sset = _read_set(a.input)
    x = sset.matrix
    if a.source_model:
        x = forward(load_model(a.source_model), x)
    if a.ibo_db:
        x = apply_ibo(x, a.ibo_db)
    if a.hpa:
        a_sat = a.a_sat if a.a_sat is not None else saturation_from_set(sset)
        x = rapp_amplify(x, RappParams(a_sat=a_sat, gain_a=a.gain, p=a.p))
    if a.snr_db is not None:
        x = add_awgn(x, a.snr_db, np.random.default_rng(a.seed or 0))
    if a.dest_model:
        x = forward(load_model(a.dest_model), x)
    save_bundle(_like(sset, x, "chain"), a.out)


def cmd_evm(a):
    ref = met.constellation(_read_set(a.ref), source_tag="reference")
    sset = _read_set(a.input)
    got = met.constellation(sset, source_tag=a.tag)
    value = met.evm(met.error_vectors(got, ref), ref, a.statistic)
    if a.constellation_out:
        got.to_csv(a.constellation_out)
    _emit({"evm_percent": value, "statistic": a.statistic}, a.out)


def cmd_psd(a):
    sset = _read_set(a.input)
    psd = met.mean_psd(sset, a.fs, a.window_len, a.overlap, a.nfft)
    psd.to_csv(a.out)
    total = psd.integrate()
    print(json.dumps({"total_power": total,
                      "highband_fraction": met.highband_power(psd, a.quantile) / total}))


def cmd_snrd(a):
    vals = met.snr_d_rows(_read_set(a.ref).matrix, _read_set(a.input).matrix)
    doc = {"snr_d_db": float(np.mean(vals))}
    if a.input_snr_db is not None:
        doc["improvement_db"] = doc["snr_d_db"] - a.input_snr_db
    _emit(doc, a.out)


def cmd_report(a):
    path = Path(a.dir) / "report.json"
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"report: cannot read {path} ({exc})") from exc
    rows = []
    for arm, res in doc.get("arms", {}).items():
        if "error" in res:
            rows.append([arm, "error", res["error"]["message"]])
            continue
        for key in ("ccdf_at_8db", "avg_power_ratio", "evm_percent", "psd_highband_fraction"):
            if key in res:
                rows.append([arm, key, repr(res[key])])
        for snr, v in res.get("snr_d", {}).items():
            rows.append([arm, f"snr_d_improvement_at_{snr}db", repr(v["improvement_db"])])
    out = open(a.out, "w", newline="") if a.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["arm", "metric", "value"])
        w.writerows(rows)
    finally:
        if a.out:
            out.close()


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vibpapr", description="PAPR analysis and companding of vibration signals")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, out_required=True):
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
        sp.add_argument("--seed", type=int, default=None if name == "chain" else 0)
        sp.add_argument("--out", required=out_required)
        return sp

    sp = add("gen", cmd_gen)
    kind = sp.add_mutually_exclusive_group()
    kind.add_argument("--gaussian", action="store_true")
    kind.add_argument("--vibration", action="store_true")
    sp.add_argument("--n-signals", type=int, required=True)
    sp.add_argument("--len", type=int, required=True)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--fs", type=float, default=64000.0)
    sp.add_argument("--corr-len", type=int, default=8)
    sp.add_argument("--noise-snr-db", type=float, default=20.0)

    sp = add("smooth", cmd_smooth)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--window", type=int, default=9)

    sp = add("papr", cmd_papr)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--from-db", type=float, default=0.0)
    sp.add_argument("--to-db", type=float, default=14.0)
    sp.add_argument("--step", type=float, default=0.1)
    sp.add_argument("--values-out")

    sp = add("ccdf", cmd_ccdf)
    form = sp.add_mutually_exclusive_group()
    form.add_argument("--closed-form", action="store_true")
    form.add_argument("--exact", action="store_true")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--from-db", type=float, default=6.0)
    sp.add_argument("--to-db", type=float, default=14.0)
    sp.add_argument("--step", type=float, default=0.1)

    sp = add("compand", cmd_compand)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--mu", type=float, default=255.0)
    sp.add_argument("--expand", action="store_true")
    sp.add_argument("--norm-file")

    for name, fn in (("train-source", cmd_train_source), ("train-dest", cmd_train_dest)):
        sp = add(name, fn)
        sp.add_argument("--in", dest="input", required=(name == "train-source"))
        sp.add_argument("--target")
        sp.add_argument("--epochs", type=int, default=200)
        sp.add_argument("--lr", type=float, default=1e-3)
        sp.add_argument("--batch-size", type=int, default=32)
        sp.add_argument("--resume")
        if name == "train-source":
            sp.add_argument("--smooth-window", type=int, default=9)
        else:
            sp.add_argument("--source-model")
            sp.add_argument("--snr-db", type=float, nargs="*")

    sp = add("chain", cmd_chain, out_required=False)
    sp.add_argument("--config")
    sp.add_argument("--in", dest="input")
    sp.add_argument("--source-model")
    sp.add_argument("--dest-model")
    sp.add_argument("--ibo-db", type=float, default=0.0)
    sp.add_argument("--hpa", action="store_true")
    sp.add_argument("--a-sat", type=float)
    sp.add_argument("--gain", type=float, default=1.0)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--snr-db", type=float)

    sp = add("evm", cmd_evm, out_required=False)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--statistic", choices=("rms", "mean"), default="rms")
    sp.add_argument("--tag", default="processed")
    sp.add_argument("--constellation-out")

    sp = add("psd", cmd_psd)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--fs", type=float)
    sp.add_argument("--window-len", type=int)
    sp.add_argument("--overlap", type=float, default=0.5)
    sp.add_argument("--nfft", type=int)
    sp.add_argument("--quantile", type=float, default=0.9)

    sp = add("snrd", cmd_snrd, out_required=False)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--input-snr-db", type=float)

    sp = add("report", cmd_report, out_required=False)
    sp.add_argument("--dir", default=os.environ.get(OUTPUT_DIR_ENV, "vibpapr_out"))
    return p


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, TrainingFailure):
        return EXIT_TRAINING
    if isinstance(exc, (FormatError, DegenerateSignalError, RangeError, OSError)):
        return EXIT_DATA
    if isinstance(exc, ParameterError):
        return EXIT_USAGE
    return EXIT_DATA


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (VibPaprError, OSError) as exc:
        print(f"vibpapr {args.command}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
