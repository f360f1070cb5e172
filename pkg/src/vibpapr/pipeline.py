"""Config-driven experiment runner: compress, amplify, corrupt, expand, measure."""
from __future__ import annotations

import copy
import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as met
from .compander import mu_compress_set, mu_expand_set
from .errors import FormatError, ParameterError, VibPaprError
from .neural.model import build_model, forward, load_model, save_model
from .neural.train import TrainConfig, train_destination, train_source
from .papr_stats import ccdf_empirical, papr_db, papr_rows, threshold_grid
from .rf_chain import RappParams, add_awgn, apply_ibo, rapp_amplify, saturation_from_set
from .signal_core import (SignalSet, load_bundle, smooth_array, synth_gaussian_set,
                          synth_vibration_corpus)

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
ARMS = ("uncompanded", "mu_law", "autoencoder")
OUTPUT_DIR_ENV = "VIBPAPR_OUTPUT_DIR"

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "dataset": {"synthetic": {"kind": "vibration", "n_signals": 2600, "n_samples": 512, "sigma": 1.0,
                              "corr_len": 8, "noise_snr_db": 20.0, "sample_rate_hz": 64000.0, "seed": 1}},
    "split": {"train": 2000 / 2600, "test": 600 / 2600, "seed": 0},
    "smoothing_window": 5,
    "arms": list(ARMS),
    "mu_law": {"mu": 255.0},
    "autoencoder": {
        "source_model": None,
        "destination_model": None,
        "noisy_destination_model": None,
        "source_train": {"max_epochs": 200, "seed": 0},
        "destination_train": {"max_epochs": 30, "seed": 1},
        "noisy_train_snr_db": [-5.0, 0.0],
    },
    "hpa": {"enabled": True, "a_sat": None, "gain_a": 1.0, "p": 2.0},
    "ibo_db": 0.0,
    "channel": {"snr_db": [0.0, -5.0]},
    "metrics": {"ccdf": True, "power": True, "evm": True, "psd": True, "snr_d": True},
    "ccdf_grid_db": {"from": 0.0, "to": 14.0, "step": 0.1},
    "psd_highband_quantile": 0.9,
    "output_dir": "vibpapr_out",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "dataset":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise FormatError("config: expected a JSON object")
        if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise FormatError(f"version: unsupported config version {doc.get('version')!r}")
        cfg = cls(_merge(DEFAULT_CONFIG, doc))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"config: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def __getitem__(self, key):
        return self.raw[key]

    def validate(self) -> None:
        r = self.raw
        split = r["split"]
        if abs(split["train"] + split["test"] - 1.0) > 1e-9 or split["train"] < 0 or split["test"] <= 0:
            raise ParameterError("split fractions must be non-negative and sum to 1")
        unknown = set(r["arms"]) - set(ARMS)
        if unknown:
            raise ParameterError(f"unknown arms {sorted(unknown)}")
        ds = r["dataset"]
        if ("bundle" in ds) == ("synthetic" in ds):
            raise ParameterError("dataset needs exactly one of 'bundle' or 'synthetic'")
        if "synthetic" in ds and ds["synthetic"].get("kind", "vibration") not in ("vibration", "gaussian"):
            raise ParameterError("synthetic kind must be 'vibration' or 'gaussian'")
        if r["ibo_db"] < 0:
            raise ParameterError("ibo_db must be non-negative")
        ae = r["autoencoder"]
        for key in ("source_model", "destination_model", "noisy_destination_model"):
            if ae.get(key) and not Path(ae[key]).exists():
                raise ParameterError(f"autoencoder.{key}: {ae[key]} does not exist")
        if r["channel"] is not None and not isinstance(r["channel"].get("snr_db", []), list):
            raise ParameterError("channel.snr_db must be a list")


@dataclass
class ExperimentReport:
    doc: dict
    timings: dict

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=1, sort_keys=True, allow_nan=True)


# -- dataset --------------------------------------------------------------------

def load_dataset(cfg: ExperimentConfig) -> SignalSet:
    ds = cfg["dataset"]
    if "bundle" in ds:
        return load_bundle(ds["bundle"])
    syn = dict(ds["synthetic"])
    kind = syn.pop("kind", "vibration")
    if kind == "gaussian":
        return synth_gaussian_set(syn.get("n_signals", 1000), syn.get("n_samples", 512), syn.get("sigma", 1.0),
                                  syn.get("seed", 0), syn.get("sample_rate_hz", 1.0))
    return synth_vibration_corpus(syn.get("n_signals", 2600), syn.get("n_samples", 512), syn.get("seed", 0),
                                  syn.get("sigma", 1.0), syn.get("corr_len", 8), syn.get("noise_snr_db", 20.0),
                                  syn.get("sample_rate_hz", 64000.0))


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation cut into train and test index arrays."""
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(train_fraction * n))
    return order[:n_train], order[n_train:]


# -- autoencoder companding -----------------------------------------------------

def _noisy_training_inputs(y: np.ndarray, snrs: list[float], seed: int) -> np.ndarray:
    # equal share of each SNR, assignment shuffled
    rng = np.random.default_rng(seed)
    labels = np.resize(np.asarray(snrs, dtype=np.float64), y.shape[0])
    rng.shuffle(labels)
    out = np.empty_like(y)
    for s in np.unique(labels):
        sel = labels == s
        out[sel] = add_awgn(y[sel], float(s), rng)
    return out


def prepare_autoencoders(cfg: ExperimentConfig, train: SignalSet, out_dir: Path | None, need_noisy: bool):
    ae = cfg["autoencoder"]
    seg = train.segment_len
    if ae.get("source_model"):
        src = load_model(ae["source_model"])
    else:
        tc = TrainConfig(**ae["source_train"])
        target = smooth_array(train.matrix, cfg["smoothing_window"])
        src, _ = train_source(build_model("source", seg, seed=tc.seed), train.matrix, target, tc)
    y_train = forward(src, train.matrix)
    tc = TrainConfig(**ae["destination_train"])
    if ae.get("destination_model"):
        dst = load_model(ae["destination_model"])
    else:
        dst, _ = train_destination(build_model("destination", seg, seed=tc.seed), y_train, train.matrix, tc)
    noisy = None
    if need_noisy:
        if ae.get("noisy_destination_model"):
            noisy = load_model(ae["noisy_destination_model"])
        else:
            inputs = _noisy_training_inputs(y_train, ae["noisy_train_snr_db"], cfg["seed"] + 7919)
            noisy, _ = train_destination(build_model("destination", seg, seed=tc.seed + 1), inputs,
                                         train.matrix, tc)
    if out_dir is not None:
        save_model(src, out_dir / "source_model.json")
        save_model(dst, out_dir / "destination_model.json")
        if noisy is not None:
            save_model(noisy, out_dir / "noisy_destination_model.json")
    return src, dst, noisy


# -- arms -------------------------------------------------------------------------

class _Arm:
    """Compression and expansion hooks for one companding scheme."""

    def __init__(self, name, cfg, models):
        self.name = name
        self.mu = cfg["mu_law"]["mu"]
        self.models = models
        self.norm_a = None

    def compress(self, x):
        if self.name == "mu_law":
            y, self.norm_a = mu_compress_set(x, self.mu)
            return y
        if self.name == "autoencoder":
            return forward(self.models[0], x)
        return x.copy()

    def expand(self, y, noisy: bool = False):
        if self.name == "mu_law":
            return mu_expand_set(y, self.norm_a, self.mu)
        if self.name == "autoencoder":
            model = self.models[2] if noisy and self.models[2] is not None else self.models[1]
            return forward(model, y)
        return y

    def power_reference(self, x):
        # the autoencoder emits network units, so compare against the originals in those units
        if self.name == "autoencoder":
            return x / self.models[0].norm_scale
        return x


def _run_arm(arm: _Arm, test: SignalSet, cfg: ExperimentConfig, hpa: RappParams | None, grid, out_dir):
    x = test.matrix
    flags = cfg["metrics"]
    res: dict = {}
    y = arm.compress(x)
    if flags.get("ccdf"):
        pd = papr_db(papr_rows(y))
        curve = ccdf_empirical(y, grid)
        res["papr_db_mean"] = float(np.mean(pd))
        res["ccdf_at_8db"] = float(np.mean(pd > 8.0))
        if out_dir is not None:
            curve.to_csv(out_dir / f"ccdf_{arm.name}.csv")
    if flags.get("power"):
        res["avg_power_ratio"] = met.avg_power_ratio(y, arm.power_reference(x))
        res["peak_amplitude"] = float(np.max(np.abs(y)))
    tx = apply_ibo(y, cfg["ibo_db"]) if cfg["ibo_db"] else y
    amp = rapp_amplify(tx, hpa) if hpa is not None else tx
    if flags.get("psd"):
        psd = met.mean_psd(amp, test.sample_rate_hz)
        total = psd.integrate()
        res["psd_total_power"] = total
        res["psd_highband_fraction"] = met.highband_power(psd, cfg["psd_highband_quantile"]) / total
        if out_dir is not None:
            psd.to_csv(out_dir / f"psd_{arm.name}.csv")
    rx = arm.expand(amp)
    if flags.get("evm"):
        ref = met.constellation(test, source_tag="reference")
        got = met.constellation(rx, test.labels, source_tag=arm.name)
        res["evm_percent"] = met.evm(met.error_vectors(got, ref), ref)
        if out_dir is not None:
            got.to_csv(out_dir / f"constellation_{arm.name}.csv")
    channel = cfg["channel"]
    if flags.get("snr_d") and channel:
        res["snr_d"] = {}
        for k, snr in enumerate(channel.get("snr_db", [])):
            # same noise stream for every arm so differences isolate the compander
            noisy = add_awgn(amp, snr, np.random.default_rng([cfg["seed"], 101, k]))
            est = arm.expand(noisy, noisy=True)
            vals = met.snr_d_rows(x, est)
            res["snr_d"][f"{snr:g}"] = {"snr_d_db": float(np.mean(vals)),
                                        "improvement_db": float(np.mean(vals) - snr)}
    return res


def run_pipeline(config: ExperimentConfig | dict, output_dir=None) -> ExperimentReport:
    """Execute every configured arm on the shared test split and write report + CSVs."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    out_dir = output_dir or os.environ.get(OUTPUT_DIR_ENV) or cfg["output_dir"]
    out_dir = Path(out_dir) if out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    data = load_dataset(cfg)
    tr_idx, te_idx = split_indices(len(data), cfg["split"]["train"], cfg["split"]["seed"])
    test = data.subset(te_idx, "test")
    train = data.subset(tr_idx, "train") if tr_idx.size else None
    grid = threshold_grid(cfg["ccdf_grid_db"]["from"], cfg["ccdf_grid_db"]["to"], cfg["ccdf_grid_db"]["step"])
    hpa = None
    if cfg["hpa"] and cfg["hpa"].get("enabled", True):
        a_sat = cfg["hpa"].get("a_sat") or saturation_from_set(test)
        hpa = RappParams(a_sat=a_sat, gain_a=cfg["hpa"].get("gain_a", 1.0), p=cfg["hpa"].get("p", 2.0))
    timings["data"] = time.perf_counter() - t0

    doc: dict = {
        "config": cfg.raw,
        "versions": {"vibpapr": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "seeds": {"master": cfg["seed"], "split": cfg["split"]["seed"]},
        "dataset": {"source_id": data.source_id, "n_signals": len(data), "n_samples": data.segment_len,
                    "n_train": int(tr_idx.size), "n_test": int(te_idx.size),
                    "test_indices_head": [int(i) for i in te_idx[:10]]},
        "hpa": None if hpa is None else {"a_sat": hpa.a_sat, "gain_a": hpa.gain_a, "p": hpa.p},
        "arms": {},
    }
    ref_curve = ccdf_empirical(test, grid)
    doc["reference"] = {"ccdf_at_8db": ref_curve.at(8.0),
                        "papr_db_mean": float(np.mean(papr_db(papr_rows(test.matrix))))}
    if out_dir is not None:
        ref_curve.to_csv(out_dir / "ccdf_reference.csv")

    models = (None, None, None)
    if "autoencoder" in cfg["arms"]:
        t1 = time.perf_counter()
        need_noisy = bool(cfg["channel"]) and bool(cfg["metrics"].get("snr_d"))
        try:
            if train is None and not cfg["autoencoder"].get("source_model"):
                raise ParameterError("autoencoder arm needs training data or pretrained models")
            models = prepare_autoencoders(cfg, train, out_dir, need_noisy)
            src = models[0]
            doc["autoencoder"] = {
                "source_epochs": src.training_meta.get("epochs_run"),
                "source_loss_floor_cl": src.training_meta.get("loss_floor_cl"),
                "source_final_loss": src.training_meta.get("final_loss"),
                "destination_epochs": models[1].training_meta.get("epochs_run"),
                "norm_scale": src.norm_scale,
            }
        except VibPaprError as exc:
            doc["arms"]["autoencoder"] = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        timings["training"] = time.perf_counter() - t1

    for name in cfg["arms"]:
        if name in doc["arms"]:
            continue
        t1 = time.perf_counter()
        try:
            doc["arms"][name] = _run_arm(_Arm(name, cfg, models), test, cfg, hpa, grid, out_dir)
        except VibPaprError as exc:
            doc["arms"][name] = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        timings[f"arm_{name}"] = time.perf_counter() - t1
    timings["total"] = time.perf_counter() - t0
    report = ExperimentReport(doc, timings)
    if out_dir is not None:
        (out_dir / "report.json").write_text(report.to_json())
        (out_dir / "timings.json").write_text(json.dumps(timings, indent=1))
        _write_summary_csv(doc, out_dir / "metrics.csv")
    return report


def _write_summary_csv(doc: dict, path: Path) -> None:
    keys = ["ccdf_at_8db", "papr_db_mean", "avg_power_ratio", "peak_amplitude", "evm_percent",
            "psd_highband_fraction"]
    lines = ["arm," + ",".join(keys)]
    for name, res in doc["arms"].items():
        lines.append(name + "," + ",".join(repr(res.get(k, "")) if k in res else "" for k in keys))
    path.write_text("\n".join(lines) + "\n")
