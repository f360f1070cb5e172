"""Autoencoder architecture, inference, backpropagation and persistence."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, ParameterError
from . import layers as L

MODEL_VERSION = 1
ROLES = ("source", "destination")


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv1d" | "upsample"
    in_channels: int
    out_channels: int
    kernel_len: int = 1
    stride: int = 1
    activation: str = "linear"  # "af_mu" | "linear"

    def __post_init__(self):
        if self.kind not in ("conv1d", "upsample"):
            raise ParameterError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ("af_mu", "linear"):
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ParameterError("channel counts must be positive")
        if self.kernel_len < 1 or self.kernel_len % 2 == 0:
            raise ParameterError(f"kernel_len must be odd, got {self.kernel_len}")
        if self.stride not in (1, 2):
            raise ParameterError(f"stride must be 1 or 2, got {self.stride}")
        if self.kind == "upsample" and self.in_channels != self.out_channels:
            raise ParameterError("upsample layers keep the channel count")

    @property
    def trainable(self) -> bool:
        return self.kind == "conv1d"


@dataclass
class CompanderModel:
    role: str
    layers: list[LayerSpec]
    weights: list[dict | None]
    segment_len: int
    norm_scale: float = 1.0
    output_scale: float = 1.0
    training_meta: dict = field(default_factory=dict)

    def n_params(self) -> int:
        return sum(w["kernel"].size + w["bias"].size for w in self.weights if w is not None)

    def params(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of every trainable tensor (mutated in place by the optimizer)."""
        out = {}
        for i, w in enumerate(self.weights):
            if w is not None:
                out[f"{i}.kernel"] = w["kernel"]
                out[f"{i}.bias"] = w["bias"]
        return out

    def copy(self) -> "CompanderModel":
        return CompanderModel(
            self.role, list(self.layers),
            [None if w is None else {k: v.copy() for k, v in w.items()} for w in self.weights],
            self.segment_len, self.norm_scale, self.output_scale, json.loads(json.dumps(self.training_meta)))


def default_layers(role: str, channels: tuple[int, int] = (8, 16), kernel_len: int = 9) -> list[LayerSpec]:
    c1, c2 = channels
    last = "af_mu" if role == "source" else "linear"
    return [
        LayerSpec("conv1d", 1, c1, kernel_len, 2, "af_mu"),
        LayerSpec("conv1d", c1, c2, kernel_len, 2, "af_mu"),
        LayerSpec("upsample", c2, c2, 1, 2),
        LayerSpec("conv1d", c2, c1, kernel_len, 1, "af_mu"),
        LayerSpec("upsample", c1, c1, 1, 2),
        LayerSpec("conv1d", c1, 1, kernel_len, 1, last),
    ]


def _check_chain(layers: list[LayerSpec], segment_len: int) -> None:
    if layers[0].in_channels != 1 or layers[-1].out_channels != 1:
        raise ParameterError("the network must map 1 channel to 1 channel")
    length = segment_len
    for i, (a, b) in enumerate(zip(layers, layers[1:])):
        if a.out_channels != b.in_channels:
            raise ParameterError(f"layer {i + 1} expects {b.in_channels} channels, layer {i} gives {a.out_channels}")
    for i, spec in enumerate(layers):
        if spec.kind == "conv1d":
            if length % spec.stride:
                raise ParameterError(f"segment_len {segment_len} is not divisible by the stride product")
            length //= spec.stride
        else:
            length *= spec.stride
    if length != segment_len:
        raise ParameterError(f"architecture maps length {segment_len} to {length}")


def build_model(role: str, segment_len: int, seed: int = 0, layers: list[LayerSpec] | None = None,
                channels: tuple[int, int] = (8, 16), kernel_len: int = 9) -> CompanderModel:
    """Create a model with uniform fan-in initialized kernels and zero biases.

    Kernels feeding the log-compression activation are shrunk by its slope at
    the origin so every layer starts close to unit small-signal gain.
    """
    if role not in ROLES:
        raise ParameterError(f"role must be one of {ROLES}, got {role!r}")
    if layers is None:
        layers = default_layers(role, channels, kernel_len)
    layers = list(layers)
    _check_chain(layers, segment_len)
    rng = np.random.default_rng(seed)
    weights: list[dict | None] = []
    for spec in layers:
        if not spec.trainable:
            weights.append(None)
            continue
        fan_in = spec.in_channels * spec.kernel_len
        bound = np.sqrt(3.0 / fan_in)
        if spec.activation == "af_mu":
            bound /= L.AF_SLOPE_AT_ZERO
        kernel = rng.uniform(-bound, bound, (spec.out_channels, spec.in_channels, spec.kernel_len))
        weights.append({"kernel": kernel, "bias": np.zeros(spec.out_channels)})
    return CompanderModel(role, layers, weights, int(segment_len))


def _as_batch(model: CompanderModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.segment_len:
        raise ParameterError(f"input length {x.shape[-1]} does not match segment_len {model.segment_len}")
    return x.reshape(-1, model.segment_len, 1)


def _run(model: CompanderModel, h: np.ndarray, keep: bool):
    caches = []
    clamped = 0
    for spec, w in zip(model.layers, model.weights):
        if spec.kind == "upsample":
            h = L.upsample_forward(h, spec.stride)
            caches.append(None)
            continue
        in_len = h.shape[1]
        z, cols = L.conv1d_forward(h, w["kernel"], w["bias"], spec.stride)
        if spec.activation == "af_mu":
            clamped += L.af_clamp_count(z)
            h = L.af_activation(z)
        else:
            h = z
        caches.append((cols, z, in_len) if keep else None)
    return h, caches, clamped


def forward_normalized(model: CompanderModel, h: np.ndarray) -> np.ndarray:
    """Network output for inputs already divided by ``norm_scale`` (batch, len, 1)."""
    return _run(model, h, keep=False)[0]


def forward(model: CompanderModel, signal) -> np.ndarray:
    """Run the autoencoder on one signal or a (batch, len) array in physical units."""
    x = np.asarray(signal, dtype=np.float64)
    batch = _as_batch(model, x)
    out, _, _ = _run(model, batch / model.norm_scale, keep=False)
    return (out * model.output_scale).reshape(x.shape)


def clamp_count(model: CompanderModel, signal) -> int:
    """How many pre-activations fall in the saturating region for these inputs."""
    batch = _as_batch(model, signal)
    return _run(model, batch / model.norm_scale, keep=False)[2]


def loss_and_grads(model: CompanderModel, inputs: np.ndarray, targets: np.ndarray, loss: str = "mse"):
    """Loss over a normalized batch and its gradient for every trainable tensor.

    ``inputs`` and ``targets`` are (batch, len, 1) arrays in network units
    (inputs / norm_scale, targets / output_scale).
    """
    out, caches, _ = _run(model, inputs, keep=True)
    diff = out - targets
    if loss == "mse":
        value = float(np.mean(diff * diff))
        d = 2.0 * diff / diff.size
    elif loss == "mae":
        value = float(np.mean(np.abs(diff)))
        d = np.sign(diff) / diff.size
    else:
        raise ParameterError(f"unknown loss {loss!r}")
    grads: dict[str, np.ndarray] = {}
    for i in range(len(model.layers) - 1, -1, -1):
        spec = model.layers[i]
        if spec.kind == "upsample":
            d = L.upsample_backward(d, spec.stride)
            continue
        cols, z, in_len = caches[i]
        if spec.activation == "af_mu":
            d = d * L.af_grad(z)
        w = model.weights[i]
        d, grads[f"{i}.kernel"], grads[f"{i}.bias"] = L.conv1d_backward(
            d, cols, w["kernel"], spec.stride, in_len, need_dx=i > 0)
    return value, grads


# -- persistence --------------------------------------------------------------

def model_to_dict(model: CompanderModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "role": model.role,
        "segment_len": model.segment_len,
        "norm_scale": model.norm_scale,
        "output_scale": model.output_scale,
        "layers": [asdict(s) for s in model.layers],
        "weights": [
            None if w is None else {
                "kernel_shape": list(w["kernel"].shape),
                "kernel": w["kernel"].reshape(-1).tolist(),
                "bias": w["bias"].tolist(),
            }
            for w in model.weights
        ],
        "training_meta": model.training_meta,
    }


def model_from_dict(doc: dict) -> CompanderModel:
    if not isinstance(doc, dict):
        raise FormatError("model: expected a JSON object")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"version: unsupported model version {doc.get('version')!r}")
    try:
        layers = [LayerSpec(**d) for d in doc["layers"]]
        role = doc["role"]
        seg = int(doc["segment_len"])
        raw_w = doc["weights"]
    except (KeyError, TypeError, ParameterError) as exc:
        raise FormatError(f"model: bad layer description ({exc})") from exc
    if role not in ROLES:
        raise FormatError(f"role: unknown role {role!r}")
    if len(raw_w) != len(layers):
        raise FormatError(f"weights: {len(raw_w)} entries for {len(layers)} layers")
    weights: list[dict | None] = []
    for i, (spec, w) in enumerate(zip(layers, raw_w)):
        if not spec.trainable:
            if w is not None:
                raise FormatError(f"layer {i}: upsample layers carry no weights")
            weights.append(None)
            continue
        shape = (spec.out_channels, spec.in_channels, spec.kernel_len)
        if w is None or list(w.get("kernel_shape", [])) != list(shape):
            raise FormatError(f"layer {i}: kernel shape does not match {shape}")
        kernel = np.asarray(w["kernel"], dtype=np.float64)
        bias = np.asarray(w["bias"], dtype=np.float64)
        if kernel.size != int(np.prod(shape)):
            raise FormatError(f"layer {i}: kernel holds {kernel.size} values, expected {int(np.prod(shape))}")
        if bias.shape != (spec.out_channels,):
            raise FormatError(f"layer {i}: bias holds {bias.size} values, expected {spec.out_channels}")
        if not (np.all(np.isfinite(kernel)) and np.all(np.isfinite(bias))):
            raise FormatError(f"layer {i}: non-finite weights")
        weights.append({"kernel": kernel.reshape(shape), "bias": bias})
    try:
        _check_chain(layers, seg)
    except ParameterError as exc:
        raise FormatError(f"layers: {exc}") from exc
    return CompanderModel(role, layers, weights, seg, float(doc.get("norm_scale", 1.0)),
                          float(doc.get("output_scale", 1.0)), dict(doc.get("training_meta", {})))


def save_model(model: CompanderModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr-precision floats make the JSON roundtrip bit-exact
    path.write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> CompanderModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"model: invalid JSON ({exc})") from exc
    return model_from_dict(doc)
