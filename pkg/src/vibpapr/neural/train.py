"""Adam optimizer and the source/destination training loops."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..compander import compression_loss
from ..errors import ParameterError, TrainingFailure
from ..signal_core import SignalSet
from .layers import af_activation
from .model import CompanderModel, loss_and_grads

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 200
    loss: str = "mse"
    stop_at_loss_floor: bool = True
    plateau_window: int = 10
    plateau_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ParameterError("beta1 and beta2 must lie in (0, 1)")
        if not self.eps > 0:
            raise ParameterError("eps must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ParameterError("batch_size and max_epochs must be positive")
        if self.loss not in ("mse", "mae"):
            raise ParameterError(f"loss must be 'mse' or 'mae', got {self.loss!r}")


class Adam:
    """Adam with bias correction; moments keyed by parameter name."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t,
                "m": {k: v.tolist() for k, v in self.m.items()},
                "v": {k: v.tolist() for k, v in self.v.items()}}

    def load_state_dict(self, state: dict, params: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"])
        self.m = {k: np.asarray(v, dtype=np.float64).reshape(params[k].shape) for k, v in state["m"].items()}
        self.v = {k: np.asarray(v, dtype=np.float64).reshape(params[k].shape) for k, v in state["v"].items()}


def _matrix(data) -> np.ndarray:
    if isinstance(data, SignalSet):
        return np.asarray(data.matrix, dtype=np.float64)
    return np.atleast_2d(np.asarray(data, dtype=np.float64))


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    # one generator per (seed, epoch) so a resumed run replays the same batches
    return np.random.default_rng([seed, epoch]).permutation(n)


def _fit(model: CompanderModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig, stop,
         target_scale: float) -> list[float]:
    n = x.shape[0]
    xin = (x / model.norm_scale)[:, :, None]
    ytg = (y / target_scale)[:, :, None]
    params = model.params()
    opt = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    meta = model.training_meta
    start = int(meta.get("epochs_run", 0))
    history = list(meta.get("history", []))
    if start and "adam" in meta:
        opt.load_state_dict(meta["adam"], params)
    initial = meta.get("initial_loss")
    if initial is None:
        initial = loss_and_grads(model, xin, ytg, cfg.loss)[0]
    for epoch in range(start, cfg.max_epochs):
        if history and stop(history):
            break
        order = _epoch_order(cfg.seed, epoch, n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            value, grads = loss_and_grads(model, xin[idx], ytg[idx], cfg.loss)
            opt.step(params, grads)
            total += value * idx.size
        epoch_loss = total / n
        if not np.isfinite(epoch_loss) or epoch_loss > 10.0 * initial:
            raise TrainingFailure(f"loss diverged at epoch {epoch}: {epoch_loss:.4g} (initial {initial:.4g})")
        history.append(epoch_loss)
        log.debug("%s epoch %d loss %.6g", model.role, epoch, epoch_loss)
    meta.update({
        "seed": cfg.seed,
        "epochs_run": len(history),
        "final_loss": history[-1] if history else initial,
        "initial_loss": initial,
        "history": history,
        "config": asdict(cfg),
        "adam": opt.state_dict(),
    })
    return history


def loss_floor(targets, norm_scale: float, loss: str = "mse") -> float:
    """Mean compression loss of the normalized targets under the AF activation."""
    t = _matrix(targets) / norm_scale
    metric = "mae" if loss == "mae" else "mse"
    vals = [compression_loss(row, af_activation, metric) for row in t if np.any(row)]
    return float(np.mean(vals)) if vals else 0.0


def train_source(model: CompanderModel, raw_set, smoothed_set, cfg: TrainConfig | None = None):
    """Fit the source autoencoder to map raw segments onto their smoothed versions.

    Inputs and targets are divided by the global peak of the raw set, which is
    stored as ``norm_scale``. The trained model emits the compressed signal in
    those normalized units, so its amplitude never exceeds 1.
    Training halts at ``cfg.max_epochs`` or, with ``stop_at_loss_floor``, once
    the epoch loss reaches the mean compression loss of the targets.
    """
    cfg = cfg or TrainConfig()
    x, y = _matrix(raw_set), _matrix(smoothed_set)
    if x.shape != y.shape:
        raise ParameterError(f"raw set {x.shape} and smoothed set {y.shape} are not aligned")
    if x.shape[1] != model.segment_len:
        raise ParameterError(f"segments have length {x.shape[1]}, model expects {model.segment_len}")
    if model.role != "source":
        raise ParameterError("train_source needs a source-role model")
    model = model.copy()
    if not model.training_meta.get("epochs_run"):
        peak = float(np.max(np.abs(x)))
        model.norm_scale = peak if peak > 0 else 1.0
        # the compressed output stays in network units, bounded by the activation
        model.output_scale = 1.0
    floor = model.training_meta.get("loss_floor_cl")
    if floor is None:
        floor = loss_floor(y, model.norm_scale, cfg.loss)
        model.training_meta["loss_floor_cl"] = floor

    def stop(history):
        return cfg.stop_at_loss_floor and history[-1] <= floor

    history = _fit(model, x, y, cfg, stop, model.norm_scale)
    return model, history


def plateaued(history: list[float], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    before = min(history[:-window])
    recent = min(history[-window:])
    return recent > before * (1.0 - tol)


def train_destination(model: CompanderModel, inputs, targets, cfg: TrainConfig | None = None):
    """Fit the destination autoencoder as a joint denoiser and expander.

    ``inputs`` are compressed (optionally noise-corrupted) signals, ``targets``
    the original signals. Stops at ``cfg.max_epochs`` or on a loss plateau.
    """
    cfg = cfg or TrainConfig()
    x, y = _matrix(inputs), _matrix(targets)
    if x.shape != y.shape:
        raise ParameterError(f"inputs {x.shape} and targets {y.shape} are not aligned")
    if x.shape[1] != model.segment_len:
        raise ParameterError(f"segments have length {x.shape[1]}, model expects {model.segment_len}")
    if model.role != "destination":
        raise ParameterError("train_destination needs a destination-role model")
    model = model.copy()
    if not model.training_meta.get("epochs_run"):
        pin, pout = float(np.max(np.abs(x))), float(np.max(np.abs(y)))
        model.norm_scale = pin if pin > 0 else 1.0
        model.output_scale = pout if pout > 0 else 1.0

    def stop(history):
        return plateaued(history, cfg.plateau_window, cfg.plateau_tol)

    history = _fit(model, x, y, cfg, stop, model.output_scale)
    return model, history
