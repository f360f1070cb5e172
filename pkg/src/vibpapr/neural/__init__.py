"""Numpy autoencoder compander: layers, model container and training."""

from .model import CompanderModel, LayerSpec, build_model, forward, load_model, save_model
from .train import TrainConfig, train_destination, train_source

__all__ = ["CompanderModel", "LayerSpec", "build_model", "forward", "load_model", "save_model",
           "TrainConfig", "train_source", "train_destination"]
