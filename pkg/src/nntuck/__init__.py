"""Nonnegative Tucker decomposition (NNTuck) of multilayer networks under KL loss."""

from .model import Kind, ModelVariant, MultilayerNetwork, NNTuckModel, reconstruct
from .solver import FitConfig, FitResult, fit, fit_multistart

__all__ = [
    "FitConfig",
    "FitResult",
    "Kind",
    "ModelVariant",
    "MultilayerNetwork",
    "NNTuckModel",
    "fit",
    "fit_multistart",
    "reconstruct",
]
