"""Noise-robust deep multi-view clustering on numpy."""
from .clustering import accuracy, ari, kmeans, match_labels, nmi, sharpen_target, soft_assign
from .data import (MultiViewDataset, SyntheticSpec, ViewSpec, generate_synthetic,
                   inject_noise_view, load, normalize, save)
from .engine import ABLATION_MODES, MvcanModel, TrainConfig, ablate, fit, predict

__all__ = [
    "ABLATION_MODES", "MultiViewDataset", "MvcanModel", "SyntheticSpec", "TrainConfig",
    "ViewSpec", "ablate", "accuracy", "ari", "fit", "generate_synthetic", "inject_noise_view",
    "kmeans", "load", "match_labels", "nmi", "normalize", "predict", "save",
    "sharpen_target", "soft_assign",
]
