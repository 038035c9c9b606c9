"""Hashed-feature linear-chain tagger with constrained Viterbi decoding."""

from .features import FeatureConfig, FeatureMatrix, extract_features, featurize
from .kernels import BACKEND
from .model import (
    FORMAT_VERSION,
    ModelFormatError,
    ModelParams,
    load_model,
    predict,
    save_model,
    score_emissions,
    viterbi,
)
from .train import EpochRecord, TrainConfig, TrainReport, train

__all__ = [
    "BACKEND",
    "EpochRecord",
    "FORMAT_VERSION",
    "FeatureConfig",
    "FeatureMatrix",
    "ModelFormatError",
    "ModelParams",
    "TrainConfig",
    "TrainReport",
    "extract_features",
    "featurize",
    "load_model",
    "predict",
    "save_model",
    "score_emissions",
    "train",
    "viterbi",
]
