"""Forecasting primitives: persistence/statistical baselines and tree ensembles."""

from .baselines import BaselineKind, BaselineParams, baseline_series, predict_baseline
from .ensemble import GBDTParams, TreeEnsembleModel, fit_ensemble, predict_ensemble
from .io import deserialize_model, model_fingerprint, serialize_model

__all__ = [
    "BaselineKind",
    "BaselineParams",
    "baseline_series",
    "predict_baseline",
    "GBDTParams",
    "TreeEnsembleModel",
    "fit_ensemble",
    "predict_ensemble",
    "serialize_model",
    "deserialize_model",
    "model_fingerprint",
]
