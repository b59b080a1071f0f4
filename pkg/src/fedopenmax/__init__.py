"""Federated open-set recognition with OpenMax calibration."""
from .classifier import (
    LabeledData,
    LabeledSample,
    MLPClassifier,
    ModelParameters,
    TrainingConfig,
    evaluate_accuracy,
    forward_activations,
    init_model,
    train_local,
)
from .numerics import DistanceMetric, distance, softmax
from .openmax import (
    UNKNOWN,
    CalibrationConfig,
    CalibrationUpload,
    GlobalCalibration,
    OpenMaxClassifier,
    Prediction,
    aggregate_uploads,
    build_client_upload,
    predict_open,
    recalibrate,
)
from .weibull import WeibullModel, cdf, fit_tail

__version__ = "0.1.0"

__all__ = [
    "CalibrationConfig",
    "CalibrationUpload",
    "DistanceMetric",
    "GlobalCalibration",
    "LabeledData",
    "LabeledSample",
    "MLPClassifier",
    "ModelParameters",
    "OpenMaxClassifier",
    "Prediction",
    "TrainingConfig",
    "UNKNOWN",
    "WeibullModel",
    "aggregate_uploads",
    "build_client_upload",
    "cdf",
    "distance",
    "evaluate_accuracy",
    "fit_tail",
    "forward_activations",
    "init_model",
    "predict_open",
    "recalibrate",
    "softmax",
    "train_local",
]
