"""OpenMax calibration and open-set inference, split for federated use.

Client side: collect activations of correctly classified samples, reduce them
to a per-class mean activation vector (MAV) and a list of sample-to-MAV
distances.  Only those two things leave the client, packed in a
:class:`CalibrationUpload`.

Server side: :func:`aggregate_uploads` averages the MAVs per class,
concatenates the distance lists and fits one Weibull tail per class.

Inference: :func:`recalibrate` revises the top ``alpha_rank`` activations by
their Weibull outlier probability and moves the removed mass into an explicit
unknown activation; :func:`predict_open` turns that into a (K+1)-way softmax
whose index 0 is the unknown class.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .classifier import MLPClassifier, ModelParameters, activations_batch, as_arrays
from .exceptions import CalibrationError, FedOpenMaxError, InvalidInputError, MissingClassError
from .numerics import EUCOS_DIVISOR, DistanceMetric, as_vector, distance, softmax
from .weibull import WeibullModel, cdf, fit_tail

UNKNOWN = -1


class MavWeighting(str, enum.Enum):
    UNIFORM = "uniform"
    BY_SAMPLE_COUNT = "by_sample_count"


@dataclass(frozen=True)
class CalibrationConfig:
    """OpenMax hyperparameters.

    ``alpha_rank=None`` means ``min(10, K)``, resolved once K is known.
    """

    tail_size_eta: int = 20
    alpha_rank: int | None = None
    epsilon_threshold: float = 0.0
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN
    eucos_divisor: float = EUCOS_DIVISOR
    mav_weighting: MavWeighting = MavWeighting.UNIFORM

    def __post_init__(self):
        object.__setattr__(self, "metric", DistanceMetric.parse(self.metric))
        object.__setattr__(self, "mav_weighting", MavWeighting(self.mav_weighting))
        if self.tail_size_eta < 2:
            raise InvalidInputError("tail_size_eta must be at least 2")
        if self.alpha_rank is not None and self.alpha_rank < 1:
            raise InvalidInputError("alpha_rank must be positive")
        if not 0.0 <= self.epsilon_threshold <= 1.0:
            raise InvalidInputError("epsilon_threshold must lie in [0, 1]")
        if self.eucos_divisor <= 0:
            raise InvalidInputError("eucos_divisor must be positive")

    def resolved(self, K: int) -> "CalibrationConfig":
        alpha = min(10, K) if self.alpha_rank is None else self.alpha_rank
        if alpha > K:
            raise InvalidInputError(f"alpha_rank ({alpha}) exceeds the number of known classes K ({K})")
        return replace(self, alpha_rank=alpha)


@dataclass(frozen=True, eq=False)
class ClassStats:
    """What one client reveals about one class: its MAV and its distances."""

    mav: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        mav = as_vector(self.mav, "mav").copy()
        dist = np.array(self.distances, dtype=np.float64).ravel()
        if dist.size < 1:
            raise InvalidInputError("a reported class needs at least one distance")
        if np.any(~np.isfinite(dist)) or np.any(dist < 0):
            raise InvalidInputError("distances must be finite and non-negative")
        mav.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "mav", mav)
        object.__setattr__(self, "distances", dist)

    def __eq__(self, other):
        if not isinstance(other, ClassStats):
            return NotImplemented
        return np.array_equal(self.mav, other.mav) and np.array_equal(self.distances, other.distances)


@dataclass(frozen=True)
class CalibrationUpload:
    client_id: int
    classes: Mapping[int, ClassStats] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "classes", {int(c): self.classes[c] for c in sorted(self.classes)})


@dataclass(frozen=True, eq=False)
class ClassCalibration:
    class_id: int
    mav: np.ndarray
    weibull: WeibullModel
    distance_count: int

    def __post_init__(self):
        mav = as_vector(self.mav, "mav").copy()
        mav.setflags(write=False)
        object.__setattr__(self, "mav", mav)

    def __eq__(self, other):
        if not isinstance(other, ClassCalibration):
            return NotImplemented
        return (
            self.class_id == other.class_id
            and np.array_equal(self.mav, other.mav)
            and self.weibull == other.weibull
            and self.distance_count == other.distance_count
        )


@dataclass(frozen=True)
class GlobalCalibration:
    classes: tuple[ClassCalibration, ...]
    config: CalibrationConfig

    def __post_init__(self):
        classes = tuple(sorted(self.classes, key=lambda c: c.class_id))
        K = len(classes)
        if [c.class_id for c in classes] != list(range(K)):
            raise InvalidInputError("a global calibration needs exactly one entry per class 0..K-1")
        if any(c.mav.size != K for c in classes):
            raise InvalidInputError("every MAV must have length K")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "config", self.config.resolved(K))

    @property
    def K(self) -> int:
        return len(self.classes)


@dataclass(frozen=True, eq=False)
class Prediction:
    label: int
    probabilities: np.ndarray
    weights_omega: np.ndarray

    @property
    def is_unknown(self) -> bool:
        return self.label == UNKNOWN

    def __eq__(self, other):
        if not isinstance(other, Prediction):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.probabilities, other.probabilities)
            and np.array_equal(self.weights_omega, other.weights_omega)
        )


# -- client side ---------------------------------------------------------------


def collect_correct_activations(m: ModelParameters, data) -> dict[int, list[np.ndarray]]:
    """Activations of correctly classified samples, grouped by true label."""
    X, y = as_arrays(data)
    if X.shape[0] == 0:
        raise InvalidInputError("data must not be empty")
    acts = activations_batch(m, X)
    pred = np.argmax(acts, axis=1)
    out: dict[int, list[np.ndarray]] = {}
    for a, p, t in zip(acts, pred, y):
        if p == t:
            out.setdefault(int(t), []).append(a)
    return dict(sorted(out.items()))


def _mean_rows(rows: np.ndarray) -> np.ndarray:
    # shifting by the first row keeps the mean of identical rows exact
    ref = rows[0]
    return ref + (rows - ref).mean(axis=0)


def compute_mav(acts: Sequence) -> np.ndarray:
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim != 2 or acts.shape[0] == 0:
        raise InvalidInputError("compute_mav needs a non-empty list of equal-length vectors")
    return _mean_rows(acts)


def compute_distances(acts: Sequence, mav, metric=DistanceMetric.EUCLIDEAN, eucos_divisor=EUCOS_DIVISOR) -> np.ndarray:
    return np.array([distance(a, mav, metric, eucos_divisor) for a in acts], dtype=np.float64)


def build_client_upload(
    client_id: int,
    m: ModelParameters,
    data,
    metric=DistanceMetric.EUCLIDEAN,
    eucos_divisor: float = EUCOS_DIVISOR,
) -> CalibrationUpload:
    """Everything a client computes locally before talking to the server.

    Distances are measured against this client's own MAV.
    """
    stats = {}
    for class_id, acts in collect_correct_activations(m, data).items():
        mav = compute_mav(acts)
        stats[class_id] = ClassStats(mav, compute_distances(acts, mav, metric, eucos_divisor))
    return CalibrationUpload(client_id, stats)


# -- server side ---------------------------------------------------------------


def _fit_class(class_id, pool, eta):
    try:
        return fit_tail(pool, eta)
    except FedOpenMaxError as exc:
        raise CalibrationError(class_id, exc) from exc


def aggregate_uploads(uploads: Sequence[CalibrationUpload], K: int, cfg: CalibrationConfig) -> GlobalCalibration:
    """Average MAVs, pool distances, and fit a Weibull tail for each class."""
    if not uploads:
        raise InvalidInputError("aggregate_uploads needs at least one upload")
    cfg = cfg.resolved(K)
    ordered = sorted(uploads, key=lambda u: u.client_id)
    ids = [u.client_id for u in ordered]
    if len(set(ids)) != len(ids):
        raise InvalidInputError(f"duplicate client ids in uploads: {ids}")

    classes = []
    for c in range(K):
        reports = [u.classes[c] for u in ordered if c in u.classes]
        if not reports:
            raise MissingClassError(c)
        mavs = np.stack([r.mav for r in reports])
        if mavs.shape[1] != K:
            raise InvalidInputError(f"class {c}: MAV length {mavs.shape[1]} does not match K={K}")
        if cfg.mav_weighting is MavWeighting.BY_SAMPLE_COUNT:
            counts = np.array([r.distances.size for r in reports], dtype=np.float64)
            mav = (counts / counts.sum()) @ mavs
        else:
            mav = _mean_rows(mavs)
        pool = np.concatenate([r.distances for r in reports])
        classes.append(ClassCalibration(c, mav, _fit_class(c, pool, cfg.tail_size_eta), int(pool.size)))
    return GlobalCalibration(tuple(classes), cfg)


def calibrate_centralized(m: ModelParameters, data, K: int, cfg: CalibrationConfig) -> GlobalCalibration:
    """Classic single-site OpenMax calibration with direct access to the data."""
    cfg = cfg.resolved(K)
    X, y = as_arrays(data)
    acts = activations_batch(m, X)
    correct = np.argmax(acts, axis=1) == y
    classes = []
    for c in range(K):
        rows = acts[correct & (y == c)]
        if rows.shape[0] == 0:
            raise MissingClassError(c)
        mav = compute_mav(rows)
        dists = np.array([distance(r, mav, cfg.metric, cfg.eucos_divisor) for r in rows])
        classes.append(ClassCalibration(c, mav, _fit_class(c, dists, cfg.tail_size_eta), int(dists.size)))
    return GlobalCalibration(tuple(classes), cfg)


# -- inference -----------------------------------------------------------------


def rank_classes(v) -> np.ndarray:
    """Class indices by descending activation; ties go to the lower index."""
    return np.argsort(-np.asarray(v), kind="stable")


def recalibrate(v, cal: GlobalCalibration) -> tuple[np.ndarray, float, np.ndarray]:
    """Revise activations of the top ``alpha_rank`` classes.

    Returns ``(revised, unknown_activation, omega)`` where
    ``revised = v * omega`` and ``unknown_activation = sum(v * (1 - omega))``.
    """
    v = as_vector(v, "activation vector")
    K = cal.K
    if v.size != K:
        raise InvalidInputError(f"activation vector has length {v.size}, calibration has K={K}")
    cfg = cal.config
    alpha = cfg.alpha_rank
    omega = np.ones(K)
    for j, c in enumerate(rank_classes(v)[:alpha], start=1):
        entry = cal.classes[c]
        d = distance(v, entry.mav, cfg.metric, cfg.eucos_divisor)
        omega[c] = 1.0 - ((alpha - j + 1) / alpha) * cdf(entry.weibull, d)
    revised = v * omega
    unknown = float(np.sum(v * (1.0 - omega)))
    return revised, unknown, omega


def decide(probabilities: np.ndarray, epsilon: float) -> int:
    """Label from a (K+1)-way probability vector with the unknown class at index 0."""
    top = int(np.argmax(probabilities))
    if top == 0 or probabilities[1:].max() < epsilon:
        return UNKNOWN
    return top - 1


def predict_from_activations(v, cal: GlobalCalibration) -> Prediction:
    revised, unknown, omega = recalibrate(v, cal)
    p = softmax(np.concatenate([[unknown], revised]))
    return Prediction(decide(p, cal.config.epsilon_threshold), p, omega)


def predict_open(x, m: ModelParameters, cal: GlobalCalibration) -> Prediction:
    """Open-set prediction for one feature vector."""
    x = as_vector(x, "feature vector")
    return predict_from_activations(activations_batch(m, x[None, :])[0], cal)


def predict_open_batch(X, m: ModelParameters, cal: GlobalCalibration) -> list[Prediction]:
    return [predict_from_activations(v, cal) for v in activations_batch(m, X)]


def no_rejection_calibration(K: int, cfg: CalibrationConfig | None = None) -> GlobalCalibration:
    """Calibration whose Weibull scales are so large that every weight is 1.

    With ``epsilon_threshold == 0`` this reduces OpenMax to plain softmax argmax.
    """
    cfg = cfg or CalibrationConfig(epsilon_threshold=0.0)
    huge = WeibullModel(shape_k=1.0, scale_lambda=1e300, tail_size_used=2)
    classes = tuple(ClassCalibration(c, np.zeros(K), huge, 2) for c in range(K))
    return GlobalCalibration(classes, cfg)


# -- estimator -----------------------------------------------------------------


def _params_of(model):
    if isinstance(model, ModelParameters):
        return model, np.arange(model.dims[2])
    check_is_fitted(model, "params_")
    return model.params_, np.asarray(model.classes_)


class OpenMaxClassifier(ClassifierMixin, BaseEstimator):
    """Open-set classifier on top of a trained network.

    ``fit`` calibrates on training data (centralized); use
    :meth:`from_calibration` to wrap a calibration built by the federated
    exchange instead.  ``predict`` returns ``unknown_label`` for rejected
    samples and ``predict_proba`` has K+1 columns, the first being unknown.
    """

    def __init__(self, model=None, tail_size=20, alpha_rank=None, epsilon=0.0, metric="euclidean", unknown_label=UNKNOWN):
        self.model = model
        self.tail_size = tail_size
        self.alpha_rank = alpha_rank
        self.epsilon = epsilon
        self.metric = metric
        self.unknown_label = unknown_label

    def _config(self):
        return CalibrationConfig(
            tail_size_eta=self.tail_size,
            alpha_rank=self.alpha_rank,
            epsilon_threshold=self.epsilon,
            metric=self.metric,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        model = MLPClassifier() if self.model is None else self.model
        if not isinstance(model, ModelParameters) and not hasattr(model, "params_"):
            # an unfitted base network is trained on the calibration data, as meta-estimators do
            model = clone(model).fit(X, y)
        self.model_ = model
        params, classes = _params_of(model)
        if not np.all(np.isin(y, classes)):
            raise InvalidInputError("calibration labels must be classes the model was trained on")
        self.params_ = params
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        encoded = np.searchsorted(classes, y)
        self.calibration_ = calibrate_centralized(params, (X, encoded), len(classes), self._config())
        return self

    @classmethod
    def from_calibration(cls, model, calibration: GlobalCalibration, unknown_label=UNKNOWN) -> "OpenMaxClassifier":
        params, classes = _params_of(model)
        cfg = calibration.config
        est = cls(
            model=model,
            tail_size=cfg.tail_size_eta,
            alpha_rank=cfg.alpha_rank,
            epsilon=cfg.epsilon_threshold,
            metric=cfg.metric.value,
            unknown_label=unknown_label,
        )
        est.params_, est.classes_, est.calibration_ = params, classes, calibration
        est.n_features_in_ = params.dims[0]
        return est

    def _predictions(self, X):
        check_is_fitted(self, "calibration_")
        X = check_array(X, dtype=np.float64)
        return predict_open_batch(X, self.params_, self.calibration_)

    def predict_proba(self, X):
        return np.stack([p.probabilities for p in self._predictions(X)])

    def predict(self, X):
        labels = [self.unknown_label if p.is_unknown else self.classes_[p.label] for p in self._predictions(X)]
        numeric = self.classes_.dtype.kind in "iuf"
        if numeric != isinstance(self.unknown_label, (int, float, np.number)):
            # mixing e.g. string classes with -1 must not coerce -1 to "-1"
            return np.array(labels, dtype=object)
        return np.array(labels)
