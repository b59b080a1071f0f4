"""One-hidden-layer ReLU network trained with plain mini-batch SGD.

The network maps a feature vector of length D to K raw logits::

    hidden = relu(x @ W1 + b1)          W1: (D, H), b1: (H,)
    logits = hidden @ W2 + b2           W2: (H, K), b2: (K,)

Parameters travel as a :class:`ModelParameters` value: an ordered list of
shapes plus one flat float64 array.  The flat layout is W1, W2, b1, b2, each
matrix in row-major order, so all weight matrices come before all biases.
Biases are stored with shapes ``(1, H)`` and ``(1, K)`` so the shape list alone
determines the flat length.

Shuffling uses numpy's PCG64 generator seeded with ``SeedSequence([seed,
epoch])``; both are specified bit-for-bit by numpy and are platform stable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InvalidInputError
from .numerics import softmax_rows


@dataclass(frozen=True, eq=False)
class ModelParameters:
    shapes: tuple[tuple[int, int], ...]
    values: np.ndarray

    def __post_init__(self):
        shapes = tuple((int(r), int(c)) for r, c in self.shapes)
        values = np.array(self.values, dtype=np.float64).ravel()
        expected = sum(r * c for r, c in shapes)
        if values.size != expected:
            raise InvalidInputError(
                f"flat parameter length {values.size} does not match shapes (expected {expected})"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("model parameters contain non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, ModelParameters):
            return NotImplemented
        return self.shapes == other.shapes and np.array_equal(self.values, other.values)

    __hash__ = None

    @property
    def dims(self) -> tuple[int, int, int]:
        """``(D, H, K)`` of the network."""
        (d, h), (_, k) = self.shapes[0], self.shapes[1]
        return d, h, k

    def unpack(self):
        """Views ``(W1, W2, b1, b2)`` into the flat array."""
        out, offset = [], 0
        for r, c in self.shapes:
            out.append(self.values[offset : offset + r * c].reshape(r, c))
            offset += r * c
        w1, w2, b1, b2 = out
        return w1, w2, b1[0], b2[0]

    @classmethod
    def pack(cls, w1, w2, b1, b2) -> "ModelParameters":
        d, h = w1.shape
        k = w2.shape[1]
        flat = np.concatenate([w1.ravel(), w2.ravel(), np.ravel(b1), np.ravel(b2)])
        return cls(((d, h), (h, k), (1, h), (1, k)), flat)


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.05
    batch_size: int = 32
    local_epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            # zero is allowed: it makes train_local an exact identity
            raise InvalidInputError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise InvalidInputError("batch_size and local_epochs must be positive")
        if self.seed < 0:
            raise InvalidInputError("seed must be non-negative")


class LabeledData(NamedTuple):
    X: np.ndarray
    y: np.ndarray


def as_arrays(data) -> LabeledData:
    """Normalize ``data`` to ``(X, y)`` arrays.

    Accepts an ``(X, y)`` pair or a sequence of :class:`LabeledSample`.
    """
    if isinstance(data, tuple) and len(data) == 2 and not isinstance(data[0], LabeledSample):
        X, y = data
    else:
        data = list(data)
        if not data:
            return LabeledData(np.empty((0, 0)), np.empty(0, dtype=np.int64))
        X = [s.features for s in data]
        y = [s.label for s in data]
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"expected X of shape (n, D) and y of shape (n,), got {X.shape} and {y.shape}")
    return LabeledData(X, y)


def init_model(D: int, H: int, K: int, seed: int) -> ModelParameters:
    """Xavier-uniform weights, zero biases, deterministic in ``seed``."""
    if min(D, H, K) < 1:
        raise InvalidInputError("D, H and K must all be at least 1")
    rng = np.random.default_rng(seed)
    s1 = np.sqrt(6.0 / (D + H))
    s2 = np.sqrt(6.0 / (H + K))
    w1 = rng.uniform(-s1, s1, size=(D, H))
    w2 = rng.uniform(-s2, s2, size=(H, K))
    return ModelParameters.pack(w1, w2, np.zeros(H), np.zeros(K))


def _forward(x, w1, w2, b1, b2):
    return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2


def activations_batch(m: ModelParameters, X) -> np.ndarray:
    """Logits for every row of ``X`` (shape ``(n, K)``).

    Rows go through the same vector kernel as :func:`forward_activations`;
    a matrix product would round differently and break bit-level agreement
    between single-sample and batch inference.
    """
    X = np.asarray(X, dtype=np.float64)
    w1, w2, b1, b2 = m.unpack()
    if X.ndim != 2 or X.shape[1] != w1.shape[0]:
        raise InvalidInputError(f"expected features with {w1.shape[0]} columns, got shape {X.shape}")
    out = np.empty((X.shape[0], w2.shape[1]))
    for i, x in enumerate(X):
        out[i] = _forward(x, w1, w2, b1, b2)
    return out


def forward_activations(m: ModelParameters, x) -> np.ndarray:
    """Raw logits (no softmax) for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    w1, w2, b1, b2 = m.unpack()
    if x.ndim != 1 or x.size != w1.shape[0]:
        raise InvalidInputError(f"expected a feature vector of length {w1.shape[0]}, got shape {x.shape}")
    return _forward(x, w1, w2, b1, b2)


def loss_and_gradient(m: ModelParameters, X, y) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) and its gradient w.r.t. the flat parameters."""
    w1, w2, b1, b2 = m.unpack()
    n = X.shape[0]
    pre = X @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ w2 + b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))

    delta = softmax_rows(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    g_w2 = hidden.T @ delta
    g_b2 = delta.sum(axis=0)
    back = (delta @ w2.T) * (pre > 0)
    g_w1 = X.T @ back
    g_b1 = back.sum(axis=0)
    grad = np.concatenate([g_w1.ravel(), g_w2.ravel(), g_b1, g_b2])
    return loss, grad


def mean_loss(m: ModelParameters, data) -> float:
    X, y = as_arrays(data)
    return loss_and_gradient(m, X, y)[0]


def _check_labels(m: ModelParameters, X, y):
    d, _, k = m.dims
    if X.shape[0] == 0:
        raise InvalidInputError("data must not be empty")
    if X.shape[1] != d:
        raise InvalidInputError(f"expected {d} features, got {X.shape[1]}")
    if y.min() < 0 or y.max() >= k:
        raise InvalidInputError(f"labels must lie in [0, {k})")


def train_local(m: ModelParameters, data, cfg: TrainingConfig) -> ModelParameters:
    """Run ``cfg.local_epochs`` epochs of shuffled mini-batch SGD on ``data``.

    ``m`` is left untouched; a new parameter value is returned.
    """
    X, y = as_arrays(data)
    _check_labels(m, X, y)
    theta = m.values.copy()
    shapes = m.shapes
    n = X.shape[0]
    for epoch in range(cfg.local_epochs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch]))
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grad = loss_and_gradient(ModelParameters(shapes, theta), X[idx], y[idx])
            theta = theta - cfg.learning_rate * grad
    return ModelParameters(shapes, theta)


def predict_labels(m: ModelParameters, X) -> np.ndarray:
    # argmax picks the lowest index on ties
    return np.argmax(activations_batch(m, X), axis=1)


def evaluate_accuracy(m: ModelParameters, data) -> float:
    """Fraction of samples whose top logit is their label."""
    X, y = as_arrays(data)
    if X.shape[0] == 0:
        raise InvalidInputError("data must not be empty")
    return float(np.mean(predict_labels(m, X) == y))


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around :func:`init_model` and :func:`train_local`.

    Parameters
    ----------
    hidden_units : int
        Width of the single ReLU layer.
    learning_rate, batch_size, epochs :
        Plain SGD settings; ``epochs`` maps to ``TrainingConfig.local_epochs``.
    random_state : int
        Seeds both initialization and shuffling.
    """

    def __init__(self, hidden_units=32, learning_rate=0.05, batch_size=32, epochs=20, random_state=0):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        encoded = np.searchsorted(self.classes_, y)
        self.n_features_in_ = X.shape[1]
        params = init_model(X.shape[1], self.hidden_units, len(self.classes_), self.random_state)
        cfg = TrainingConfig(self.learning_rate, self.batch_size, self.epochs, self.random_state)
        self.params_ = train_local(params, (X, encoded), cfg)
        return self

    @classmethod
    def from_params(cls, params: ModelParameters, classes=None) -> "MLPClassifier":
        """Wrap already-trained parameters, e.g. the output of federated training."""
        d, h, k = params.dims
        est = cls(hidden_units=h)
        est.params_ = params
        est.classes_ = np.arange(k) if classes is None else np.asarray(classes)
        est.n_features_in_ = d
        return est

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return activations_batch(self.params_, X)

    def predict_proba(self, X):
        return softmax_rows(self.decision_function(X))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

