"""Vector primitives shared by the classifier and OpenMax code.

Everything here works in float64 and never mutates its inputs.
"""
from __future__ import annotations

import enum

import numpy as np

from .exceptions import InvalidInputError

EUCOS_DIVISOR = 200.0


class DistanceMetric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"
    EUCOS = "eucos"

    @classmethod
    def parse(cls, value) -> "DistanceMetric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise InvalidInputError(f"unknown distance metric {value!r}; expected one of {names}") from None


def as_vector(values, name="vector") -> np.ndarray:
    """Return ``values`` as a finite 1-d float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def softmax(v) -> np.ndarray:
    """Numerically safe softmax of a single activation vector."""
    v = as_vector(v, "activation vector")
    if v.size == 0:
        raise InvalidInputError("softmax needs at least one entry")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax for a batch of logits (no validation, used in training)."""
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def argmax(v) -> int:
    # np.argmax already returns the first (lowest) index among ties
    return int(np.argmax(np.asarray(v)))


def distance(a, b, metric=DistanceMetric.EUCLIDEAN, eucos_divisor: float = EUCOS_DIVISOR) -> float:
    """Distance between two vectors under ``metric``.

    ``eucos`` is ``euclidean / eucos_divisor + cosine``.
    """
    metric = DistanceMetric.parse(metric)
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    if np.array_equal(a, b) and (metric is not DistanceMetric.COSINE or np.any(a)):
        return 0.0
    if metric is DistanceMetric.EUCLIDEAN:
        return _euclidean(a, b)
    if metric is DistanceMetric.COSINE:
        return _cosine(a, b)
    if eucos_divisor <= 0:
        raise InvalidInputError("eucos_divisor must be positive")
    return _euclidean(a, b) / eucos_divisor + _cosine(a, b)


def _euclidean(a, b):
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _cosine(a, b):
    sa, sb = np.max(np.abs(a)), np.max(np.abs(b))
    if sa == 0.0 or sb == 0.0:
        raise InvalidInputError("cosine distance is undefined for a zero vector")
    # cosine is scale free; rescaling first keeps tiny or huge vectors out of under/overflow
    a, b = a / sa, b / sb
    na = np.sqrt(np.dot(a, a))
    nb = np.sqrt(np.dot(b, b))
    # clip guards against 1 - (1 + ulp) producing a tiny negative distance
    return float(max(0.0, 1.0 - np.dot(a, b) / (na * nb)))
