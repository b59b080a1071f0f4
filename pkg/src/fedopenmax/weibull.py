"""Two-parameter Weibull tail fitting by maximum likelihood.

The shape ``k`` solves the profile score equation

    g(k) = sum(d**k * ln d) / sum(d**k) - 1/k - mean(ln d) = 0

and the scale follows in closed form, ``lam = mean(d**k) ** (1/k)``.
``g`` is strictly increasing in ``k`` whenever the data are not all equal,
so a bisection bracket followed by Newton steps converges reliably.  The
data are divided by their maximum first; ``g`` is invariant to that
rescaling and it keeps ``d**k`` in ``[0, 1]`` for any ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDataError, InsufficientDataError, InvalidInputError

K_LOW = 1e-3
K_HIGH = 1e3
TOLERANCE = 1e-10
MAX_ITER = 200


@dataclass(frozen=True)
class WeibullModel:
    shape_k: float
    scale_lambda: float
    tail_size_used: int

    def __post_init__(self):
        if not (self.shape_k > 0 and self.scale_lambda > 0):
            raise InvalidInputError("Weibull shape and scale must be positive")
        if self.tail_size_used < 1:
            raise InvalidInputError("tail_size_used must be positive")

    def cdf(self, d):
        return cdf(self, d)


def select_tail(distances, eta: int) -> np.ndarray:
    """The ``eta`` largest values (all of them if fewer), in descending order."""
    d = np.asarray(distances, dtype=np.float64).ravel()
    if eta < 1:
        raise InvalidInputError("eta must be positive")
    if np.any(~np.isfinite(d)) or np.any(d < 0):
        raise InvalidInputError("distances must be finite and non-negative")
    return np.sort(d, kind="stable")[::-1][:eta]


def _score(k, log_x):
    # log_x = ln(d / max d) <= 0, so exp(k * log_x) never overflows
    w = np.exp(k * log_x)
    sw = w.sum()
    mean_log = (w * log_x).sum() / sw
    mean_log2 = (w * log_x * log_x).sum() / sw
    g = mean_log - 1.0 / k - log_x.mean()
    dg = mean_log2 - mean_log * mean_log + 1.0 / (k * k)
    return g, dg


def solve_shape(d: np.ndarray) -> float:
    """Root of the Weibull profile score for strictly positive ``d``."""
    log_x = np.log(d) - np.log(d.max())
    lo, hi = K_LOW, K_HIGH
    g_lo, _ = _score(lo, log_x)
    g_hi, _ = _score(hi, log_x)
    if g_lo > 0:
        return lo
    if g_hi < 0:
        raise DegenerateDataError("tail is too concentrated: shape exceeds the search bracket")

    # bisect in log k until the bracket is narrow, then polish with Newton
    k = np.sqrt(lo * hi)
    for _ in range(MAX_ITER):
        k = np.sqrt(lo * hi)
        g, _ = _score(k, log_x)
        if abs(g) < TOLERANCE:
            return float(k)
        if g > 0:
            hi = k
        else:
            lo = k
        if hi / lo < 1.0 + 1e-3:
            break

    for _ in range(MAX_ITER):
        g, dg = _score(k, log_x)
        if abs(g) < TOLERANCE:
            break
        if g > 0:
            hi = k
        else:
            lo = k
        step = k - g / dg
        # stay inside the bracket; fall back to bisection if Newton leaves it
        k = step if lo < step < hi else 0.5 * (lo + hi)
    return float(k)


def fit_tail(distances, eta: int) -> WeibullModel:
    """Fit a Weibull to the ``eta`` largest distances.

    Zero distances are dropped before fitting.  If fewer than ``eta``
    distances are available, all of them are used.

    Raises
    ------
    InsufficientDataError
        Fewer than two strictly positive tail values.
    DegenerateDataError
        All tail values are identical.
    """
    if eta < 2:
        raise InvalidInputError("eta must be at least 2")
    tail = select_tail(distances, eta)
    tail = tail[tail > 0]
    if tail.size < 2:
        raise InsufficientDataError(f"need at least 2 positive tail distances, got {tail.size}")
    if tail.max() == tail.min():
        raise DegenerateDataError("all tail distances are identical; the Weibull MLE does not exist")

    k = solve_shape(tail)
    top = tail.max()
    scale = top * np.mean(np.exp(k * (np.log(tail) - np.log(top)))) ** (1.0 / k)
    return WeibullModel(shape_k=k, scale_lambda=float(scale), tail_size_used=int(tail.size))


def cdf(w: WeibullModel, d):
    """``1 - exp(-(d/lam)**k)`` for ``d > 0`` and 0 otherwise; vectorized over ``d``."""
    d = np.asarray(d, dtype=np.float64)
    pos = np.where(d > 0, d, 0.0)
    out = np.where(d > 0, -np.expm1(-((pos / w.scale_lambda) ** w.shape_k)), 0.0)
    return float(out) if out.ndim == 0 else out


def log_likelihood(w: WeibullModel, data) -> float:
    """Weibull log-likelihood of strictly positive ``data``."""
    d = np.asarray(data, dtype=np.float64).ravel()
    if np.any(d <= 0):
        raise InvalidInputError("log-likelihood needs strictly positive data")
    k, lam = w.shape_k, w.scale_lambda
    return float(np.sum(np.log(k) - k * np.log(lam) + (k - 1) * np.log(d) - (d / lam) ** k))


def log_likelihood_gradient(w: WeibullModel, data) -> tuple[float, float]:
    """Partial derivatives of :func:`log_likelihood` in ``(k, lam)``."""
    d = np.asarray(data, dtype=np.float64).ravel()
    k, lam = w.shape_k, w.scale_lambda
    z = d / lam
    zk = z**k
    n = d.size
    dk = n / k + np.sum(np.log(z)) - np.sum(zk * np.log(z))
    dlam = (k / lam) * (np.sum(zk) - n)
    return float(dk), float(dlam)
