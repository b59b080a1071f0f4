"""Federated averaging of flat model parameters."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..classifier import ModelParameters
from ..exceptions import InvalidInputError, ProtocolError


class AggregationWeighting(str, enum.Enum):
    UNIFORM = "uniform"
    BY_SAMPLE_COUNT = "by_sample_count"


@dataclass(frozen=True)
class ClientUpdate:
    params: ModelParameters
    sample_count: int
    client_id: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise InvalidInputError("sample_count must be positive")


def fedavg(updates: Sequence, weighting=AggregationWeighting.UNIFORM) -> ModelParameters:
    """Element-wise (weighted) mean of client parameters.

    ``updates`` holds :class:`ClientUpdate` objects or ``(params, sample_count)``
    pairs; pairs get client ids from their list position.  The result does not
    depend on the order of ``updates``: each coordinate is averaged as
    ``min + sum(sorted(w_i * (x_i - min)))``, which is symmetric in the clients
    and returns identical inputs unchanged, bit for bit.
    """
    weighting = AggregationWeighting(weighting)
    if not updates:
        raise InvalidInputError("fedavg needs at least one update")
    ups = [u if isinstance(u, ClientUpdate) else ClientUpdate(u[0], int(u[1]), i) for i, u in enumerate(updates)]
    ups.sort(key=lambda u: u.client_id)
    shapes = ups[0].params.shapes
    for u in ups[1:]:
        if u.params.shapes != shapes:
            raise ProtocolError(f"client {u.client_id} sent shapes {u.params.shapes}, expected {shapes}")

    stack = np.stack([u.params.values for u in ups])
    if weighting is AggregationWeighting.BY_SAMPLE_COUNT:
        counts = np.array([u.sample_count for u in ups], dtype=np.float64)
        weights = counts / counts.sum()
    else:
        weights = np.full(len(ups), 1.0 / len(ups))
    base = stack.min(axis=0)
    contrib = np.sort(weights[:, None] * (stack - base), axis=0)
    return ModelParameters(shapes, base + contrib.sum(axis=0))
