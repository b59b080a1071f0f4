"""Synthetic Gaussian-cluster identities and the delimited-text sample format.

Each known class is an isotropic Gaussian around a random center.  Unknown
identities are singletons: one sample around each of ``num_unknown`` extra
centers that keep a margin from every known center.

Text format: one sample per line, ``label, x_1, ..., x_D`` where the label is
a non-negative integer or the literal ``unknown``.  Lines starting with ``#``
are comments and blank lines are ignored.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .classifier import LabeledData
from .exceptions import InfeasibleSpecError, InvalidInputError, ParseError
from .openmax import UNKNOWN

UNKNOWN_TOKEN = "unknown"
MAX_REJECTIONS = 10_000
_DELIMITERS = {"csv": ",", "tsv": "\t"}


@dataclass(frozen=True)
class DatasetSpec:
    K: int = 10
    D: int = 16
    num_clients: int = 5
    train_per_class_per_client: int = 20
    test_per_class: int = 30
    num_unknown: int = 500
    cluster_std: float = 0.5
    cluster_center_scale: float = 5.0
    separation: float = 3.0
    seed: int = 0

    def __post_init__(self):
        counts = (self.K, self.D, self.num_clients, self.train_per_class_per_client, self.test_per_class, self.num_unknown)
        if min(counts) < 1:
            raise InvalidInputError("all dataset counts must be at least 1")
        if not (self.cluster_std > 0 and self.cluster_center_scale > 0):
            raise InvalidInputError("cluster_std and cluster_center_scale must be positive")
        if self.separation < 0:
            raise InvalidInputError("separation must be non-negative")

    @classmethod
    def paper_scale(cls, **overrides) -> "DatasetSpec":
        """Counts of the original experiment: 70 identities, 5 clients, 8000 unknowns."""
        base = dict(K=70, D=64, num_clients=5, train_per_class_per_client=60, test_per_class=50, num_unknown=8000)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GeneratedData:
    client_train: list[LabeledData]
    closed_test: LabeledData
    open_test: LabeledData
    known_centers: np.ndarray
    unknown_centers: np.ndarray


def _unknown_centers(rng, known, spec):
    margin = spec.separation * spec.cluster_std
    s = spec.cluster_center_scale
    out = np.empty((spec.num_unknown, spec.D))
    for i in range(spec.num_unknown):
        for _ in range(MAX_REJECTIONS):
            c = rng.uniform(-s, s, size=spec.D)
            if np.min(np.linalg.norm(known - c, axis=1)) >= margin:
                out[i] = c
                break
        else:
            raise InfeasibleSpecError(
                f"could not place unknown center {i} at least {margin} away from every known center "
                f"after {MAX_REJECTIONS} attempts"
            )
    return out


def _around(rng, centers, per_center, std):
    K, D = centers.shape
    X = np.repeat(centers, per_center, axis=0) + rng.normal(0.0, std, size=(K * per_center, D))
    y = np.repeat(np.arange(K), per_center)
    return LabeledData(X, y)


def generate(spec: DatasetSpec) -> GeneratedData:
    """Draw the per-client training sets and the closed and open test sets."""
    rng = np.random.default_rng(spec.seed)
    s = spec.cluster_center_scale
    known = rng.uniform(-s, s, size=(spec.K, spec.D))
    unknown = _unknown_centers(rng, known, spec)

    clients = [_around(rng, known, spec.train_per_class_per_client, spec.cluster_std) for _ in range(spec.num_clients)]
    closed = _around(rng, known, spec.test_per_class, spec.cluster_std)
    unk_X = unknown + rng.normal(0.0, spec.cluster_std, size=unknown.shape)
    open_ = LabeledData(
        np.concatenate([closed.X, unk_X]),
        np.concatenate([closed.y, np.full(spec.num_unknown, UNKNOWN)]),
    )
    return GeneratedData(clients, closed, open_, known, unknown)


def format_label(label: int) -> str:
    return UNKNOWN_TOKEN if label == UNKNOWN else str(int(label))


def write_delimited(path, data: LabeledData, fmt="csv", header_lines=()):
    """Write samples in the text format; ``header_lines`` become ``#`` comments."""
    delim = _delimiter(fmt)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, delimiter=delim, lineterminator="\n")
    for x, label in zip(data.X, data.y):
        writer.writerow([format_label(label), *(repr(float(v)) for v in x)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _delimiter(fmt):
    try:
        return _DELIMITERS[fmt]
    except KeyError:
        raise InvalidInputError(f"unknown format {fmt!r}; expected one of {sorted(_DELIMITERS)}") from None


def _parse_label(token, lineno, path):
    token = token.strip()
    if token == UNKNOWN_TOKEN:
        return UNKNOWN
    if token.isdigit():
        return int(token)
    raise ParseError(f"invalid label {token!r} (expected a non-negative integer or {UNKNOWN_TOKEN!r})", lineno, path)


def load_external(path, fmt="csv") -> LabeledData:
    """Read labeled feature vectors; unknown samples get label ``UNKNOWN`` (-1)."""
    delim = _delimiter(fmt)
    text = Path(path).read_text(encoding="utf-8")
    X, y = [], []
    dim = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text), delimiter=delim), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        label = _parse_label(row[0], lineno, path)
        try:
            values = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(f"non-numeric feature value ({exc})", lineno, path) from None
        if not values:
            raise ParseError("row has a label but no feature values", lineno, path)
        if not np.all(np.isfinite(values)):
            raise ParseError("non-finite feature value", lineno, path)
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise ParseError(f"row has {len(values)} feature values, expected {dim}", lineno, path)
        X.append(values)
        y.append(label)
    if not X:
        raise ParseError("file contains no samples", path=path)
    return LabeledData(np.array(X, dtype=np.float64), np.array(y, dtype=np.int64))
