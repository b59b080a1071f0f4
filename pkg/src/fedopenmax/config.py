"""Experiment configuration files (YAML; plain JSON also parses).

Top-level keys: ``seed``, ``output_dir``, ``dataset``, ``federation`` and
``calibration``.  Section keys are the field names of :class:`DatasetSpec`,
:class:`FederationConfig` (with a nested ``training`` block) and
:class:`CalibrationConfig`.  Unknown keys are rejected so typos surface
instead of silently falling back to defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .classifier import TrainingConfig
from .dataset import DatasetSpec
from .exceptions import FedOpenMaxError
from .federation import FederationConfig
from .openmax import CalibrationConfig


class ConfigError(FedOpenMaxError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    federation: FederationConfig = field(default_factory=FederationConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    output_dir: Path = Path("runs/experiment")
    seed: int = 0

    def __post_init__(self):
        if self.dataset.num_clients != self.federation.num_clients:
            raise ConfigError(
                f"dataset.num_clients ({self.dataset.num_clients}) and federation.num_clients "
                f"({self.federation.num_clients}) must match"
            )
        alpha = self.calibration.alpha_rank
        if alpha is not None and alpha > self.dataset.K:
            raise ConfigError(f"calibration.alpha_rank ({alpha}) exceeds dataset.K ({self.dataset.K})")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, dataset=replace(self.dataset, seed=seed))


_INT_FIELDS = {"K", "D", "num_clients", "train_per_class_per_client", "test_per_class", "num_unknown", "seed",
               "global_rounds", "hidden_units", "batch_size", "local_epochs", "tail_size_eta", "alpha_rank"}


def _build(cls, raw, path, skip=()):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)} - set(skip)
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key (allowed: {', '.join(sorted(names))})")
    kwargs = {}
    for key, value in raw.items():
        if key in _INT_FIELDS and value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a mapping")
    allowed = {"seed", "output_dir", "dataset", "federation", "calibration"}
    extra = sorted(set(raw) - allowed)
    if extra:
        raise ConfigError(f"{extra[0]}: unknown key (allowed: {', '.join(sorted(allowed))})")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")

    fed_raw = dict(raw.get("federation") or {})
    training = _build(TrainingConfig, fed_raw.pop("training", None), "federation.training", skip=("seed",))
    fed_raw["training"] = training
    federation = _build(FederationConfig, fed_raw, "federation")
    dataset = _build(DatasetSpec, raw.get("dataset"), "dataset", skip=("seed",))
    calibration = _build(CalibrationConfig, raw.get("calibration"), "calibration")

    out = Path(raw.get("output_dir", "runs/experiment"))
    cfg = ExperimentConfig(dataset=dataset, federation=federation, calibration=calibration, output_dir=out)
    return cfg.with_seed(seed)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path} ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"<file>: {path} is not valid YAML ({exc})") from exc
    return parse_config(raw if raw is not None else {})


def config_to_dict(cfg: ExperimentConfig) -> dict:
    ds = cfg.dataset.to_dict()
    ds.pop("seed")
    tr = dataclasses.asdict(cfg.federation.training)
    tr.pop("seed")
    cal = cfg.calibration
    return {
        "seed": cfg.seed,
        "output_dir": str(cfg.output_dir),
        "dataset": ds,
        "federation": {
            "num_clients": cfg.federation.num_clients,
            "global_rounds": cfg.federation.global_rounds,
            "hidden_units": cfg.federation.hidden_units,
            "aggregation_weighting": cfg.federation.aggregation_weighting.value,
            "training": tr,
        },
        "calibration": {
            "tail_size_eta": cal.tail_size_eta,
            "alpha_rank": cal.alpha_rank,
            "epsilon_threshold": cal.epsilon_threshold,
            "metric": cal.metric.value,
            "eucos_divisor": cal.eucos_divisor,
            "mav_weighting": cal.mav_weighting.value,
        },
    }
