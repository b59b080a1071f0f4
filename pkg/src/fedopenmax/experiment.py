"""End-to-end experiment: federated training, closed-set and open-set evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .classifier import ModelParameters, predict_labels
from .config import ExperimentConfig, config_to_dict
from .dataset import GeneratedData, generate
from .evaluation import MetricsReport, evaluate_labels, evaluate_open_set
from .exceptions import FedOpenMaxError
from .federation import SERVER_ID, LoopbackTransport, SocketTransport, run_calibration_exchange, run_training
from .federation.simulation import RoundMetrics
from .openmax import GlobalCalibration, predict_open_batch
from .persistence import save_calibration, save_model


MODEL_FILE = "model.json"
CALIBRATION_FILE = "calibration.json"
CLOSED_REPORT_FILE = "closed_set_report.json"
OPEN_REPORT_FILE = "open_set_report.json"


class PhaseError(FedOpenMaxError):
    def __init__(self, phase, cause):
        super().__init__(f"{phase} phase failed: {cause}")
        self.phase = phase
        self.cause = cause


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    data: GeneratedData
    model: ModelParameters
    history: list[RoundMetrics]
    calibration: GlobalCalibration
    closed_report: MetricsReport
    open_report: MetricsReport

    def summary_rows(self):
        return [
            ("training", "train_accuracy", self.history[-1].global_train_accuracy),
            ("closed_set", "accuracy", self.closed_report.accuracy),
            ("open_set", "macro_f1", self.open_report.macro_f1),
            ("open_set", "accuracy", self.open_report.accuracy),
        ]


def make_transport(kind, num_clients):
    participants = [SERVER_ID, *range(num_clients)]
    if kind == "socket":
        return SocketTransport(participants)
    if kind == "loopback":
        return LoopbackTransport(participants, keep_log=False)
    raise ValueError(f"unknown transport {kind!r}")


def run_experiment(cfg: ExperimentConfig, workers=None, transport="loopback") -> ExperimentResult:
    """Run every phase in memory; nothing is written to disk."""
    fed = cfg.federation
    phase = "generate"
    try:
        data = generate(cfg.dataset)
        phase = "training"
        with make_transport(transport, fed.num_clients) as t:
            trained = run_training(fed, data.client_train, cfg.seed, n_classes=cfg.dataset.K, transport=t,
                                   workers=workers)
        phase = "closed-set evaluation"
        closed = evaluate_labels(predict_labels(trained.model, data.closed_test.X), data.closed_test.y, cfg.dataset.K)
        phase = "calibration"
        with make_transport(transport, fed.num_clients) as t:
            calibration = run_calibration_exchange(trained.model, fed, cfg.calibration, data.client_train,
                                                   seed=cfg.seed, transport=t, workers=workers)
        phase = "open-set evaluation"
        preds = predict_open_batch(data.open_test.X, trained.model, calibration)
        open_report = evaluate_open_set(preds, data.open_test.y, cfg.dataset.K)
    except FedOpenMaxError as exc:
        raise PhaseError(phase, exc) from exc
    return ExperimentResult(cfg, data, trained.model, trained.history, calibration, closed, open_report)


def write_artifacts(result: ExperimentResult, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    settings = config_to_dict(cfg)
    # the output location is not part of the experiment, keep reports relocatable
    settings.pop("output_dir")
    header = {"seed": cfg.seed, "config": settings}
    rounds = cfg.federation.global_rounds
    paths = [out_dir / n for n in (MODEL_FILE, CALIBRATION_FILE, CLOSED_REPORT_FILE, OPEN_REPORT_FILE)]
    save_model(paths[0], result.model, cfg.seed, rounds)
    save_calibration(paths[1], result.calibration, cfg.seed, rounds)
    paths[2].write_text(result.closed_report.to_json(provenance=header, phase="closed_set"), encoding="utf-8")
    paths[3].write_text(result.open_report.to_json(provenance=header, phase="open_set"), encoding="utf-8")
    return paths
