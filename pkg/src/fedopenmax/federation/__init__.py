"""Federated training and calibration: FedAvg, wire messages, transports."""
from .fedavg import AggregationWeighting, ClientUpdate, fedavg
from .messages import SERVER_ID, Ack, Message, MessageType, deserialize, serialize
from .simulation import (
    FederatedClient,
    FederatedServer,
    FederationConfig,
    RoundMetrics,
    TrainingResult,
    client_seed,
    run_calibration_exchange,
    run_training,
)
from .transport import LoopbackTransport, SocketTransport, Transport

__all__ = [
    "AggregationWeighting",
    "Ack",
    "ClientUpdate",
    "FederatedClient",
    "FederatedServer",
    "FederationConfig",
    "LoopbackTransport",
    "Message",
    "MessageType",
    "RoundMetrics",
    "SERVER_ID",
    "SocketTransport",
    "TrainingResult",
    "Transport",
    "client_seed",
    "deserialize",
    "fedavg",
    "run_calibration_exchange",
    "run_training",
    "serialize",
]
