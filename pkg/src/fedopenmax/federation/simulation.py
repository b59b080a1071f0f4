"""Synchronous FedAvg rounds and the federated OpenMax calibration exchange.

Protocol, with ``R = global_rounds``:

* rounds ``0..R-1``: server sends ``global_model``; each client trains
  locally and answers ``client_update``; the server averages the updates.
* round ``R``: server sends the final ``global_model``; each client answers
  ``calibration_upload``; the server aggregates, sends ``global_calibration``
  and every client answers ``ack``.

The server always waits for every client (a barrier per round) and handles
replies in ascending client id, so results do not depend on arrival order.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..classifier import ModelParameters, TrainingConfig, as_arrays, evaluate_accuracy, init_model, train_local
from ..exceptions import AbortedRoundError, InvalidInputError, ProtocolError, TransportTimeout
from ..numerics import EUCOS_DIVISOR, DistanceMetric
from ..openmax import CalibrationConfig, GlobalCalibration, aggregate_uploads, build_client_upload
from .fedavg import AggregationWeighting, ClientUpdate, fedavg
from .messages import SERVER_ID, Ack, Message, MessageType
from .transport import DEFAULT_TIMEOUT, LoopbackTransport, Transport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FederationConfig:
    num_clients: int = 5
    global_rounds: int = 5
    training: TrainingConfig = field(default_factory=TrainingConfig)
    aggregation_weighting: AggregationWeighting = AggregationWeighting.UNIFORM
    hidden_units: int = 32

    def __post_init__(self):
        object.__setattr__(self, "aggregation_weighting", AggregationWeighting(self.aggregation_weighting))
        if self.num_clients < 1 or self.global_rounds < 1 or self.hidden_units < 1:
            raise InvalidInputError("num_clients, global_rounds and hidden_units must be positive")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    mean_client_accuracy: float
    global_train_accuracy: float


@dataclass(frozen=True)
class TrainingResult:
    model: ModelParameters
    history: list[RoundMetrics]


def client_seed(seed: int, client_id: int, round_: int) -> int:
    """Per-client, per-round training seed derived from the experiment seed."""
    return int(np.random.SeedSequence([seed, client_id, round_]).generate_state(1)[0])


class FederatedClient:
    """Client-side protocol handler.  Its data never leaves this object."""

    def __init__(self, client_id, data, cfg: FederationConfig, seed: int, metric=DistanceMetric.EUCLIDEAN,
                 eucos_divisor=EUCOS_DIVISOR):
        self.client_id = client_id
        self.data = as_arrays(data)
        self.cfg = cfg
        self.seed = seed
        self.metric = DistanceMetric.parse(metric)
        self.eucos_divisor = eucos_divisor
        self.model = None
        self.calibration = None
        self.last_accuracy = None

    def handle(self, msg: Message) -> Message | None:
        r = msg.round
        if msg.msg_type is MessageType.GLOBAL_MODEL:
            self.model = msg.payload
            if r < self.cfg.global_rounds:
                return self._train(r)
            return Message(MessageType.CALIBRATION_UPLOAD, r, self.client_id, self._upload())
        if msg.msg_type is MessageType.GLOBAL_CALIBRATION:
            self.calibration = msg.payload
            return Message(MessageType.ACK, r, self.client_id, Ack())
        raise ProtocolError(f"client {self.client_id} cannot handle {msg.msg_type.value}")

    def _train(self, r):
        tc = replace(self.cfg.training, seed=client_seed(self.seed, self.client_id, r))
        local = train_local(self.model, self.data, tc)
        self.last_accuracy = evaluate_accuracy(local, self.data)
        update = ClientUpdate(local, len(self.data.y), self.client_id)
        return Message(MessageType.CLIENT_UPDATE, r, self.client_id, update)

    def _upload(self):
        return build_client_upload(self.client_id, self.model, self.data, self.metric, self.eucos_divisor)

    def step(self, transport: Transport, timeout=DEFAULT_TIMEOUT):
        reply = self.handle(transport.receive(self.client_id, timeout))
        if reply is not None:
            transport.send(SERVER_ID, reply)


class FederatedServer:
    def __init__(self, clients, transport: Transport, workers=None, timeout=DEFAULT_TIMEOUT):
        self.clients = sorted(clients, key=lambda c: c.client_id)
        self.transport = transport
        self.workers = workers or len(self.clients)
        self.timeout = timeout

    def exchange(self, phase, round_, msg, expect: MessageType) -> list[Message]:
        """Broadcast ``msg``, run every client once, and gather one reply each."""
        for c in self.clients:
            self.transport.send(c.client_id, msg)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(c.step, self.transport, self.timeout) for c in self.clients]
            for f in futures:
                exc = f.exception()
                if exc is not None and not isinstance(exc, TransportTimeout):
                    raise exc

        pending = {c.client_id for c in self.clients}
        replies = {}
        while pending:
            try:
                reply = self.transport.receive(SERVER_ID, self.timeout)
            except TransportTimeout:
                raise AbortedRoundError(phase, round_, min(pending)) from None
            if reply.msg_type is not expect or reply.round != round_ or reply.sender_id not in pending:
                raise ProtocolError(
                    f"{phase} round {round_}: unexpected {reply.msg_type.value} "
                    f"(round {reply.round}) from participant {reply.sender_id}"
                )
            pending.discard(reply.sender_id)
            replies[reply.sender_id] = reply
        return [replies[k] for k in sorted(replies)]


def _client_sets(cfg, client_data):
    if len(client_data) != cfg.num_clients:
        raise InvalidInputError(f"got {len(client_data)} client datasets for num_clients={cfg.num_clients}")
    sets = [as_arrays(d) for d in client_data]
    for i, s in enumerate(sets):
        if s.X.shape[0] == 0:
            raise InvalidInputError(f"client {i} has no data")
    return sets


def _make_transport(transport, cfg):
    if transport is not None:
        return transport, False
    return LoopbackTransport([SERVER_ID, *range(cfg.num_clients)]), True


def run_training(cfg: FederationConfig, client_data, seed: int, *, n_classes=None, transport=None,
                 workers=None, timeout=DEFAULT_TIMEOUT, client_factory=FederatedClient) -> TrainingResult:
    """Train a global model with synchronous FedAvg rounds."""
    sets = _client_sets(cfg, client_data)
    D = sets[0].X.shape[1]
    K = n_classes or int(max(s.y.max() for s in sets)) + 1
    clients = [client_factory(i, s, cfg, seed) for i, s in enumerate(sets)]
    transport, owned = _make_transport(transport, cfg)
    pooled = (np.concatenate([s.X for s in sets]), np.concatenate([s.y for s in sets]))
    try:
        server = FederatedServer(clients, transport, workers, timeout)
        model = init_model(D, cfg.hidden_units, K, seed)
        history = []
        for r in range(cfg.global_rounds):
            msg = Message(MessageType.GLOBAL_MODEL, r, SERVER_ID, model)
            replies = server.exchange("training", r, msg, MessageType.CLIENT_UPDATE)
            model = fedavg([m.payload for m in replies], cfg.aggregation_weighting)
            metrics = RoundMetrics(
                r,
                float(np.mean([c.last_accuracy for c in clients])),
                evaluate_accuracy(model, pooled),
            )
            log.info("round %d: client acc %.4f, global acc %.4f", r, metrics.mean_client_accuracy,
                     metrics.global_train_accuracy)
            history.append(metrics)
    finally:
        if owned:
            transport.close()
    return TrainingResult(model, history)


def run_calibration_exchange(model: ModelParameters, cfg: FederationConfig, cal_cfg: CalibrationConfig, client_data,
                             *, seed: int = 0, transport=None, workers=None, timeout=DEFAULT_TIMEOUT,
                             client_factory=FederatedClient) -> GlobalCalibration:
    """Federated OpenMax calibration: clients upload MAVs and distances only."""
    sets = _client_sets(cfg, client_data)
    K = model.dims[2]
    cal_cfg = cal_cfg.resolved(K)
    clients = [client_factory(i, s, cfg, seed, cal_cfg.metric, cal_cfg.eucos_divisor) for i, s in enumerate(sets)]
    transport, owned = _make_transport(transport, cfg)
    r = cfg.global_rounds
    try:
        server = FederatedServer(clients, transport, workers, timeout)
        msg = Message(MessageType.GLOBAL_MODEL, r, SERVER_ID, model)
        uploads = server.exchange("calibration", r, msg, MessageType.CALIBRATION_UPLOAD)
        calibration = aggregate_uploads([m.payload for m in uploads], K, cal_cfg)
        msg = Message(MessageType.GLOBAL_CALIBRATION, r, SERVER_ID, calibration)
        server.exchange("calibration", r, msg, MessageType.ACK)
    finally:
        if owned:
            transport.close()
    return calibration
