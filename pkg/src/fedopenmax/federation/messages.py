"""Protocol messages and their JSON wire format.

A message is one JSON object with exactly the keys ``type``, ``round``,
``sender_id`` and ``payload``.  Floats are written with Python's shortest
round-trip repr, so decoding returns bit-identical values.

Payload bodies::

    global_model        {"shapes": [[r, c], ...], "values": [...]}
    client_update       {"shapes": ..., "values": ..., "sample_count": n}
    calibration_upload  {"client_id": i, "classes": [{"class_id", "mav", "distances"}, ...]}
    global_calibration  {"config": {...}, "classes": [{"class_id", "mav", "weibull": {...}}, ...]}
    ack                 {}

A calibration upload can only hold per-class means and distance lists; there
is no field where a feature vector or a per-sample activation could go.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..classifier import ModelParameters
from ..exceptions import ProtocolError
from ..openmax import CalibrationConfig, CalibrationUpload, ClassCalibration, ClassStats, GlobalCalibration
from ..weibull import WeibullModel
from .fedavg import ClientUpdate

SERVER_ID = -1


class MessageType(str, enum.Enum):
    GLOBAL_MODEL = "global_model"
    CLIENT_UPDATE = "client_update"
    CALIBRATION_UPLOAD = "calibration_upload"
    GLOBAL_CALIBRATION = "global_calibration"
    ACK = "ack"


@dataclass(frozen=True)
class Ack:
    pass


_PAYLOAD_TYPES = {
    MessageType.GLOBAL_MODEL: ModelParameters,
    MessageType.CLIENT_UPDATE: ClientUpdate,
    MessageType.CALIBRATION_UPLOAD: CalibrationUpload,
    MessageType.GLOBAL_CALIBRATION: GlobalCalibration,
    MessageType.ACK: Ack,
}


@dataclass(frozen=True)
class Message:
    msg_type: MessageType
    round: int
    sender_id: int
    payload: Any

    def __post_init__(self):
        object.__setattr__(self, "msg_type", MessageType(self.msg_type))
        expected = _PAYLOAD_TYPES[self.msg_type]
        if not isinstance(self.payload, expected):
            raise ProtocolError(
                f"{self.msg_type.value} message needs a {expected.__name__} payload, got {type(self.payload).__name__}"
            )
        if self.round < 0:
            raise ProtocolError("round must be non-negative")


def _floats(arr) -> list[float]:
    return [float(x) for x in np.asarray(arr).ravel()]


def _model_body(params: ModelParameters) -> dict:
    return {"shapes": [list(s) for s in params.shapes], "values": _floats(params.values)}


def calibration_config_body(cfg: CalibrationConfig) -> dict:
    return {
        "tail_size_eta": cfg.tail_size_eta,
        "alpha_rank": cfg.alpha_rank,
        "epsilon_threshold": cfg.epsilon_threshold,
        "metric": cfg.metric.value,
        "eucos_divisor": cfg.eucos_divisor,
    }


def payload_to_body(msg_type: MessageType, payload) -> dict:
    if msg_type is MessageType.GLOBAL_MODEL:
        return _model_body(payload)
    if msg_type is MessageType.CLIENT_UPDATE:
        return {**_model_body(payload.params), "sample_count": payload.sample_count}
    if msg_type is MessageType.CALIBRATION_UPLOAD:
        return {
            "client_id": payload.client_id,
            "classes": [
                {"class_id": c, "mav": _floats(s.mav), "distances": _floats(s.distances)}
                for c, s in payload.classes.items()
            ],
        }
    if msg_type is MessageType.GLOBAL_CALIBRATION:
        return {
            "config": calibration_config_body(payload.config),
            "classes": [
                {
                    "class_id": c.class_id,
                    "mav": _floats(c.mav),
                    "weibull": {
                        "shape_k": c.weibull.shape_k,
                        "scale_lambda": c.weibull.scale_lambda,
                        "tail_size_used": c.weibull.tail_size_used,
                    },
                    "distance_count": c.distance_count,
                }
                for c in payload.classes
            ],
        }
    return {}


def _require(body, keys, what):
    if not isinstance(body, dict):
        raise ProtocolError(f"{what} must be an object")
    missing = [k for k in keys if k not in body]
    if missing:
        raise ProtocolError(f"{what} is missing {', '.join(missing)}")


def _model_from_body(body, what) -> ModelParameters:
    _require(body, ("shapes", "values"), what)
    try:
        return ModelParameters(tuple(tuple(s) for s in body["shapes"]), body["values"])
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"{what}: {exc}") from exc


def body_to_payload(msg_type: MessageType, body, sender_id: int):
    what = f"{msg_type.value} payload"
    try:
        if msg_type is MessageType.GLOBAL_MODEL:
            return _model_from_body(body, what)
        if msg_type is MessageType.CLIENT_UPDATE:
            _require(body, ("sample_count",), what)
            return ClientUpdate(_model_from_body(body, what), int(body["sample_count"]), sender_id)
        if msg_type is MessageType.CALIBRATION_UPLOAD:
            _require(body, ("client_id", "classes"), what)
            stats = {}
            for entry in body["classes"]:
                _require(entry, ("class_id", "mav", "distances"), f"{what} class entry")
                cid = int(entry["class_id"])
                if cid in stats:
                    raise ProtocolError(f"{what}: class {cid} reported twice")
                stats[cid] = ClassStats(entry["mav"], entry["distances"])
            return CalibrationUpload(int(body["client_id"]), stats)
        if msg_type is MessageType.GLOBAL_CALIBRATION:
            return global_calibration_from_body(body)
        return Ack()
    except ProtocolError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ProtocolError(f"{what}: {exc}") from exc


def global_calibration_from_body(body) -> GlobalCalibration:
    what = "global_calibration payload"
    _require(body, ("config", "classes"), what)
    c = body["config"]
    _require(c, ("tail_size_eta", "alpha_rank", "epsilon_threshold", "metric"), f"{what} config")
    cfg_kwargs = dict(
        tail_size_eta=int(c["tail_size_eta"]),
        alpha_rank=int(c["alpha_rank"]),
        epsilon_threshold=float(c["epsilon_threshold"]),
        metric=c["metric"],
    )
    if "eucos_divisor" in c:
        cfg_kwargs["eucos_divisor"] = float(c["eucos_divisor"])
    classes = []
    for entry in body["classes"]:
        _require(entry, ("class_id", "mav", "weibull"), f"{what} class entry")
        w = entry["weibull"]
        _require(w, ("shape_k", "scale_lambda", "tail_size_used"), f"{what} weibull")
        weibull = WeibullModel(float(w["shape_k"]), float(w["scale_lambda"]), int(w["tail_size_used"]))
        count = int(entry.get("distance_count", weibull.tail_size_used))
        classes.append(ClassCalibration(int(entry["class_id"]), entry["mav"], weibull, count))
    return GlobalCalibration(tuple(classes), CalibrationConfig(**cfg_kwargs))


def to_dict(msg: Message) -> dict:
    return {
        "type": msg.msg_type.value,
        "round": msg.round,
        "sender_id": msg.sender_id,
        "payload": payload_to_body(msg.msg_type, msg.payload),
    }


def from_dict(obj) -> Message:
    _require(obj, ("type", "round", "sender_id", "payload"), "message")
    try:
        msg_type = MessageType(obj["type"])
    except ValueError:
        raise ProtocolError(f"unknown message type {obj['type']!r}") from None
    sender = int(obj["sender_id"])
    return Message(msg_type, int(obj["round"]), sender, body_to_payload(msg_type, obj["payload"], sender))


def serialize(msg: Message) -> bytes:
    return json.dumps(to_dict(msg), separators=(",", ":"), allow_nan=False).encode("utf-8")


def deserialize(data: bytes) -> Message:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable message: {exc}") from exc
    return from_dict(obj)
