"""Artifact files: a wire-format message plus a provenance block.

Artifacts reuse the message schema (``type``, ``round``, ``sender_id``,
``payload``) so a stored calibration is exactly what the server broadcast.
One extra top-level key, ``provenance``, records the seed.
"""
from __future__ import annotations

import json
from pathlib import Path

from .classifier import ModelParameters
from .exceptions import FedOpenMaxError, ProtocolError
from .federation.messages import SERVER_ID, Message, MessageType, from_dict, to_dict
from .openmax import GlobalCalibration


class ArtifactError(FedOpenMaxError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path


def write_artifact(path, msg: Message, seed: int) -> None:
    obj = {"provenance": {"seed": seed}, **to_dict(msg)}
    Path(path).write_text(json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n", encoding="utf-8")


def read_artifact(path, expected: MessageType) -> Message:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ArtifactError(path, f"cannot read file ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ArtifactError(path, f"not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ArtifactError(path, "expected a JSON object")
    obj.pop("provenance", None)
    try:
        msg = from_dict(obj)
    except (ProtocolError, ValueError) as exc:
        raise ArtifactError(path, f"schema mismatch: {exc}") from exc
    if msg.msg_type is not expected:
        raise ArtifactError(path, f"schema mismatch: expected a {expected.value} artifact, found {msg.msg_type.value}")
    return msg


def save_model(path, model: ModelParameters, seed: int, round_: int = 0) -> None:
    write_artifact(path, Message(MessageType.GLOBAL_MODEL, round_, SERVER_ID, model), seed)


def load_model(path) -> ModelParameters:
    return read_artifact(path, MessageType.GLOBAL_MODEL).payload


def save_calibration(path, calibration: GlobalCalibration, seed: int, round_: int = 0) -> None:
    write_artifact(path, Message(MessageType.GLOBAL_CALIBRATION, round_, SERVER_ID, calibration), seed)


def load_calibration(path) -> GlobalCalibration:
    return read_artifact(path, MessageType.GLOBAL_CALIBRATION).payload
