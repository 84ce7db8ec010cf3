"""Framing primitives for the backend wire protocol (see ../PROTOCOL.md).

Messages are UTF-8 JSON objects, one per line. Float arrays are exchanged as
base64-encoded little-endian float32.
"""

from __future__ import annotations

import base64
import json
from typing import BinaryIO

import numpy as np

PROTOCOL_VERSION = 1


def encode_floats(values) -> str:
    return base64.b64encode(np.asarray(values, dtype="<f4").tobytes()).decode("ascii")


def decode_floats(payload: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(payload), dtype="<f4").astype(np.float64)


def write_message(stream: BinaryIO, message: dict) -> None:
    stream.write((json.dumps(message, ensure_ascii=True) + "\n").encode("utf-8"))
    stream.flush()


def error_response(request_id, kind, err_type: str, message: str) -> dict:
    return {
        "id": request_id,
        "kind": kind,
        "ok": False,
        "error": {"type": err_type, "message": message},
    }
