"""Serve a predictor callable over stdin/stdout.

The wrapped predictor never touches the wire format: it receives the
decoded scene grid, the observed points, the horizon, the sample count
and the seed, and returns a ``(k, horizon, 2)`` array of floats. The
server owns framing, decoding, validation and seed plumbing. Predictor
exceptions become error frames and the server keeps running; transport
failures terminate it.
"""

from __future__ import annotations

import json
import sys
from typing import Protocol

import numpy as np

from .protocol import PROTOCOL_VERSION, decode_observed, decode_scene, encode_frame


class PredictorFn(Protocol):
    def __call__(
        self, grid: np.ndarray, observed: np.ndarray, horizon: int, k: int, seed: int
    ): ...


def _predict_reply(predictor: PredictorFn, frame: dict) -> dict:
    request_id = frame.get("id", "")
    try:
        grid, _factor, _classes = decode_scene(frame["scene"])
        observed = decode_observed(frame["observed"])
        horizon = int(frame["horizon"])
        k = int(frame["k"])
        seed = int(frame["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        return {"type": "error", "id": request_id, "message": f"bad request: {exc}"}
    try:
        result = predictor(grid, observed, horizon, k, seed)
        arr = np.asarray(result, dtype=np.float64)
    except Exception as exc:
        return {"type": "error", "id": request_id, "message": str(exc)}
    if arr.shape != (k, horizon, 2):
        return {
            "type": "error",
            "id": request_id,
            "message": f"bad output shape: got {arr.shape}, expected ({k}, {horizon}, 2)",
        }
    if not np.isfinite(arr).all():
        return {"type": "error", "id": request_id, "message": "non-finite prediction values"}
    return {"type": "predict_response", "id": request_id, "trajectories": arr.tolist()}


def serve(
    predictor: PredictorFn,
    reader=None,
    writer=None,
    name: str = "adapter",
    deterministic_given_seed: bool = False,
) -> None:
    """Answer protocol frames until the input stream closes."""
    reader = reader if reader is not None else sys.stdin.buffer
    writer = writer if writer is not None else sys.stdout.buffer
    for raw in reader:
        line = raw.strip()
        if not line:
            continue
        try:
            frame = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            writer.write(encode_frame({"type": "error", "id": "", "message": "undecodable frame"}))
            writer.flush()
            continue
        kind = frame.get("type") if isinstance(frame, dict) else None
        if kind == "hello":
            reply = {
                "type": "hello",
                "id": frame.get("id", "hello"),
                "protocol_version": PROTOCOL_VERSION,
                "name": name,
                "deterministic_given_seed": deterministic_given_seed,
            }
        elif kind == "predict_request":
            reply = _predict_reply(predictor, frame)
        else:
            reply = {
                "type": "error",
                "id": frame.get("id", "") if isinstance(frame, dict) else "",
                "message": f"unsupported frame type {kind!r}",
            }
        writer.write(encode_frame(reply))
        writer.flush()
