"""Reference predictor for protocol conformance checks.

Returns K identical copies of a straight-line continuation: with the
last two observed points p and l, step t is ``l + t * (l - p)``. The
output ignores both the scene and the seed, so responses are bit-stable
and the same transcripts hold for any conformant implementation.

Run ``python -m mtraj.echo_sut`` to serve the wire protocol on
stdin/stdout.
"""

from __future__ import annotations

import json
import sys
from typing import Sequence

import numpy as np

from .core import PredictionSet, TestCase
from .sutproto import PROTOCOL_VERSION, encode_frame

SUT_NAME = "straightline"
SHORT_HISTORY_MESSAGE = "history too short: need at least 2 observed points"


def straight_line_points(observed: Sequence[Sequence[float]], horizon: int) -> list[list[float]]:
    if len(observed) < 2:
        raise ValueError(SHORT_HISTORY_MESSAGE)
    px, py = float(observed[-2][0]), float(observed[-2][1])
    lx, ly = float(observed[-1][0]), float(observed[-1][1])
    vx, vy = lx - px, ly - py
    return [[lx + t * vx, ly + t * vy] for t in range(1, horizon + 1)]


def straight_line_predict(tc: TestCase, k: int, seed: int) -> PredictionSet:
    """In-process equivalent of the served predictor (seed is ignored)."""
    pts = straight_line_points(tc.observed.points, tc.horizon)
    return PredictionSet.from_array(
        np.array([pts] * k, dtype=np.float64), tc.observed.frame_interval
    )


def straight_line_sut():
    from .harness import SutHandle

    return SutHandle(name=SUT_NAME, invoke=straight_line_predict)


def _hello_reply(request_id) -> dict:
    return {
        "type": "hello",
        "id": request_id,
        "protocol_version": PROTOCOL_VERSION,
        "name": SUT_NAME,
        "deterministic_given_seed": True,
    }


def _handle_predict(frame: dict) -> dict:
    request_id = frame.get("id", "")
    try:
        observed = frame["observed"]
        horizon = int(frame["horizon"])
        k = int(frame["k"])
    except (KeyError, TypeError, ValueError) as exc:
        return {"type": "error", "id": request_id, "message": f"bad request: {exc}"}
    if not isinstance(observed, list) or len(observed) < 2:
        return {"type": "error", "id": request_id, "message": SHORT_HISTORY_MESSAGE}
    pts = straight_line_points(observed, horizon)
    return {
        "type": "predict_response",
        "id": request_id,
        "trajectories": [pts] * k,
    }


def serve(reader=None, writer=None) -> None:
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
            reply = _hello_reply(frame.get("id", "hello"))
        elif kind == "predict_request":
            reply = _handle_predict(frame)
        else:
            reply = {
                "type": "error",
                "id": frame.get("id", "") if isinstance(frame, dict) else "",
                "message": f"unsupported frame type {kind!r}",
            }
        writer.write(encode_frame(reply))
        writer.flush()


if __name__ == "__main__":
    serve()
