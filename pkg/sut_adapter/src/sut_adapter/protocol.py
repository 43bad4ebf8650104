"""Wire-format primitives for the predictor protocol.

Frames are single-line JSON objects, newline-delimited, UTF-8. This
module is deliberately self-contained: the adapter speaks the protocol
bit for bit without importing the test harness.
"""

from __future__ import annotations

import base64
import json
from typing import Mapping

import numpy as np

PROTOCOL_VERSION = 1


def encode_frame(frame: Mapping) -> bytes:
    return json.dumps(frame, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_scene(obj: Mapping) -> tuple[np.ndarray, float, int]:
    """Return (grid, rescale_factor, num_classes) from a scene payload."""
    width = int(obj["width"])
    height = int(obj["height"])
    cells = base64.b64decode(obj["cells"], validate=True)
    if len(cells) != width * height:
        raise ValueError(f"scene payload has {len(cells)} cells, expected {width * height}")
    grid = np.frombuffer(cells, dtype=np.uint8).reshape(height, width)
    return grid, float(obj["rescale_factor"]), int(obj["num_classes"])


def decode_observed(payload) -> np.ndarray:
    arr = np.asarray(payload, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"observed must be a list of [x, y] pairs, got shape {arr.shape}")
    return arr
