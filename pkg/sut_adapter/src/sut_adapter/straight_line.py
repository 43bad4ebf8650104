"""Reference predictor: K copies of a constant-velocity continuation.

With last two observed points p and l, step t is ``l + t * (l - p)``.
The scene and seed are ignored, so the served responses are bit-stable
and match the protocol's golden transcripts.

Run ``python -m sut_adapter.straight_line`` to serve it on stdin/stdout.
"""

from __future__ import annotations

import numpy as np

from .server import serve


def straight_line(grid: np.ndarray, observed: np.ndarray, horizon: int, k: int, seed: int):
    if len(observed) < 2:
        raise ValueError("history too short: need at least 2 observed points")
    px, py = float(observed[-2][0]), float(observed[-2][1])
    lx, ly = float(observed[-1][0]), float(observed[-1][1])
    vx, vy = lx - px, ly - py
    steps = [[lx + t * vx, ly + t * vy] for t in range(1, horizon + 1)]
    return [steps] * k


def main() -> None:
    serve(straight_line, name="straightline", deterministic_given_seed=True)


if __name__ == "__main__":
    main()
