"""Example: wrapping a heatmap-decoding model without shipping weights.

Many trajectory predictors decode a per-timestep probability heatmap
over the scene and sample future positions from it. This example shows
the adapter pattern for that model family: the wrapper owns the seeded
sampling so the served predictor is reproducible, while the model class
only has to expose ``heatmaps(grid, observed, horizon) -> (T, H, W)``.

``DemoHeatmapModel`` stands in for a trained network (a moving Gaussian
bump around the constant-velocity projection); swap it for a real model
object to serve one.

Run ``python -m sut_adapter.heatmap_example`` to try it.
"""

from __future__ import annotations

import numpy as np

from .server import serve


class DemoHeatmapModel:
    """Weight-free stand-in with the heatmap interface."""

    def __init__(self, spread: float = 3.0):
        self.spread = spread

    def heatmaps(self, grid: np.ndarray, observed: np.ndarray, horizon: int) -> np.ndarray:
        h, w = grid.shape
        ys, xs = np.mgrid[0:h, 0:w]
        last = observed[-1]
        vel = observed[-1] - observed[-2] if len(observed) > 1 else np.zeros(2)
        maps = np.empty((horizon, h, w))
        for t in range(1, horizon + 1):
            cx, cy = last + t * vel
            d2 = (xs - cx) ** 2 + (ys - cy) ** 2
            bump = np.exp(-d2 / (2 * self.spread**2))
            maps[t - 1] = bump / bump.sum()
        return maps


def heatmap_predictor(model) -> "callable":
    """Adapt a heatmap model into the predictor signature."""

    def predict(grid: np.ndarray, observed: np.ndarray, horizon: int, k: int, seed: int):
        rng = np.random.default_rng(seed)
        maps = model.heatmaps(grid, observed, horizon)
        h, w = grid.shape
        out = np.empty((k, horizon, 2))
        for t in range(horizon):
            flat = maps[t].reshape(-1)
            idx = rng.choice(flat.size, size=k, p=flat)
            out[:, t, 0] = idx % w
            out[:, t, 1] = idx // w
        return out

    return predict


def main() -> None:
    serve(
        heatmap_predictor(DemoHeatmapModel()),
        name="demo-heatmap",
        deterministic_given_seed=True,
    )


if __name__ == "__main__":
    main()
