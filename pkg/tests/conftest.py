import numpy as np
import pytest

from mtraj.core import Scene, TestCase, Trajectory, make_test_case


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def flat_scene():
    """10x8 all-road scene."""
    return Scene.from_grid(np.ones((8, 10), dtype=np.uint8), num_classes=6, scene_id="flat")


@pytest.fixture
def big_scene():
    """100x100 all-road scene at the default rescale factor."""
    return Scene.from_grid(np.ones((100, 100), dtype=np.uint8), num_classes=6, scene_id="big")


def random_scene(rng, width=None, height=None, num_classes=6):
    w = int(width if width is not None else rng.integers(8, 64))
    h = int(height if height is not None else rng.integers(8, 64))
    grid = rng.integers(0, num_classes, size=(h, w)).astype(np.uint8)
    return Scene.from_grid(grid, num_classes=num_classes)


def dyadic_points(rng, count, width, height, margin=1.0, quantum=0.125):
    """Random points on the 1/8-pixel grid, inside the margin box."""
    xs = rng.uniform(margin, width - 1 - margin, size=count)
    ys = rng.uniform(margin, height - 1 - margin, size=count)
    pts = np.stack([xs, ys], axis=1)
    return np.round(pts / quantum) * quantum


def random_case(rng, n=8, horizon=12, with_gt=True, width=None, height=None) -> TestCase:
    scene = random_scene(rng, width=width, height=height)
    obs = dyadic_points(rng, n, scene.width, scene.height)
    gt = dyadic_points(rng, horizon, scene.width, scene.height) if with_gt else None
    return make_test_case(
        scene,
        Trajectory.from_array(obs),
        Trajectory.from_array(gt) if gt is not None else None,
        horizon=horizon,
    )


def random_prediction_set(rng, k=5, horizon=6, scale=10.0):
    from mtraj.core import PredictionSet

    return PredictionSet.from_array(rng.normal(0.0, scale, size=(k, horizon, 2)))


def dyadic_prediction_set(rng, k=5, horizon=6, lo=0.0, hi=40.0, quantum=0.125):
    """Prediction set on the 1/8-pixel grid: mirror maps are float-exact."""
    from mtraj.core import PredictionSet

    pts = rng.uniform(lo, hi, size=(k, horizon, 2))
    return PredictionSet.from_array(np.round(pts / quantum) * quantum)
