"""Shared domain types for testing stochastic trajectory predictors.

Coordinates are continuous pixel units in the scene's grid frame: grid
cell (row i, col j) covers the half-open square [j, j+1) x [i, i+1).
All types are immutable after construction and safe to share between
concurrent workers.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np


class MtrajError(Exception):
    """Base class for every error raised by this package."""


class LengthMismatch(MtrajError):
    pass


class SizeMismatch(MtrajError):
    pass


class OutOfBounds(MtrajError):
    pass


class InvalidScene(MtrajError):
    pass


class EmptySet(MtrajError):
    pass


DEFAULT_RESCALE_FACTOR = 0.25

# Default class catalogue. Only the number of classes is fixed by the
# task setup; the ids and names are configurable per dataset.
DEFAULT_CLASS_NAMES = (
    "background",
    "road",
    "pavement",
    "terrain",
    "obstacle",
    "structure",
)

# Walkable classes under the default catalogue.
DEFAULT_WALKABLE_CLASSES = frozenset({1, 2, 3})


class Point2(NamedTuple):
    x: float
    y: float


def _as_point(p) -> Point2:
    x, y = p
    x = float(x)
    y = float(y)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite coordinate: ({x}, {y})")
    return Point2(x, y)


@dataclass(frozen=True)
class Trajectory:
    """Ordered sequence of 2-D points in pixel units at a fixed frame rate.

    ``frame_interval`` (seconds between consecutive points) is metadata
    only; no computation in this package depends on wall-clock time.
    """

    points: tuple[Point2, ...]
    frame_interval: float = 0.4

    def __post_init__(self):
        pts = tuple(_as_point(p) for p in self.points)
        if not pts:
            raise ValueError("trajectory needs at least one point")
        object.__setattr__(self, "points", pts)
        fi = float(self.frame_interval)
        if not (math.isfinite(fi) and fi > 0):
            raise ValueError(f"frame_interval must be positive, got {fi}")
        object.__setattr__(self, "frame_interval", fi)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        """Read-only ``(T, 2)`` float64 view of the points."""
        arr = np.array(self.points, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_array(cls, arr, frame_interval: float = 0.4) -> "Trajectory":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 2:
            raise ValueError(f"expected (T, 2) array, got shape {a.shape}")
        return cls(tuple(Point2(float(x), float(y)) for x, y in a), frame_interval)


@dataclass(frozen=True)
class Scene:
    """Segmentation map: a grid of class ids plus its rescale factor.

    ``cells`` is the row-major grid, one byte per cell, so a scene
    compares and hashes by value. ``scene_id`` and ``class_names`` are
    carried along for persistence but do not affect any computation.
    """

    width: int
    height: int
    cells: bytes
    num_classes: int
    rescale_factor: float = DEFAULT_RESCALE_FACTOR
    scene_id: str = ""
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidScene(f"bad dimensions {self.width}x{self.height}")
        if not (1 <= self.num_classes <= 256):
            raise InvalidScene(f"num_classes must be in 1..256, got {self.num_classes}")
        if not isinstance(self.cells, bytes):
            object.__setattr__(self, "cells", bytes(self.cells))
        if len(self.cells) != self.width * self.height:
            raise InvalidScene(
                f"cells has {len(self.cells)} entries, expected {self.width * self.height}"
            )
        if self.cells and max(self.cells) >= self.num_classes:
            raise InvalidScene(
                f"cell value {max(self.cells)} >= num_classes {self.num_classes}"
            )
        rf = float(self.rescale_factor)
        if not (math.isfinite(rf) and rf > 0):
            raise InvalidScene(f"rescale_factor must be positive, got {rf}")
        object.__setattr__(self, "rescale_factor", rf)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @cached_property
    def grid(self) -> np.ndarray:
        """Read-only ``(height, width)`` uint8 view of the cells."""
        arr = np.frombuffer(self.cells, dtype=np.uint8).reshape(self.height, self.width)
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_grid(
        cls,
        grid,
        num_classes: int,
        rescale_factor: float = DEFAULT_RESCALE_FACTOR,
        scene_id: str = "",
        class_names: Sequence[str] = (),
    ) -> "Scene":
        g = np.ascontiguousarray(np.asarray(grid, dtype=np.uint8))
        if g.ndim != 2:
            raise InvalidScene(f"expected a 2-D grid, got shape {g.shape}")
        h, w = g.shape
        return cls(
            width=w,
            height=h,
            cells=g.tobytes(),
            num_classes=num_classes,
            rescale_factor=rescale_factor,
            scene_id=scene_id,
            class_names=tuple(class_names),
        )

    def class_at(self, x: float, y: float) -> int:
        j = int(math.floor(x))
        i = int(math.floor(y))
        if not (0 <= j < self.width and 0 <= i < self.height):
            raise OutOfBounds(f"point ({x}, {y}) outside {self.width}x{self.height} scene")
        return self.cells[i * self.width + j]


@dataclass(frozen=True)
class TestCase:
    """A scene plus an observed trajectory, optionally with ground truth."""

    __test__ = False  # domain type, not a pytest class

    id: str
    scene: Scene
    observed: Trajectory
    horizon: int
    ground_truth: Optional[Trajectory] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


def validate_test_case(tc: TestCase, slack: float = 0.0) -> None:
    """Check trajectory points against the scene bounds.

    ``slack`` widens the accepted interval to [-slack, dim + slack).
    Transformed test cases are validated with a one-cell slack: grid
    resampling rounds the cell count, so mapped points may overhang the
    resampled grid by strictly less than one cell.
    """
    w, h = tc.scene.width, tc.scene.height
    trajectories = [tc.observed]
    if tc.ground_truth is not None:
        if len(tc.ground_truth) != tc.horizon:
            raise LengthMismatch(
                f"ground truth has {len(tc.ground_truth)} points, horizon is {tc.horizon}"
            )
        trajectories.append(tc.ground_truth)
    for traj in trajectories:
        for p in traj.points:
            if not (-slack <= p.x < w + slack and -slack <= p.y < h + slack):
                raise OutOfBounds(
                    f"point ({p.x}, {p.y}) outside {w}x{h} scene (slack={slack})"
                )


def _generated_id(scene: Scene, observed: Trajectory, horizon: int) -> str:
    h = hashlib.sha256()
    h.update(f"{scene.width}x{scene.height}/{horizon}".encode())
    h.update(scene.cells)
    h.update(observed.xy.tobytes())
    return "tc-" + h.hexdigest()[:12]


def make_test_case(
    scene: Scene,
    observed: Trajectory,
    ground_truth: Optional[Trajectory] = None,
    horizon: int = 12,
    id: Optional[str] = None,
) -> TestCase:
    """Build a validated test case; the id is content-derived if absent."""
    if id is None:
        id = _generated_id(scene, observed, horizon)
    tc = TestCase(
        id=id, scene=scene, observed=observed, horizon=horizon, ground_truth=ground_truth
    )
    validate_test_case(tc)
    return tc


@dataclass(frozen=True)
class PredictionSet:
    """K sampled future trajectories from one predictor invocation."""

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise EmptySet("prediction set needs at least one trajectory")
        t0 = len(trajs[0])
        for t in trajs:
            if len(t) != t0:
                raise LengthMismatch(
                    f"mixed trajectory lengths in prediction set: {len(t)} vs {t0}"
                )
        object.__setattr__(self, "trajectories", trajs)

    @property
    def k(self) -> int:
        return len(self.trajectories)

    @property
    def horizon(self) -> int:
        return len(self.trajectories[0])

    @cached_property
    def stacked(self) -> np.ndarray:
        """Read-only ``(K, T, 2)`` float64 array of all trajectories."""
        arr = np.stack([t.xy for t in self.trajectories])
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_array(cls, arr, frame_interval: float = 0.4) -> "PredictionSet":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 2:
            raise ValueError(f"expected (K, T, 2) array, got shape {a.shape}")
        return cls(tuple(Trajectory.from_array(t, frame_interval) for t in a))


@dataclass(frozen=True)
class RunConfig:
    """Knobs of one harness run.

    ``followup_frame`` selects the coordinate frame in which follow-up
    predictions are compared against the source sets: ``"source"`` maps
    the follow-up prediction back through the inverse transform (scale-
    consistent with the null statistics), ``"followup"`` transforms the
    source sets forward instead.
    """

    n_source: int = 8
    k: int = 20
    p_threshold: float = 0.05
    seed: int = 0
    horizon: int = 12
    observed_len: int = 8
    two_sided: bool = False
    followup_frame: str = "source"

    def __post_init__(self):
        if self.n_source < 2:
            raise ValueError(f"n_source must be >= 2, got {self.n_source}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not (0.0 < self.p_threshold < 1.0):
            raise ValueError(f"p_threshold must be in (0, 1), got {self.p_threshold}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.horizon < 1 or self.observed_len < 1:
            raise ValueError("horizon and observed_len must be >= 1")
        if self.followup_frame not in ("source", "followup"):
            raise ValueError(f"unknown followup_frame {self.followup_frame!r}")

    @classmethod
    def short_term(cls, **kw) -> "RunConfig":
        """3.2 s history at 2.5 FPS, 4.8 s horizon: 8 observed, 12 future."""
        return cls(observed_len=8, horizon=12, **kw)

    @classmethod
    def long_term(cls, **kw) -> "RunConfig":
        """5 s history at 1 FPS, 30 s horizon: 5 observed, 30 future."""
        return cls(observed_len=5, horizon=30, **kw)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)


def derive_seed(base_seed: int, *labels: str) -> int:
    """Stable 63-bit seed derived from a base seed and string labels.

    Used to give every test case its own seed region independently of
    suite ordering, so violation rates and reports do not depend on the
    order in which cases are executed.
    """
    h = hashlib.sha256()
    h.update(str(base_seed).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(label.encode())
    return int.from_bytes(h.digest()[:8], "big") >> 1
