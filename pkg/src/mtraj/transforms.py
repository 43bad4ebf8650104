"""Label-preserving input transformations with matching output mappings.

Two families are provided: mirroring (across the vertical or horizontal
axis of the scene) and rescaling (changing the scene's rescale factor,
which resizes both the grid and all coordinates). Every transformation
is invertible on coordinates; mirror transforms are their own inverse.

Convention: ``MIRROR_V`` flips across the *vertical* axis (x-coordinates
change), ``MIRROR_H`` flips across the horizontal axis (y-coordinates
change). The continuous flip formula is ``x' = (W - 1) - x`` so that the
pixel sample points ``0 .. W-1`` map onto themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    MtrajError,
    PredictionSet,
    Scene,
    TestCase,
    Trajectory,
    validate_test_case,
)


class DegenerateScene(MtrajError):
    pass


class MrKind(Enum):
    MIRROR_H = "mirror-h"
    MIRROR_V = "mirror-v"
    RESCALE = "rescale"


@dataclass(frozen=True)
class MetamorphicRelation:
    """One input transformation; ``param`` is the rescale target factor."""

    kind: MrKind
    param: float = 0.0

    def __post_init__(self):
        if self.kind is MrKind.RESCALE:
            p = float(self.param)
            if not (math.isfinite(p) and p > 0):
                raise ValueError(f"rescale factor must be positive, got {p}")
            object.__setattr__(self, "param", p)

    @property
    def spec(self) -> str:
        """Selection syntax used by the CLI and in reports."""
        if self.kind is MrKind.RESCALE:
            return f"rescale:{self.param}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "MetamorphicRelation":
        """Parse ``mirror-h``, ``mirror-v`` or ``rescale:<factor>``."""
        text = text.strip()
        if text == "mirror-h":
            return cls(MrKind.MIRROR_H)
        if text == "mirror-v":
            return cls(MrKind.MIRROR_V)
        if text.startswith("rescale:"):
            try:
                factor = float(text.split(":", 1)[1])
            except ValueError as exc:
                raise ValueError(f"bad rescale factor in {text!r}") from exc
            return cls(MrKind.RESCALE, factor)
        raise ValueError(f"unknown metamorphic relation {text!r}")


MIRROR_H = MetamorphicRelation(MrKind.MIRROR_H)
MIRROR_V = MetamorphicRelation(MrKind.MIRROR_V)


def rescale(factor: float) -> MetamorphicRelation:
    return MetamorphicRelation(MrKind.RESCALE, factor)


def parse_mr_list(text: str) -> tuple[MetamorphicRelation, ...]:
    """Parse a comma-separated MR list, e.g. ``mirror-v,rescale:0.2``."""
    parts = [p for p in (s.strip() for s in text.split(",")) if p]
    if not parts:
        raise ValueError("empty metamorphic relation list")
    return tuple(MetamorphicRelation.parse(p) for p in parts)


def _scale_ratio(mr: MetamorphicRelation, source_scene: Scene) -> float:
    return mr.param / source_scene.rescale_factor


def _map_xy(mr: MetamorphicRelation, xy: np.ndarray, source_scene: Scene, inverse: bool) -> np.ndarray:
    """Apply the coordinate map of ``mr`` to an ``(..., 2)`` array."""
    out = np.array(xy, dtype=np.float64)
    if mr.kind is MrKind.MIRROR_V:
        out[..., 0] = (source_scene.width - 1) - out[..., 0]
    elif mr.kind is MrKind.MIRROR_H:
        out[..., 1] = (source_scene.height - 1) - out[..., 1]
    else:
        s = _scale_ratio(mr, source_scene)
        if inverse:
            out /= s
        else:
            out *= s
    return out


def _map_trajectory(mr: MetamorphicRelation, traj: Trajectory, source_scene: Scene, inverse: bool = False) -> Trajectory:
    return Trajectory.from_array(
        _map_xy(mr, traj.xy, source_scene, inverse), traj.frame_interval
    )


def _resample_grid(grid: np.ndarray, s: float) -> np.ndarray:
    """Nearest-neighbour resample by scale ratio ``s`` (keeps class ids)."""
    h, w = grid.shape
    nh = int(round(h * s))
    nw = int(round(w * s))
    if nh < 1 or nw < 1:
        raise DegenerateScene(f"rescale by {s} collapses {w}x{h} grid to {nw}x{nh}")
    rows = np.minimum(((np.arange(nh) + 0.5) / s).astype(np.intp), h - 1)
    cols = np.minimum(((np.arange(nw) + 0.5) / s).astype(np.intp), w - 1)
    return grid[np.ix_(rows, cols)]


def transform_scene(mr: MetamorphicRelation, scene: Scene) -> Scene:
    if mr.kind is MrKind.MIRROR_V:
        grid = scene.grid[:, ::-1]
        factor = scene.rescale_factor
    elif mr.kind is MrKind.MIRROR_H:
        grid = scene.grid[::-1, :]
        factor = scene.rescale_factor
    else:
        grid = _resample_grid(scene.grid, _scale_ratio(mr, scene))
        factor = mr.param
    return Scene.from_grid(
        grid,
        num_classes=scene.num_classes,
        rescale_factor=factor,
        scene_id=scene.scene_id,
        class_names=scene.class_names,
    )


def transform_input(mr: MetamorphicRelation, tc: TestCase) -> TestCase:
    """Build the follow-up test case: scene, observed history and (if
    present) ground truth all transformed by the same rule."""
    scene = transform_scene(mr, tc.scene)
    observed = _map_trajectory(mr, tc.observed, tc.scene)
    gt = None
    if tc.ground_truth is not None:
        gt = _map_trajectory(mr, tc.ground_truth, tc.scene)
    out = TestCase(
        id=tc.id, scene=scene, observed=observed, horizon=tc.horizon, ground_truth=gt
    )
    validate_test_case(out, slack=1.0)
    return out


def transform_output(mr: MetamorphicRelation, preds: PredictionSet, source_scene: Scene) -> PredictionSet:
    """Map predictions from the source frame into the follow-up frame."""
    frame_interval = preds.trajectories[0].frame_interval
    return PredictionSet.from_array(
        _map_xy(mr, preds.stacked, source_scene, inverse=False), frame_interval
    )


def inverse_transform_output(mr: MetamorphicRelation, preds: PredictionSet, source_scene: Scene) -> PredictionSet:
    """Map predictions from the follow-up frame back into the source frame."""
    frame_interval = preds.trajectories[0].frame_interval
    return PredictionSet.from_array(
        _map_xy(mr, preds.stacked, source_scene, inverse=True), frame_interval
    )
