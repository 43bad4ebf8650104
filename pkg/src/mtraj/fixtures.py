"""Seeded synthetic scenes and tracks for calibration and self-tests.

Scenes get a handful of random rectangular regions of the non-background
classes over a walkable base; tracks are smooth bouncing walks whose
coordinates are quantized to 1/8 pixel. The dyadic grid keeps mirror
transforms exact in floating point, matching how annotation tools store
pixel coordinates with a few fixed decimals.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    DEFAULT_CLASS_NAMES,
    DEFAULT_RESCALE_FACTOR,
    Scene,
    TestCase,
    Trajectory,
    make_test_case,
)
from .dataio import TrackRecord, extract_windows, save_scene, write_tracks

QUANTUM = 0.125


def _quantize(a: np.ndarray) -> np.ndarray:
    return np.round(a / QUANTUM) * QUANTUM


def generate_scene(
    rng: np.random.Generator,
    scene_id: str,
    width: int = 96,
    height: int = 96,
    num_classes: int = 6,
) -> Scene:
    """Walkable base (road) with random patches of the other classes."""
    grid = np.ones((height, width), dtype=np.uint8)  # road everywhere
    for _ in range(int(rng.integers(6, 12))):
        cls = int(rng.integers(0, num_classes))
        w = int(rng.integers(width // 10, width // 3))
        h = int(rng.integers(height // 10, height // 3))
        x0 = int(rng.integers(0, width - w))
        y0 = int(rng.integers(0, height - h))
        grid[y0:y0 + h, x0:x0 + w] = cls
    return Scene.from_grid(
        grid,
        num_classes=num_classes,
        rescale_factor=DEFAULT_RESCALE_FACTOR,
        scene_id=scene_id,
        class_names=DEFAULT_CLASS_NAMES[:num_classes],
    )


def generate_walk(
    rng: np.random.Generator,
    scene: Scene,
    length: int,
    margin: float = 2.0,
) -> np.ndarray:
    """Smooth bouncing walk of ``length`` points, quantized to 1/8 pixel."""
    lo_x, hi_x = margin, scene.width - 1 - margin
    lo_y, hi_y = margin, scene.height - 1 - margin
    pos = np.array(
        [rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)], dtype=np.float64
    )
    heading = rng.uniform(0, 2 * np.pi)
    speed = rng.uniform(0.5, 2.0)
    pts = [pos.copy()]
    for _ in range(length - 1):
        heading += rng.normal(0.0, 0.08)
        step = np.array([np.cos(heading), np.sin(heading)]) * speed
        nxt = pos + step
        if not (lo_x <= nxt[0] <= hi_x):
            step[0] = -step[0]
            heading = np.arctan2(step[1], step[0])
        if not (lo_y <= nxt[1] <= hi_y):
            step[1] = -step[1]
            heading = np.arctan2(step[1], step[0])
        pos = pos + step
        pos[0] = min(max(pos[0], lo_x), hi_x)
        pos[1] = min(max(pos[1], lo_y), hi_y)
        pts.append(pos.copy())
    return _quantize(np.array(pts))


def generate_tracks(
    rng: np.random.Generator,
    scene: Scene,
    num_agents: int,
    length: int,
    agent_prefix: str = "a",
) -> list[TrackRecord]:
    records = []
    for idx in range(num_agents):
        walk = generate_walk(rng, scene, length)
        agent_id = f"{agent_prefix}{idx:04d}"
        for frame, (x, y) in enumerate(walk):
            records.append(TrackRecord(scene.scene_id, agent_id, frame, float(x), float(y)))
    return records


def generate_fixture_set(
    seed: int,
    cases: int,
    n: int = 8,
    horizon: int = 12,
    num_scenes: int = 3,
    scene_size: int = 96,
) -> tuple[dict[str, Scene], list[TrackRecord]]:
    """Scenes plus tracks that window into exactly ``cases`` test cases."""
    if cases < 1:
        raise ValueError(f"cases must be >= 1, got {cases}")
    rng = np.random.default_rng(seed)
    num_scenes = max(num_scenes, 3)
    scenes: dict[str, Scene] = {}
    tracks: list[TrackRecord] = []
    per_scene = [cases // num_scenes] * num_scenes
    for i in range(cases % num_scenes):
        per_scene[i] += 1
    length = n + horizon
    for idx, agents in enumerate(per_scene):
        scene = generate_scene(rng, f"scene{idx}", scene_size, scene_size)
        scenes[scene.scene_id] = scene
        tracks.extend(
            generate_tracks(rng, scene, agents, length, agent_prefix=f"s{idx}a")
        )
    return scenes, tracks


def default_cases(seed: int, cases: int, n: int = 8, horizon: int = 12) -> list[TestCase]:
    """In-memory test cases used when no data directory is given."""
    scenes, tracks = generate_fixture_set(seed, cases, n=n, horizon=horizon)
    out = extract_windows(tracks, scenes, n=n, horizon=horizon, stride=n + horizon)
    if len(out) != cases:
        raise RuntimeError(f"fixture generation produced {len(out)} of {cases} cases")
    return out


def write_fixture_dir(out_dir, seed: int, cases: int, n: int = 8, horizon: int = 12) -> int:
    """Write scenes and tracks under ``out_dir``; returns the case count."""
    scenes, tracks = generate_fixture_set(seed, cases, n=n, horizon=horizon)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for scene_id in sorted(scenes):
        save_scene(scenes[scene_id], out_dir / f"{scene_id}.pgm")
    write_tracks(tracks, out_dir / "tracks.csv")
    return len(extract_windows(tracks, scenes, n=n, horizon=horizon, stride=n + horizon))


def straight_case(
    rng: np.random.Generator,
    scene: Scene,
    n: int,
    horizon: int,
    drift: tuple[float, float] = (0.0, 0.0),
    gt_noise: float = 0.0,
    case_id: Optional[str] = None,
) -> TestCase:
    """Constant-velocity case whose ground truth continues the motion,
    optionally with a cumulative drift (for planted-fault experiments)."""
    speed_cap = 1.6
    margin = (
        2.0
        + speed_cap * (n + horizon)
        + max(abs(drift[0]), abs(drift[1])) * horizon
        + 4.0 * gt_noise
    )
    lo = np.array([margin, margin])
    hi = np.array([scene.width - 1 - margin, scene.height - 1 - margin])
    if (hi <= lo).any():
        raise ValueError(
            f"scene {scene.width}x{scene.height} too small for margin {margin:.1f}"
        )
    start = rng.uniform(lo, hi)
    heading = rng.uniform(0, 2 * np.pi)
    vel = np.array([np.cos(heading), np.sin(heading)]) * rng.uniform(0.3, 1.5)
    steps = np.arange(n + horizon, dtype=np.float64)[:, None]
    pts = start[None, :] + steps * vel[None, :]
    future = pts[n:]
    future = future + np.asarray(drift)[None, :] * np.arange(1, horizon + 1)[:, None]
    if gt_noise > 0:
        future = future + rng.normal(0.0, gt_noise, size=future.shape)
    observed = _quantize(pts[:n])
    future = _quantize(future)
    return make_test_case(
        scene,
        Trajectory.from_array(observed),
        Trajectory.from_array(future),
        horizon=horizon,
        id=case_id,
    )
