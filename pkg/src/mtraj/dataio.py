"""Persistence: scene maps, track files, window extraction and reports.

Scene grids are stored as binary portable graymaps (P5, maxval 255, one
byte per cell = class id) with a JSON sidecar carrying scene id, class
catalogue and rescale factor. Raw trajectories are header-bearing CSV
records (scene_id, agent_id, frame, x, y). Suite reports are
line-delimited JSON: one summary record plus one record per case and
per comparison, so reruns with the same seed produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import (
    MtrajError,
    OutOfBounds,
    RunConfig,
    Scene,
    TestCase,
    Trajectory,
    make_test_case,
)
from .harness import (
    BaselineResult,
    Comparison,
    SuiteReport,
    TestCaseReport,
)
from .metrics import METRIC_KEYS
from .transforms import MetamorphicRelation

SCHEMA_VERSION = 1


class ParseError(MtrajError):
    pass


class ClassOutOfRange(MtrajError):
    pass


class MissingSidecar(MtrajError):
    pass


class SchemaVersionMismatch(MtrajError):
    pass


# ---------------------------------------------------------------------------
# Scene files


def _parse_pnm_header(data: bytes) -> tuple[list[int], int]:
    """Parse 'P5 <w> <h> <maxval>' allowing comments; return values and
    the offset of the first raster byte."""
    if not data.startswith(b"P5"):
        raise ParseError("not a binary portable graymap (missing P5 magic)")
    pos = 2
    values: list[int] = []
    while len(values) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token:
            raise ParseError("truncated graymap header")
        try:
            values.append(int(token))
        except ValueError as exc:
            raise ParseError(f"bad header token {token!r}") from exc
    if pos >= len(data):
        raise ParseError("graymap header not followed by raster data")
    return values, pos + 1  # single whitespace byte after maxval


def load_scene(grid_path, sidecar_path=None) -> Scene:
    grid_path = Path(grid_path)
    if sidecar_path is None:
        sidecar_path = grid_path.with_suffix(".json")
    sidecar_path = Path(sidecar_path)
    if not sidecar_path.exists():
        raise MissingSidecar(f"no metadata sidecar at {sidecar_path}")
    try:
        meta = json.loads(sidecar_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad sidecar {sidecar_path}: {exc}") from exc

    data = grid_path.read_bytes()
    (width, height, maxval), offset = _parse_pnm_header(data)
    if maxval != 255:
        raise ParseError(f"expected maxval 255, got {maxval}")
    if width < 1 or height < 1:
        raise ParseError(f"bad graymap dimensions {width}x{height}")
    cells = data[offset:offset + width * height]
    if len(cells) != width * height:
        raise ParseError(
            f"raster has {len(cells)} bytes, expected {width * height}"
        )
    num_classes = int(meta["num_classes"])
    if cells and max(cells) >= num_classes:
        raise ClassOutOfRange(
            f"cell value {max(cells)} out of range for {num_classes} classes"
        )
    return Scene(
        width=width,
        height=height,
        cells=cells,
        num_classes=num_classes,
        rescale_factor=float(meta.get("rescale_factor", 0.25)),
        scene_id=str(meta.get("scene_id", grid_path.stem)),
        class_names=tuple(meta.get("class_names", ())),
    )


def save_scene(scene: Scene, grid_path, sidecar_path=None) -> None:
    grid_path = Path(grid_path)
    if sidecar_path is None:
        sidecar_path = grid_path.with_suffix(".json")
    header = f"P5\n{scene.width} {scene.height}\n255\n".encode("ascii")
    grid_path.write_bytes(header + scene.cells)
    meta = {
        "scene_id": scene.scene_id or grid_path.stem,
        "num_classes": scene.num_classes,
        "class_names": list(scene.class_names),
        "rescale_factor": scene.rescale_factor,
    }
    Path(sidecar_path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", "utf-8")


def load_scene_dir(directory) -> dict[str, Scene]:
    """Load every ``*.pgm`` scene (with sidecar) in a directory, keyed by id."""
    scenes = {}
    for grid_path in sorted(Path(directory).glob("*.pgm")):
        scene = load_scene(grid_path)
        scenes[scene.scene_id] = scene
    return scenes


# ---------------------------------------------------------------------------
# Track records and window extraction


@dataclass(frozen=True)
class TrackRecord:
    scene_id: str
    agent_id: str
    frame: int
    x: float
    y: float


TRACK_FIELDS = ("scene_id", "agent_id", "frame", "x", "y")


def write_tracks(records: Iterable[TrackRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_FIELDS)
        for r in records:
            writer.writerow([r.scene_id, r.agent_id, r.frame, repr(r.x), repr(r.y)])


def read_tracks(path) -> list[TrackRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACK_FIELDS:
            raise ParseError(f"bad track header in {path}: {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                out.append(
                    TrackRecord(row[0], row[1], int(row[2]), float(row[3]), float(row[4]))
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out


def extract_windows(
    tracks: Sequence[TrackRecord],
    scenes: Mapping[str, Scene],
    n: int,
    horizon: int,
    stride: int,
    frame_interval: float = 0.4,
) -> list[TestCase]:
    """Slide fixed-length windows over each agent's track.

    Each window yields ``n`` observed plus ``horizon`` future points;
    the future points become the ground truth. Windows containing a
    frame gap (spacing different from the agent's regular frame step)
    or a point outside the scene are skipped.
    """
    if n < 1 or horizon < 1 or stride < 1:
        raise ValueError("n, horizon and stride must all be >= 1")
    by_agent: dict[tuple[str, str], list[TrackRecord]] = {}
    for rec in tracks:
        by_agent.setdefault((rec.scene_id, rec.agent_id), []).append(rec)

    cases = []
    window = n + horizon
    for (scene_id, agent_id), recs in by_agent.items():
        if scene_id not in scenes:
            raise ParseError(f"track references unknown scene {scene_id!r}")
        scene = scenes[scene_id]
        frames = [r.frame for r in recs]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ParseError(
                f"frames of agent {agent_id!r} in scene {scene_id!r} are not strictly increasing"
            )
        if len(recs) < window:
            continue
        diffs = [b - a for a, b in zip(frames, frames[1:])]
        step = min(diffs)
        for start in range(0, len(recs) - window + 1, stride):
            if any(d != step for d in diffs[start:start + window - 1]):
                continue
            pts = [(r.x, r.y) for r in recs[start:start + window]]
            observed = Trajectory(tuple(pts[:n]), frame_interval)
            future = Trajectory(tuple(pts[n:]), frame_interval)
            case_id = f"{scene_id}:{agent_id}:{frames[start]}"
            try:
                cases.append(
                    make_test_case(scene, observed, future, horizon=horizon, id=case_id)
                )
            except OutOfBounds:
                continue
    return cases


# ---------------------------------------------------------------------------
# Suite reports


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(", ", ": "))


def _aggregate_record(agg) -> dict:
    return {
        "mr": agg.mr.spec,
        "cases": agg.cases,
        "comparisons": agg.comparisons,
        "wvc_violations": agg.wvc_violations,
        "wvc_rate": agg.wvc_rate,
        "baseline_cases": agg.baseline_cases,
        "baseline_violations": agg.baseline_violations,
        "baseline_rates": agg.baseline_rates,
    }


def write_report(report: SuiteReport, path) -> None:
    lines = []
    summary = {
        "type": "summary",
        "schema_version": SCHEMA_VERSION,
        "sut": report.sut_name,
        "config": asdict(report.config),
        "mrs": [mr.spec for mr in report.mrs],
        "aggregates": [_aggregate_record(a) for a in report.aggregates()],
    }
    lines.append(_dump(summary))
    for case in report.case_reports:
        record = {
            "type": "case",
            "case": case.test_case_id,
            "mr": case.mr.spec,
            "mu_src": case.mu_src,
            "sigma_src": case.sigma_src,
            "pairwise_src": list(case.pairwise_src),
            "violation_counter": case.violation_counter,
            "baselines": None
            if case.baselines is None
            else {key: asdict(case.baselines[key]) for key in METRIC_KEYS},
        }
        lines.append(_dump(record))
        for idx, cmp in enumerate(case.comparisons):
            lines.append(
                _dump(
                    {
                        "type": "comparison",
                        "case": case.test_case_id,
                        "mr": case.mr.spec,
                        "index": idx,
                        "distance": cmp.distance,
                        "p_value": cmp.p_value,
                        "violation": cmp.violation,
                    }
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_report(path) -> SuiteReport:
    text = Path(path).read_text("utf-8")
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not records or records[0].get("type") != "summary":
        raise ParseError("report does not start with a summary record")
    summary = records[0]
    if summary.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"schema_version {summary.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    config = RunConfig(**summary["config"])
    mrs = tuple(MetamorphicRelation.parse(s) for s in summary["mrs"])

    comparisons: dict[tuple[str, str], dict[int, Comparison]] = {}
    case_records = []
    for rec in records[1:]:
        if rec["type"] == "comparison":
            key = (rec["case"], rec["mr"])
            comparisons.setdefault(key, {})[rec["index"]] = Comparison(
                distance=rec["distance"], p_value=rec["p_value"], violation=rec["violation"]
            )
        elif rec["type"] == "case":
            case_records.append(rec)
        else:
            raise ParseError(f"unknown record type {rec['type']!r}")

    reports = []
    for rec in case_records:
        key = (rec["case"], rec["mr"])
        per_index = comparisons.get(key, {})
        ordered = tuple(per_index[i] for i in sorted(per_index))
        baselines = None
        if rec["baselines"] is not None:
            baselines = {
                k: BaselineResult(**rec["baselines"][k]) for k in METRIC_KEYS
            }
        reports.append(
            TestCaseReport(
                test_case_id=rec["case"],
                mr=MetamorphicRelation.parse(rec["mr"]),
                mu_src=rec["mu_src"],
                sigma_src=rec["sigma_src"],
                pairwise_src=tuple(rec["pairwise_src"]),
                comparisons=ordered,
                violation_counter=rec["violation_counter"],
                baselines=baselines,
            )
        )
    return SuiteReport(
        config=config, sut_name=summary["sut"], mrs=mrs, case_reports=tuple(reports)
    )
