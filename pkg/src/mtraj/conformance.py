"""Golden-transcript conformance suite for the predictor wire protocol.

A transcript is a line-delimited JSON file; each line holds either
``{"send": frame}`` (harness to predictor) or ``{"expect": frame}``
(the exact frame the predictor must answer). Each transcript assumes a
fresh connection, so the runner opens one transport per file. Frames
are compared after parsing, so key order is free but every value,
including float digits, must match.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .sutproto import DEFAULT_TIMEOUT, Transport, encode_frame, open_transport

TRANSCRIPT_PACKAGE = "mtraj.transcripts"


def packaged_transcripts() -> list[str]:
    root = resources.files(TRANSCRIPT_PACKAGE.rsplit(".", 1)[0]) / "transcripts"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".jsonl"))


def load_packaged_transcript(name: str) -> list[dict]:
    root = resources.files(TRANSCRIPT_PACKAGE.rsplit(".", 1)[0]) / "transcripts"
    return _parse_transcript((root / name).read_text("utf-8"), name)


def load_transcript(path) -> list[dict]:
    path = Path(path)
    return _parse_transcript(path.read_text("utf-8"), str(path))


def _parse_transcript(text: str, origin: str) -> list[dict]:
    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        step = json.loads(line)
        if not isinstance(step, dict) or not ({"send", "expect"} & step.keys()):
            raise ValueError(f"{origin}:{lineno}: step needs a 'send' or 'expect' key")
        steps.append(step)
    return steps


def _diff(expected, got, path="frame") -> list[str]:
    if type(expected) is not type(got):
        return [f"{path}: expected {type(expected).__name__}, got {type(got).__name__}"]
    if isinstance(expected, dict):
        out = []
        for key in sorted(set(expected) | set(got)):
            if key not in got:
                out.append(f"{path}.{key}: missing")
            elif key not in expected:
                out.append(f"{path}.{key}: unexpected")
            else:
                out.extend(_diff(expected[key], got[key], f"{path}.{key}"))
        return out
    if isinstance(expected, list):
        if len(expected) != len(got):
            return [f"{path}: length {len(got)}, expected {len(expected)}"]
        out = []
        for i, (e, g) in enumerate(zip(expected, got)):
            out.extend(_diff(e, g, f"{path}[{i}]"))
        return out
    if expected != got:
        return [f"{path}: {got!r} != expected {expected!r}"]
    return []


def run_transcript(transport: Transport, steps: Sequence[dict], origin: str,
                   timeout: float = DEFAULT_TIMEOUT) -> list[str]:
    """Drive one transcript over an open transport; returns mismatches."""
    failures = []
    for idx, step in enumerate(steps, start=1):
        if "send" in step:
            transport.send_line(encode_frame(step["send"]))
            continue
        expected = step["expect"]
        try:
            line = transport.recv_line(timeout)
        except Exception as exc:
            failures.append(f"{origin} step {idx}: no frame received ({exc})")
            break
        try:
            got = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            failures.append(f"{origin} step {idx}: undecodable frame ({exc})")
            break
        for problem in _diff(expected, got):
            failures.append(f"{origin} step {idx}: {problem}")
    return failures


def run_conformance(
    sut_spec: str,
    transcript_paths: Optional[Sequence] = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> list[str]:
    """Run every transcript against a predictor; returns all mismatches."""
    if transcript_paths is None:
        suites = [(name, load_packaged_transcript(name)) for name in packaged_transcripts()]
    else:
        suites = [(str(p), load_transcript(p)) for p in transcript_paths]
    failures = []
    for origin, steps in suites:
        with open_transport(sut_spec, timeout) as transport:
            failures.extend(run_transcript(transport, steps, origin, timeout))
    return failures
