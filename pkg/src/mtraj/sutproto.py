"""Language-neutral wire protocol for external predictors.

Frames are single-line JSON objects (UTF-8, newline-delimited). Four
frame types exist: ``hello``, ``predict_request``, ``predict_response``
and ``error``. The harness speaks first, sending a hello; the predictor
replies with a hello carrying its name and whether it is deterministic
given a seed. Each predict_request is answered by exactly one
predict_response (or error) with a matching ``id``; requests on one
connection are strictly serialized.

The scene grid travels inline as base64 of one byte per cell (row-major)
so requests are self-contained; grids above 16 MiB are rejected. Floats
are printed in shortest round-trip form, so any prediction set survives
a serialize/parse round trip unchanged.

Transports: standard input/output of a child process (``cmd:<command>``)
or a TCP socket (``tcp://host:port``).
"""

from __future__ import annotations

import base64
import json
import selectors
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .core import MtrajError, PredictionSet, Scene, TestCase

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0
MAX_SCENE_BYTES = 16 * 1024 * 1024


class ProtocolError(MtrajError):
    pass


class VersionMismatch(ProtocolError):
    pass


class ProtocolTimeout(ProtocolError):
    pass


class MalformedResponse(ProtocolError):
    pass


class DimensionMismatch(ProtocolError):
    pass


class RemoteError(ProtocolError):
    """The peer answered with an error frame; carries its message."""


def encode_frame(frame: Mapping) -> bytes:
    return json.dumps(frame, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_frame(line: bytes) -> dict:
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedResponse(f"undecodable frame: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("type"), str):
        raise MalformedResponse("frame must be an object with a string 'type'")
    return obj


def scene_to_wire(scene: Scene) -> dict:
    if len(scene.cells) > MAX_SCENE_BYTES:
        raise ProtocolError(
            f"scene grid of {len(scene.cells)} bytes exceeds the {MAX_SCENE_BYTES} limit"
        )
    return {
        "width": scene.width,
        "height": scene.height,
        "num_classes": scene.num_classes,
        "rescale_factor": scene.rescale_factor,
        "cells": base64.b64encode(scene.cells).decode("ascii"),
    }


def scene_from_wire(obj: Mapping) -> Scene:
    try:
        cells = base64.b64decode(obj["cells"], validate=True)
        return Scene(
            width=int(obj["width"]),
            height=int(obj["height"]),
            cells=cells,
            num_classes=int(obj["num_classes"]),
            rescale_factor=float(obj["rescale_factor"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedResponse(f"bad scene payload: {exc}") from exc


def trajectories_to_wire(preds: PredictionSet) -> list:
    return preds.stacked.tolist()


def trajectories_from_wire(payload, k: int, horizon: int) -> PredictionSet:
    if not isinstance(payload, list) or len(payload) != k:
        got = len(payload) if isinstance(payload, list) else type(payload).__name__
        raise DimensionMismatch(f"expected {k} trajectories, got {got}")
    for traj in payload:
        if not isinstance(traj, list) or len(traj) != horizon:
            raise DimensionMismatch(f"expected trajectories of length {horizon}")
        for pt in traj:
            if not isinstance(pt, list) or len(pt) != 2:
                raise DimensionMismatch("trajectory points must be [x, y] pairs")
    try:
        arr = np.asarray(payload, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MalformedResponse(f"non-numeric trajectory payload: {exc}") from exc
    if not np.isfinite(arr).all():
        raise MalformedResponse("trajectory payload contains non-finite values")
    return PredictionSet.from_array(arr)


# ---------------------------------------------------------------------------
# Transports


class Transport:
    """Newline-delimited byte stream with deadline-bounded reads."""

    def __init__(self):
        self._buf = bytearray()

    def send_line(self, data: bytes) -> None:
        raise NotImplementedError

    def _read_chunk(self, timeout: float) -> Optional[bytes]:
        """Return some bytes, b'' on EOF, or None if nothing arrived in time."""
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def recv_line(self, timeout: float = DEFAULT_TIMEOUT) -> bytes:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolTimeout(f"no frame within {timeout} s")
            chunk = self._read_chunk(remaining)
            if chunk is None:
                continue
            if chunk == b"":
                raise MalformedResponse("peer closed the connection")
            self._buf.extend(chunk)
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        return line

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class SubprocessTransport(Transport):
    """Child process speaking the protocol on its stdin/stdout."""

    def __init__(self, argv: list[str]):
        super().__init__()
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)

    def send_line(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise MalformedResponse(f"predictor process is gone: {exc}") from exc

    def _read_chunk(self, timeout: float) -> Optional[bytes]:
        if not self._sel.select(timeout):
            return None
        return self.proc.stdout.read(65536)

    def close(self) -> None:
        self._sel.close()
        if self.proc.stdin:
            try:
                self.proc.stdin.close()
            except BrokenPipeError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        if self.proc.stdout:
            self.proc.stdout.close()


class TcpTransport(Transport):
    def __init__(self, host: str, port: int, connect_timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        self.sock.setblocking(False)
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.sock, selectors.EVENT_READ)

    def send_line(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise MalformedResponse(f"socket send failed: {exc}") from exc

    def _read_chunk(self, timeout: float) -> Optional[bytes]:
        if not self._sel.select(timeout):
            return None
        try:
            return self.sock.recv(65536)
        except BlockingIOError:
            return None

    def close(self) -> None:
        self._sel.close()
        try:
            self.sock.close()
        except OSError:
            pass


def open_transport(spec: str, connect_timeout: float = DEFAULT_TIMEOUT) -> Transport:
    if spec.startswith("cmd:"):
        argv = shlex.split(spec[len("cmd:"):])
        if not argv:
            raise ValueError("empty command in SUT spec")
        return SubprocessTransport(argv)
    if spec.startswith("tcp://"):
        rest = spec[len("tcp://"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp spec {spec!r}, expected tcp://host:port")
        return TcpTransport(host, int(port), connect_timeout)
    raise ValueError(f"unknown transport spec {spec!r}")


# ---------------------------------------------------------------------------
# Client operations


@dataclass(frozen=True)
class Capabilities:
    name: str
    deterministic_given_seed: bool
    protocol_version: int


def handshake(transport: Transport, timeout: float = DEFAULT_TIMEOUT) -> Capabilities:
    transport.send_line(
        encode_frame({"type": "hello", "id": "hello", "protocol_version": PROTOCOL_VERSION})
    )
    reply = decode_frame(transport.recv_line(timeout))
    if reply["type"] == "error":
        raise RemoteError(str(reply.get("message", "unspecified error")))
    if reply["type"] != "hello":
        raise MalformedResponse(f"expected a hello frame, got {reply['type']!r}")
    version = reply.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise VersionMismatch(f"peer speaks protocol {version!r}, need {PROTOCOL_VERSION}")
    return Capabilities(
        name=str(reply.get("name", "")),
        deterministic_given_seed=bool(reply.get("deterministic_given_seed", False)),
        protocol_version=PROTOCOL_VERSION,
    )


def predict_request_frame(tc: TestCase, k: int, seed: int, request_id: str) -> dict:
    return {
        "type": "predict_request",
        "id": request_id,
        "scene": scene_to_wire(tc.scene),
        "observed": tc.observed.xy.tolist(),
        "horizon": tc.horizon,
        "k": k,
        "seed": seed,
    }


def remote_predict(
    transport: Transport,
    tc: TestCase,
    k: int,
    seed: int,
    request_id: str = "req-1",
    timeout: float = DEFAULT_TIMEOUT,
) -> PredictionSet:
    transport.send_line(encode_frame(predict_request_frame(tc, k, seed, request_id)))
    reply = decode_frame(transport.recv_line(timeout))
    if reply["type"] == "error":
        raise RemoteError(str(reply.get("message", "unspecified error")))
    if reply["type"] != "predict_response":
        raise MalformedResponse(f"expected predict_response, got {reply['type']!r}")
    if reply.get("id") != request_id:
        raise MalformedResponse(
            f"response id {reply.get('id')!r} does not match request {request_id!r}"
        )
    return trajectories_from_wire(reply.get("trajectories"), k, tc.horizon)


class RemoteSut:
    """External predictor reachable over a transport, usable as a SUT.

    One connection carries one serialized request stream, so the handle
    it produces declares itself unsafe for concurrent invocation.
    """

    def __init__(self, transport: Transport, capabilities: Capabilities, spec: str,
                 timeout: float = DEFAULT_TIMEOUT):
        self.transport = transport
        self.capabilities = capabilities
        self.spec = spec
        self.timeout = timeout
        self._count = 0

    @classmethod
    def open(cls, spec: str, timeout: float = DEFAULT_TIMEOUT) -> "RemoteSut":
        transport = open_transport(spec, timeout)
        try:
            caps = handshake(transport, timeout)
        except Exception:
            transport.close()
            raise
        return cls(transport, caps, spec, timeout)

    def predict(self, tc: TestCase, k: int, seed: int) -> PredictionSet:
        self._count += 1
        return remote_predict(
            self.transport, tc, k, seed, request_id=f"req-{self._count}", timeout=self.timeout
        )

    def handle(self):
        from .harness import SutHandle

        return SutHandle(
            name=self.capabilities.name or self.spec,
            invoke=self.predict,
            deterministic_given_seed=self.capabilities.deterministic_given_seed,
            concurrent_safe=False,
            closer=self.close,
        )

    def close(self) -> None:
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
