"""Client for the embedding sidecar.

Wire format: length-prefixed JSON frames over a TCP or Unix socket. Each
frame is a 4-byte big-endian payload length followed by UTF-8 JSON. Request:
``{"image": "<base64 PNG>"}``; response: ``{"embedding": [512 floats]}`` or
``{"error": "..."}``. One request per frame; connections may be reused.

The sidecar address comes from, in order: an explicit argument, the
``FOLDFORGE_SCORER_ADDR`` environment variable, or the config file.
"""

from __future__ import annotations

import base64
import json
import os
import socket
import struct

import numpy as np

SCORER_ADDR_ENV = "FOLDFORGE_SCORER_ADDR"
EMBEDDING_DIM = 512
_HEADER = struct.Struct(">I")


class ScorerUnavailable(Exception):
    """The sidecar did not answer with a usable embedding."""


def send_frame(sock: socket.socket, payload: dict) -> None:
    body = json.dumps(payload).encode("utf-8")
    sock.sendall(_HEADER.pack(len(body)) + body)


def recv_frame(sock: socket.socket) -> dict:
    header = _recv_exact(sock, _HEADER.size)
    (length,) = _HEADER.unpack(header)
    body = _recv_exact(sock, length)
    return json.loads(body.decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            raise ConnectionError("socket closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def resolve_scorer_addr(explicit: str | None = None, configured: str | None = None) -> str | None:
    return explicit or os.environ.get(SCORER_ADDR_ENV) or configured


class EmbeddingClient:
    """Requests one embedding per call; every failure maps to
    ScorerUnavailable so callers can report the score as absent."""

    def __init__(self, addr: str, timeout: float = 10.0):
        self.addr = addr
        self.timeout = timeout

    def _connect(self) -> socket.socket:
        if self.addr.startswith("unix:"):
            path = self.addr[len("unix:"):]
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(self.timeout)
            sock.connect(path)
            return sock
        host, _, port = self.addr.rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)), self.timeout)
        return sock

    def embed(self, png_bytes: bytes) -> np.ndarray:
        try:
            with self._connect() as sock:
                send_frame(sock, {"image": base64.b64encode(png_bytes).decode("ascii")})
                reply = recv_frame(sock)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            raise ScorerUnavailable(f"scorer at {self.addr}: {exc}") from exc
        if "error" in reply:
            raise ScorerUnavailable(f"scorer error: {reply['error']}")
        vec = reply.get("embedding")
        if not isinstance(vec, list) or len(vec) != EMBEDDING_DIM:
            raise ScorerUnavailable("scorer returned a malformed embedding")
        arr = np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-3:
            raise ScorerUnavailable(f"embedding norm {norm} is not unit")
        return arr
