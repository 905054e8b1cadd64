"""Embedding sidecar: length-prefixed JSON frames over TCP or Unix sockets.

Frame: 4-byte big-endian payload length, then UTF-8 JSON. Request
``{"image": "<base64 PNG>"}``; response ``{"embedding": [512 floats]}`` or
``{"error": "..."}``. Connections may carry multiple frames; requests are
stateless and safe to serve concurrently.
"""

from __future__ import annotations

import base64
import json
import os
import socket
import struct
import threading

import torch

from .model import BadImage, decode_image, embed_images, load_checkpoint

_HEADER = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024


def send_frame(sock: socket.socket, payload: dict) -> None:
    body = json.dumps(payload).encode("utf-8")
    sock.sendall(_HEADER.pack(len(body)) + body)


def recv_frame(sock: socket.socket) -> dict | None:
    header = _recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME:
        raise ValueError(f"frame of {length} bytes exceeds the limit")
    body = _recv_exact(sock, length)
    return json.loads(body.decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """None on clean EOF before the first byte; error on mid-frame EOF."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                return None
            raise ConnectionError("socket closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class EmbeddingServer:
    """Serves one checkpoint; each request embeds one image deterministically."""

    def __init__(self, checkpoint_path: str, addr: str):
        self.model, self.meta = load_checkpoint(checkpoint_path)
        self.addr = addr
        self._lock = threading.Lock()  # torch module shared across threads
        if addr.startswith("unix:"):
            path = addr[len("unix:"):]
            if os.path.exists(path):
                os.unlink(path)
            self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self.sock.bind(path)
        else:
            host, _, port = addr.rpartition(":")
            self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self.sock.bind((host or "127.0.0.1", int(port)))
        self.sock.listen(16)
        self._closed = False

    @property
    def bound_addr(self) -> str:
        if self.addr.startswith("unix:"):
            return self.addr
        host, port = self.sock.getsockname()[:2]
        return f"{host}:{port}"

    def handle_request(self, request: dict) -> dict:
        if not isinstance(request, dict) or "image" not in request:
            return {"error": "request must carry an 'image' field"}
        try:
            png = base64.b64decode(request["image"], validate=True)
        except Exception:
            return {"error": "image is not valid base64"}
        try:
            img = decode_image(png)
        except BadImage as exc:
            return {"error": str(exc)}
        with self._lock:
            vec = embed_images(self.model, [img])[0]
        return {"embedding": [float(v) for v in vec]}

    def _client_loop(self, conn: socket.socket) -> None:
        with conn:
            while True:
                try:
                    request = recv_frame(conn)
                except (ConnectionError, ValueError, json.JSONDecodeError):
                    return
                if request is None:
                    return
                send_frame(conn, self.handle_request(request))

    def serve_forever(self) -> None:
        while not self._closed:
            try:
                conn, _ = self.sock.accept()
            except OSError:
                return
            threading.Thread(target=self._client_loop, args=(conn,), daemon=True).start()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def close(self) -> None:
        self._closed = True
        self.sock.close()


def request_embedding(addr: str, png_bytes: bytes, timeout: float = 10.0) -> list[float]:
    """One-shot client, mostly for tests and the report command."""
    if addr.startswith("unix:"):
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.settimeout(timeout)
        sock.connect(addr[len("unix:"):])
    else:
        host, _, port = addr.rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout)
    with sock:
        send_frame(sock, {"image": base64.b64encode(png_bytes).decode("ascii")})
        reply = recv_frame(sock)
    if reply is None:
        raise ConnectionError("server closed the connection")
    if "error" in reply:
        raise RuntimeError(reply["error"])
    return reply["embedding"]
