import base64
import io
import json
import socket
import struct

import numpy as np
import pytest
from PIL import Image

from foldscorer.model import build_model, save_checkpoint
from foldscorer.server import EmbeddingServer, request_embedding, send_frame, recv_frame


def png_bytes(color=(30, 60, 90), size=32) -> bytes:
    img = Image.new("RGB", (size, size), color)
    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "model.pt"
    save_checkpoint(build_model("tiny"), path, epoch=0)
    srv = EmbeddingServer(str(path), "127.0.0.1:0")
    srv.start_background()
    yield srv
    srv.close()


class TestServer:
    def test_unit_norm(self, server):
        vec = request_embedding(server.bound_addr, png_bytes())
        assert len(vec) == 512
        norm = float(np.linalg.norm(vec))
        assert abs(norm - 1.0) <= 1e-5

    def test_identical_input_identical_output(self, server):
        a = request_embedding(server.bound_addr, png_bytes((1, 2, 3)))
        b = request_embedding(server.bound_addr, png_bytes((1, 2, 3)))
        assert np.max(np.abs(np.array(a) - np.array(b))) <= 1e-6

    def test_different_inputs_differ(self, server):
        a = request_embedding(server.bound_addr, png_bytes((0, 0, 0)))
        b = request_embedding(server.bound_addr, png_bytes((200, 200, 200)))
        assert np.max(np.abs(np.array(a) - np.array(b))) > 1e-6

    def test_bad_image_reports_error(self, server):
        with pytest.raises(RuntimeError):
            request_embedding(server.bound_addr, b"not a png")

    def test_missing_field_reports_error(self, server):
        host, _, port = server.bound_addr.rpartition(":")
        with socket.create_connection((host, int(port)), 5.0) as sock:
            send_frame(sock, {"not_image": "x"})
            reply = recv_frame(sock)
        assert "error" in reply

    def test_invalid_base64_reports_error(self, server):
        host, _, port = server.bound_addr.rpartition(":")
        with socket.create_connection((host, int(port)), 5.0) as sock:
            send_frame(sock, {"image": "!!!not-base64!!!"})
            reply = recv_frame(sock)
        assert "error" in reply

    def test_multiple_frames_per_connection(self, server):
        host, _, port = server.bound_addr.rpartition(":")
        with socket.create_connection((host, int(port)), 5.0) as sock:
            for color in ((0, 0, 0), (9, 9, 9), (99, 99, 99)):
                send_frame(sock, {"image": base64.b64encode(png_bytes(color)).decode()})
                reply = recv_frame(sock)
                assert len(reply["embedding"]) == 512

    def test_raw_frame_layout(self, server):
        # 4-byte big-endian length prefix, JSON payload.
        host, _, port = server.bound_addr.rpartition(":")
        body = json.dumps(
            {"image": base64.b64encode(png_bytes()).decode()}
        ).encode()
        with socket.create_connection((host, int(port)), 5.0) as sock:
            sock.sendall(struct.pack(">I", len(body)) + body)
            header = sock.recv(4)
            (length,) = struct.unpack(">I", header)
            payload = b""
            while len(payload) < length:
                payload += sock.recv(length - len(payload))
        reply = json.loads(payload.decode())
        assert "embedding" in reply

    def test_unix_socket(self, tmp_path):
        ckpt = tmp_path / "m.pt"
        save_checkpoint(build_model("tiny"), ckpt, epoch=0)
        addr = f"unix:{tmp_path}/scorer.sock"
        srv = EmbeddingServer(str(ckpt), addr)
        srv.start_background()
        try:
            vec = request_embedding(addr, png_bytes())
            assert len(vec) == 512
        finally:
            srv.close()
