import base64
import json
import socket
import struct
import threading
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from foldforge.metrics import (
    BinaryMask,
    DimensionMismatch,
    EmptyMask,
    EmptyUnion,
    extract_mask,
    geometric_similarity,
    iou,
    query_efficiency,
    semantic_similarity,
    silhouette_image,
)
from foldforge.render import RasterImage
from foldforge.scorer_client import EmbeddingClient, ScorerUnavailable, recv_frame, send_frame

from conftest import load_fixture
from oracles import naive_iou, scipy_mask


def solid(width, height, color):
    return RasterImage.blank(width, height, color)


def mask_of(bits: np.ndarray) -> BinaryMask:
    return BinaryMask(bits.shape[1], bits.shape[0], bits.astype(np.uint8))


class TestExtractMask:
    def test_threshold_probe_250_is_background(self):
        with pytest.raises(EmptyMask):
            extract_mask(solid(8, 8, (250, 250, 250)))

    def test_threshold_probe_249_is_foreground(self):
        mask = extract_mask(solid(8, 8, (249, 249, 249)))
        assert mask.area == 64

    def test_all_white_raises(self):
        with pytest.raises(EmptyMask):
            extract_mask(solid(16, 16, (255, 255, 255)))

    def test_solid_square_pixel_count(self):
        img = solid(64, 64, (255, 255, 255))
        img.pixels[10:30, 20:50] = (0, 0, 0)
        mask = extract_mask(img)
        assert mask.area == 20 * 30
        assert mask.bits[10, 20] == 1 and mask.bits[29, 49] == 1
        assert np.array_equal(mask.bits, scipy_mask(img))

    def test_hollow_ring_is_filled(self):
        img = solid(64, 64, (255, 255, 255))
        img.pixels[10:50, 10:50] = (0, 0, 0)
        img.pixels[15:45, 15:45] = (255, 255, 255)  # hole
        mask = extract_mask(img)
        assert mask.area == 40 * 40  # interior flood-filled
        assert mask.bits[32, 32] == 1
        assert np.array_equal(mask.bits, scipy_mask(img))

    def test_largest_component_wins(self):
        img = solid(64, 64, (255, 255, 255))
        img.pixels[2:6, 2:6] = (0, 0, 0)       # 16 px
        img.pixels[20:50, 20:50] = (0, 0, 0)   # 900 px
        mask = extract_mask(img)
        assert mask.area == 900
        assert mask.bits[3, 3] == 0
        assert np.array_equal(mask.bits, scipy_mask(img))

    def test_idempotent_through_rerender(self):
        # Painting a mask black-on-white and extracting again reproduces it.
        for name in ("kite", "single_vertical", "fish"):
            mask = extract_mask(silhouette_image(load_fixture(name)))
            repaint = solid(mask.width, mask.height, (255, 255, 255))
            repaint.pixels[mask.bits.astype(bool)] = (0, 0, 0)
            again = extract_mask(repaint)
            assert np.array_equal(again.bits, mask.bits), name

    def test_grayscale_weights_channelwise(self):
        # Red channel alone: 0.299 * 255 = 76.2 < 250 -> foreground.
        mask = extract_mask(solid(4, 4, (255, 0, 0)))
        assert mask.area == 16
        # A color engineered right at the boundary: 0.299*255 + 0.587*255 = 225.9
        # plus 0.114*220 = 25.08 -> 250.99 >= 250: background.
        with pytest.raises(EmptyMask):
            extract_mask(solid(4, 4, (255, 255, 221)))


class TestIoU:
    def test_identical_masks(self):
        bits = np.zeros((32, 32), dtype=np.uint8)
        bits[4:20, 4:20] = 1
        assert iou(mask_of(bits), mask_of(bits)) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((32, 32), dtype=np.uint8)
        b = np.zeros((32, 32), dtype=np.uint8)
        a[0:4, 0:4] = 1
        b[10:14, 10:14] = 1
        assert iou(mask_of(a), mask_of(b)) == 0.0

    def test_shifted_block_exact(self):
        a = np.zeros((512, 512), dtype=np.uint8)
        b = np.zeros((512, 512), dtype=np.uint8)
        a[100:110, 100:110] = 1
        b[100:110, 105:115] = 1
        assert iou(mask_of(a), mask_of(b)) == 50 / 150

    def test_empty_union(self):
        z = np.zeros((8, 8), dtype=np.uint8)
        with pytest.raises(EmptyUnion):
            iou(mask_of(z), mask_of(z))

    def test_dimension_mismatch(self):
        a = np.ones((8, 8), dtype=np.uint8)
        b = np.ones((8, 9), dtype=np.uint8)
        with pytest.raises(DimensionMismatch):
            iou(mask_of(a), mask_of(b))

    def test_symmetry_and_self_on_random_masks(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            a = mask_of(rng.integers(0, 2, size=(32, 32)))
            b = mask_of(rng.integers(0, 2, size=(32, 32)))
            assert iou(a, b) == iou(b, a)
            if a.area:
                assert iou(a, a) == 1.0

    def test_against_naive_loop(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = rng.integers(0, 2, size=(24, 24))
            b = rng.integers(0, 2, size=(24, 24))
            assert iou(mask_of(a), mask_of(b)) == pytest.approx(naive_iou(a, b), abs=0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_iou_bounds(self, seed):
        rng = np.random.default_rng(seed)
        a = mask_of(rng.integers(0, 2, size=(16, 16)))
        b = mask_of(rng.integers(0, 2, size=(16, 16)))
        try:
            v = iou(a, b)
        except EmptyUnion:
            return
        assert 0.0 <= v <= 1.0


@dataclass
class FakeRecord:
    steps_attempted: int
    steps_valid: int


class TestQueryEfficiency:
    def test_all_valid(self):
        assert query_efficiency(FakeRecord(10, 10)) == 1.0

    def test_seven_of_ten(self):
        assert query_efficiency(FakeRecord(10, 7)) == 0.7

    def test_zero_attempts(self):
        assert query_efficiency(FakeRecord(0, 0)) == 0.0


class TestGeometricSimilarity:
    def test_target_vs_itself(self):
        target = load_fixture("waterbomb")
        assert geometric_similarity(target, target) == 1.0

    def test_blank_vs_half_fold_golden(self):
        # Pipeline-computed golden: a centered 240x480 rectangle against the
        # full 480x480 frame box is exactly half the union.
        value = geometric_similarity(load_fixture("blank"), load_fixture("single_vertical"))
        assert value == pytest.approx(0.5, abs=1e-12)

    def test_mask_dimensions_match_render(self):
        img = silhouette_image(load_fixture("kite"))
        mask = extract_mask(img)
        assert (mask.width, mask.height) == (512, 512)


class StubScorer:
    """Minimal sidecar speaking the length-prefixed frame protocol."""

    def __init__(self, embed_fn):
        self.embed_fn = embed_fn
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(4)
        self.addr = "127.0.0.1:%d" % self.sock.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self):
        while True:
            try:
                conn, _ = self.sock.accept()
            except OSError:
                return
            with conn:
                try:
                    req = recv_frame(conn)
                    png = base64.b64decode(req["image"])
                    send_frame(conn, self.embed_fn(png))
                except Exception:
                    pass

    def close(self):
        self.sock.close()


def unit_vector_from_bytes(png: bytes) -> dict:
    rng = np.random.default_rng(len(png) % 1000)
    v = rng.normal(size=512)
    v /= np.linalg.norm(v)
    return {"embedding": v.tolist()}


class TestSemanticSimilarity:
    def test_identical_images_score_one(self):
        server = StubScorer(unit_vector_from_bytes)
        try:
            client = EmbeddingClient(server.addr)
            img = solid(32, 32, (10, 10, 10))
            s = semantic_similarity(img, img, client)
            assert abs(s - 1.0) <= 1e-5
        finally:
            server.close()

    def test_scorer_offline_raises(self):
        client = EmbeddingClient("127.0.0.1:1")  # nothing listens there
        img = solid(8, 8, (0, 0, 0))
        with pytest.raises(ScorerUnavailable):
            semantic_similarity(img, img, client)

    def test_malformed_embedding_rejected(self):
        server = StubScorer(lambda png: {"embedding": [1.0, 2.0]})
        try:
            client = EmbeddingClient(server.addr)
            img = solid(8, 8, (0, 0, 0))
            with pytest.raises(ScorerUnavailable):
                semantic_similarity(img, img, client)
        finally:
            server.close()

    def test_non_unit_embedding_rejected(self):
        server = StubScorer(lambda png: {"embedding": [2.0] + [0.0] * 511})
        try:
            client = EmbeddingClient(server.addr)
            img = solid(8, 8, (0, 0, 0))
            with pytest.raises(ScorerUnavailable):
                semantic_similarity(img, img, client)
        finally:
            server.close()

    def test_error_reply_maps_to_unavailable(self):
        server = StubScorer(lambda png: {"error": "no checkpoint"})
        try:
            client = EmbeddingClient(server.addr)
            img = solid(8, 8, (0, 0, 0))
            with pytest.raises(ScorerUnavailable):
                semantic_similarity(img, img, client)
        finally:
            server.close()
