"""Episode metrics: silhouette IoU, query efficiency, embedding similarity.

The silhouette mask pipeline follows the rendering contract: grayscale with
0.299/0.587/0.114 weights, brightness threshold < 250, largest external
contour flood-filled.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .foldfile import FoldFile
from .pattern import CreasePattern
from .render import DEFAULT_STYLE, RasterImage, RenderStyle, rasterize, render_folded
from .scorer_client import EmbeddingClient, ScorerUnavailable
from .solver import DEFAULT_BUDGET, SolverBudget, fold

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
MASK_THRESHOLD = 250.0


class MetricError(Exception):
    pass


class EmptyMask(MetricError):
    """No pixel fell below the brightness threshold."""


class EmptyUnion(MetricError):
    """IoU needs at least one foreground pixel across both masks."""


class DimensionMismatch(MetricError):
    pass


@dataclass
class BinaryMask:
    width: int
    height: int
    bits: np.ndarray  # (H, W) uint8, values 0/1

    def __post_init__(self):
        if self.bits.shape != (self.height, self.width):
            raise DimensionMismatch("mask buffer shape mismatch")

    @property
    def area(self) -> int:
        return int(self.bits.sum())


def extract_mask(img: RasterImage) -> BinaryMask:
    """Silhouette mask: threshold, keep the largest external contour, fill it."""
    rgb = img.pixels.astype(np.float64)
    gray = (
        rgb[..., 0] * GRAY_WEIGHTS[0]
        + rgb[..., 1] * GRAY_WEIGHTS[1]
        + rgb[..., 2] * GRAY_WEIGHTS[2]
    )
    fg = (gray < MASK_THRESHOLD).astype(np.uint8)
    if not fg.any():
        raise EmptyMask("image has no foreground pixels")
    contours, _ = cv2.findContours(fg * 255, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        raise EmptyMask("no external contour found")
    best = max(range(len(contours)), key=lambda i: (cv2.contourArea(contours[i]), -i))
    filled = np.zeros_like(fg)
    cv2.drawContours(filled, contours, best, color=1, thickness=cv2.FILLED)
    return BinaryMask(img.width, img.height, filled)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"mask sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = int(np.logical_and(a.bits, b.bits).sum())
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        raise EmptyUnion("both masks are empty")
    return inter / union


def query_efficiency(record) -> float:
    """Fraction of attempted fold steps accepted by the validator.

    Works on anything exposing ``steps_attempted`` / ``steps_valid``.
    """
    attempted = record.steps_attempted
    if attempted <= 0:
        return 0.0
    return record.steps_valid / attempted


def silhouette_image(
    f: FoldFile,
    style: RenderStyle = DEFAULT_STYLE,
    size: int = 512,
    budget: SolverBudget = DEFAULT_BUDGET,
) -> RasterImage:
    """Front view of the folded state of a foldable pattern."""
    cp = CreasePattern.from_fold_file(f)
    state = fold(cp, budget)
    return rasterize(render_folded(cp, state, "front", style), size, size)


def geometric_similarity(
    result: FoldFile,
    target: FoldFile,
    style: RenderStyle = DEFAULT_STYLE,
    size: int = 512,
    budget: SolverBudget = DEFAULT_BUDGET,
) -> float:
    """IoU of the two folded silhouettes, rendered under one framing policy."""
    img_a = silhouette_image(result, style, size, budget)
    img_b = silhouette_image(target, style, size, budget)
    return iou(extract_mask(img_a), extract_mask(img_b))


def semantic_similarity(
    result_img: RasterImage,
    target_img: RasterImage,
    scorer: EmbeddingClient,
) -> float:
    """Cosine similarity of served embeddings (unit vectors, plain dot)."""
    za = scorer.embed(result_img.to_png_bytes())
    zb = scorer.embed(target_img.to_png_bytes())
    return float(np.dot(za, zb))


@dataclass
class EpisodeScore:
    qe: float
    gs: float | None
    ss: float | None
    steps_attempted: int
    steps_valid: int

    def as_dict(self) -> dict:
        return {
            "qe": self.qe,
            "gs": self.gs,
            "ss": self.ss,
            "steps_attempted": self.steps_attempted,
            "steps_valid": self.steps_valid,
        }


def score_episode(
    record,
    target: FoldFile,
    style: RenderStyle = DEFAULT_STYLE,
    scorer: EmbeddingClient | None = None,
    size: int = 512,
    budget: SolverBudget = DEFAULT_BUDGET,
) -> EpisodeScore:
    """QE and GS from the record's final state; SS only when a scorer answers.

    ``record`` must expose ``steps_attempted``, ``steps_valid`` and
    ``final_fold`` (the last committed, hence valid, pattern).
    """
    qe = query_efficiency(record)
    img_res = silhouette_image(record.final_fold, style, size, budget)
    img_tgt = silhouette_image(target, style, size, budget)
    gs = iou(extract_mask(img_res), extract_mask(img_tgt))
    ss = None
    if scorer is not None:
        try:
            ss = semantic_similarity(img_res, img_tgt, scorer)
        except ScorerUnavailable:
            ss = None
    return EpisodeScore(
        qe=qe,
        gs=gs,
        ss=ss,
        steps_attempted=record.steps_attempted,
        steps_valid=record.steps_valid,
    )
