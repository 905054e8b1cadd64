"""Datasets, the class-balanced batch sampler, and a synthetic toy set."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class DegenerateDataset(Exception):
    """Not enough classes or samples to form positive pairs."""


@dataclass
class LabeledImages:
    images: list[Image.Image]
    labels: list[int]
    class_names: list[str]

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")

    def __len__(self) -> int:
        return len(self.images)

    def by_class(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, y in enumerate(self.labels):
            out.setdefault(y, []).append(i)
        return out

    def validate_for_training(self) -> None:
        groups = self.by_class()
        if len(groups) < 2:
            raise DegenerateDataset("need at least 2 classes")
        if len(self) < 4:
            raise DegenerateDataset("need at least 2 images in at least 2 classes")


def load_image_folder(root) -> LabeledImages:
    """One subdirectory per class, PNG/JPEG files inside."""
    root = Path(root)
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise DegenerateDataset(f"no class directories under {root}")
    images: list[Image.Image] = []
    labels: list[int] = []
    for y, name in enumerate(classes):
        for path in sorted((root / name).glob("*")):
            if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            img = Image.open(path)
            img.load()
            images.append(img)
            labels.append(y)
    return LabeledImages(images, labels, classes)


def stratified_split(
    dataset: LabeledImages, val_fraction: float = 0.1, seed: int = 0
) -> tuple[LabeledImages, LabeledImages]:
    """Per-class split with a fixed seed; every class keeps at least one
    training sample."""
    rng = random.Random(seed)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for _, members in sorted(dataset.by_class().items()):
        members = list(members)
        rng.shuffle(members)
        k = min(len(members) - 1, int(round(len(members) * val_fraction)))
        val_idx.extend(members[:k])
        train_idx.extend(members[k:])
    def subset(idx):
        return LabeledImages(
            [dataset.images[i] for i in idx],
            [dataset.labels[i] for i in idx],
            dataset.class_names,
        )
    return subset(sorted(train_idx)), subset(sorted(val_idx))


class BalancedBatchSampler:
    """Batches of ``batch_size`` built from two-image class slots.

    Each batch draws batch_size // 2 class slots (classes cycle when there
    are fewer classes than slots) and takes two samples per slot, so every
    represented class has a positive pair; an odd remainder is filled
    uniformly.
    """

    def __init__(self, labels: list[int], batch_size: int, seed: int = 0):
        if batch_size < 4:
            raise ValueError("batch size must be at least 4")
        self.labels = list(labels)
        self.batch_size = batch_size
        self.seed = seed
        self.by_class: dict[int, list[int]] = {}
        for i, y in enumerate(self.labels):
            self.by_class.setdefault(y, []).append(i)
        if len(self.by_class) < 2:
            raise DegenerateDataset("need at least 2 classes to sample batches")
        self.batches_per_epoch = max(1, len(self.labels) // batch_size)

    def epoch(self, epoch_index: int) -> list[list[int]]:
        rng = random.Random(self.seed * 1_000_003 + epoch_index)
        classes = sorted(self.by_class)
        batches = []
        for _ in range(self.batches_per_epoch):
            batch: list[int] = []
            slots = self.batch_size // 2
            for s in range(slots):
                y = classes[rng.randrange(len(classes))]
                members = self.by_class[y]
                if len(members) >= 2:
                    batch.extend(rng.sample(members, 2))
                else:
                    batch.extend(rng.choices(members, k=2))
            if self.batch_size % 2:
                batch.append(rng.randrange(len(self.labels)))
            batches.append(batch)
        return batches


def make_toy_dataset(
    per_class: int = 12, image_size: int = 48, seed: int = 0
) -> LabeledImages:
    """Three classes of solid shapes (disk, square, triangle) with jittered
    placement; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    images: list[Image.Image] = []
    labels: list[int] = []
    yy, xx = np.mgrid[0:image_size, 0:image_size]
    for y, shape in enumerate(("disk", "square", "triangle")):
        for _ in range(per_class):
            cx = image_size / 2 + rng.uniform(-4, 4)
            cy = image_size / 2 + rng.uniform(-4, 4)
            r = image_size * rng.uniform(0.22, 0.33)
            if shape == "disk":
                mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
            elif shape == "square":
                mask = (np.abs(xx - cx) <= r) & (np.abs(yy - cy) <= r)
            else:
                mask = (
                    (yy >= cy - r)
                    & (yy <= cy + r)
                    & (np.abs(xx - cx) <= (yy - (cy - r)) / 2)
                )
            arr = np.full((image_size, image_size, 3), 255, dtype=np.uint8)
            shade = int(rng.uniform(0, 90))
            arr[mask] = (shade, shade, shade)
            images.append(Image.fromarray(arr))
            labels.append(y)
    return LabeledImages(images, labels, ["disk", "square", "triangle"])
