"""Dual-encoder wrapper: trainable image pathway, frozen text pathway.

Two architectures share one interface:

* ``clip-vit-b16`` wraps a pretrained CLIP via transformers (needs local
  weights; this sandbox cannot download them).
* ``tiny`` is a small convolutional encoder for desk-scale runs and tests.
  It carries a frozen stand-in text projection so the frozen-text contract
  stays checkable end to end.

Both emit 512-dimensional L2-normalized embeddings.
"""

from __future__ import annotations

import hashlib
import io

import numpy as np
import torch
from PIL import Image
from torch import nn

EMBED_DIM = 512


class BadImage(Exception):
    pass


class TinyDualEncoder(nn.Module):
    """Conv image tower plus a frozen text projection."""

    arch = "tiny"
    image_size = 48

    def __init__(self):
        super().__init__()
        self.image_tower = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(64, EMBED_DIM),
        )
        # Text pathway: never trained, only checksummed.
        self.text_tower = nn.Linear(EMBED_DIM, EMBED_DIM)
        for p in self.text_tower.parameters():
            p.requires_grad_(False)

    def image_parameters(self):
        return self.image_tower.parameters()

    def text_state(self) -> dict:
        return self.text_tower.state_dict()

    def preprocess(self, img: Image.Image) -> torch.Tensor:
        img = img.convert("RGB").resize((self.image_size, self.image_size), Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float32) / 255.0
        arr = (arr - 0.5) / 0.5
        return torch.from_numpy(arr).permute(2, 0, 1)

    def embed(self, pixel_batch: torch.Tensor) -> torch.Tensor:
        raw = self.image_tower(pixel_batch)
        return nn.functional.normalize(raw, dim=1)


class ClipDualEncoder(nn.Module):
    """OpenAI CLIP ViT-B/16 image pathway via transformers."""

    arch = "clip-vit-b16"
    image_size = 224

    def __init__(self, checkpoint: str = "openai/clip-vit-base-patch16"):
        super().__init__()
        try:
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError("the clip-vit-b16 encoder needs transformers") from exc
        try:
            self.clip = CLIPModel.from_pretrained(checkpoint)
            self.processor = CLIPProcessor.from_pretrained(checkpoint)
        except Exception as exc:
            raise RuntimeError(
                f"could not load {checkpoint}; pretrained weights must be "
                f"available locally"
            ) from exc
        for p in self.clip.text_model.parameters():
            p.requires_grad_(False)
        for p in self.clip.text_projection.parameters():
            p.requires_grad_(False)

    def image_parameters(self):
        yield from self.clip.vision_model.parameters()
        yield from self.clip.visual_projection.parameters()

    def text_state(self) -> dict:
        state = {f"text_model.{k}": v for k, v in self.clip.text_model.state_dict().items()}
        state.update(
            {f"text_projection.{k}": v for k, v in self.clip.text_projection.state_dict().items()}
        )
        return state

    def preprocess(self, img: Image.Image) -> torch.Tensor:
        out = self.processor(images=img.convert("RGB"), return_tensors="pt")
        return out["pixel_values"][0]

    def embed(self, pixel_batch: torch.Tensor) -> torch.Tensor:
        raw = self.clip.get_image_features(pixel_values=pixel_batch)
        return nn.functional.normalize(raw, dim=1)


ARCHITECTURES = {
    TinyDualEncoder.arch: TinyDualEncoder,
    ClipDualEncoder.arch: ClipDualEncoder,
}


def build_model(arch: str = "tiny") -> nn.Module:
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choices: {sorted(ARCHITECTURES)}")
    return ARCHITECTURES[arch]()


def text_checksum(model) -> str:
    """Stable digest of the frozen text pathway's weights."""
    digest = hashlib.sha256()
    state = model.text_state()
    for key in sorted(state):
        digest.update(key.encode())
        digest.update(state[key].detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def decode_image(png_bytes: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(png_bytes))
        img.load()
        return img
    except Exception as exc:
        raise BadImage(f"cannot decode image: {exc}") from exc


def embed_images(model, images: list[Image.Image]) -> torch.Tensor:
    """Deterministic inference path: eval mode, no grad."""
    model.eval()
    with torch.no_grad():
        batch = torch.stack([model.preprocess(img) for img in images])
        return model.embed(batch)


def save_checkpoint(model, path, epoch: int, extra: dict | None = None) -> None:
    torch.save(
        {
            "arch": model.arch,
            "epoch": epoch,
            "state_dict": model.state_dict(),
            "extra": extra or {},
        },
        path,
    )


def load_checkpoint(path):
    doc = torch.load(path, map_location="cpu", weights_only=False)
    model = build_model(doc["arch"])
    model.load_state_dict(doc["state_dict"])
    model.eval()
    return model, doc
