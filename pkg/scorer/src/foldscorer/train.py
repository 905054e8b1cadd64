"""Contrastive fine-tuning of the image pathway; text pathway stays frozen."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import BalancedBatchSampler, DegenerateDataset, LabeledImages
from .loss import DEFAULT_TAU, NoPositivePairs, supcon_loss
from .model import build_model, text_checksum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Defaults mirror the published fine-tuning recipe; desk-scale runs on
    the tiny encoder usually want a larger learning rate."""

    arch: str = "clip-vit-b16"
    learning_rate: float = 5e-6
    weight_decay: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    tau: float = DEFAULT_TAU
    grad_clip_norm: float = 1.0
    checkpoint_epochs: tuple[int, ...] = (25, 50, 75, 100)
    checkpoint_dir: str | None = None


@dataclass
class TrainResult:
    model: object
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    checkpoints: dict[int, str] = field(default_factory=dict)
    text_checksum_before: str = ""
    text_checksum_after: str = ""


def finetune(dataset: LabeledImages, cfg: TrainConfig, seed: int = 0) -> TrainResult:
    """AdamW + cosine annealing over class-balanced batches of SupCon loss.

    Only image-pathway parameters receive gradients; checkpoints are written
    at the configured epochs when a directory is set.
    """
    dataset.validate_for_training()
    torch.manual_seed(seed)
    model = build_model(cfg.arch)
    result = TrainResult(model=model, text_checksum_before=text_checksum(model))

    sampler = BalancedBatchSampler(dataset.labels, cfg.batch_size, seed=seed)
    optimizer = torch.optim.AdamW(
        model.image_parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.epochs)

    # Preprocess once; the toy/benchmark datasets fit in memory.
    pixels = torch.stack([model.preprocess(img) for img in dataset.images])
    labels = torch.tensor(dataset.labels, dtype=torch.long)

    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        epoch_losses = []
        for batch_idx in sampler.epoch(epoch):
            idx = torch.tensor(batch_idx, dtype=torch.long)
            emb = model.embed(pixels[idx])
            try:
                loss = supcon_loss(emb, labels[idx], cfg.tau)
            except NoPositivePairs:
                continue  # balanced sampler makes this unreachable in practice
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(
                [p for p in model.image_parameters() if p.requires_grad],
                cfg.grad_clip_norm,
            )
            optimizer.step()
            value = float(loss.detach())
            result.step_losses.append(value)
            epoch_losses.append(value)
        scheduler.step()
        mean_loss = sum(epoch_losses) / max(len(epoch_losses), 1)
        result.epoch_losses.append(mean_loss)
        log.info("epoch %d: loss %.6f", epoch, mean_loss)
        if ckpt_dir and epoch in cfg.checkpoint_epochs:
            from .model import save_checkpoint

            path = str(ckpt_dir / f"epoch_{epoch:04d}.pt")
            save_checkpoint(model, path, epoch, extra={"loss": mean_loss})
            result.checkpoints[epoch] = path

    if ckpt_dir:
        from .model import save_checkpoint

        path = str(ckpt_dir / "final.pt")
        save_checkpoint(model, path, cfg.epochs, extra={"loss": result.epoch_losses[-1]})
        result.checkpoints[cfg.epochs] = result.checkpoints.get(cfg.epochs, path)

    result.text_checksum_after = text_checksum(model)
    if result.text_checksum_after != result.text_checksum_before:
        raise RuntimeError("text pathway changed during training")
    return result
