"""Secondary acceptance criteria, one PASS/FAIL line each (run with -s)."""

import io
import time

import numpy as np
import pytest
import torch
from PIL import Image

from foldscorer.data import make_toy_dataset
from foldscorer.loss import supcon_loss
from foldscorer.model import build_model, embed_images, save_checkpoint
from foldscorer.separability import separability
from foldscorer.server import EmbeddingServer, request_embedding
from foldscorer.train import TrainConfig, finetune

from test_loss import naive_supcon, rand_batch


def report(ok: bool, name: str, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"{tag}: {name}{suffix}")
    assert ok, f"{name}{suffix}"


def test_supcon_matches_naive_double_loop():
    rng = np.random.default_rng(2024)
    checked = 0
    worst = 0.0
    while checked < 50:
        n = int(rng.integers(4, 17))
        z, y = rand_batch(rng, n)
        if all((y == label).sum() < 2 for label in set(y.tolist())):
            continue
        expected = naive_supcon(z.tolist(), y.tolist(), 0.07)
        got = float(
            supcon_loss(torch.tensor(z, dtype=torch.float64), torch.tensor(y), 0.07)
        )
        worst = max(worst, abs(got - expected))
        checked += 1
    report(worst <= 1e-5, "supcon-oracle", f"50 batches, max |diff| {worst:.2e}")


def test_separability_improves_with_training():
    start = time.monotonic()
    toy = make_toy_dataset(per_class=12, seed=0)
    baseline_model = build_model("tiny")
    torch.manual_seed(0)
    with torch.no_grad():
        before = separability(
            embed_images(baseline_model, toy.images).numpy(), toy.labels
        )
    cfg = TrainConfig(arch="tiny", learning_rate=1e-3, epochs=25, batch_size=16)
    result = finetune(toy, cfg, seed=0)
    after = separability(embed_images(result.model, toy.images).numpy(), toy.labels, epoch=25)
    elapsed = time.monotonic() - start
    loss_dropped = result.epoch_losses[-1] < result.epoch_losses[0]
    report(
        after.delta > before.delta and loss_dropped and elapsed < 900,
        "separability-direction",
        f"delta {before.delta:.4f} -> {after.delta:.4f}, loss "
        f"{result.epoch_losses[0]:.4f} -> {result.epoch_losses[-1]:.4f}, {elapsed:.1f}s",
    )


def test_served_embeddings_contract(tmp_path):
    ckpt = tmp_path / "model.pt"
    save_checkpoint(build_model("tiny"), ckpt, epoch=0)
    server = EmbeddingServer(str(ckpt), "127.0.0.1:0")
    server.start_background()
    try:
        img = Image.new("RGB", (64, 64), (20, 40, 60))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        png = buf.getvalue()
        a = np.array(request_embedding(server.bound_addr, png))
        b = np.array(request_embedding(server.bound_addr, png))
        norm_ok = abs(float(np.linalg.norm(a)) - 1.0) <= 1e-5
        same_ok = float(np.max(np.abs(a - b))) <= 1e-6
        report(
            norm_ok and same_ok,
            "served-embeddings",
            f"norm err {abs(float(np.linalg.norm(a)) - 1.0):.2e}, repeat err {float(np.max(np.abs(a - b))):.2e}",
        )
    finally:
        server.close()
